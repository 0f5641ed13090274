"""Empirical (S, X) distributions from delimited tabular data."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .dist import Channel, Prior, validate
from .errors import EmptyFile, InputError, MissingColumn


class SingleValueAlphabet(UserWarning):
    pass


@dataclass(frozen=True)
class IngestSpec:
    path: str
    s_columns: tuple
    x_columns: tuple
    perturbation: float = 1e-3
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "s_columns", tuple(self.s_columns))
        object.__setattr__(self, "x_columns", tuple(self.x_columns))
        if not self.s_columns or not self.x_columns:
            raise InputError("both S and X need at least one column")
        overlap = set(self.s_columns) & set(self.x_columns)
        if overlap:
            raise InputError(f"columns cannot belong to both S and X: {sorted(overlap)}")
        if not self.perturbation >= 0:
            raise InputError(f"perturbation must be >= 0, got {self.perturbation!r}")


@dataclass(frozen=True)
class Ingested:
    prior: Prior
    channel: Channel
    s_alphabet: list
    x_alphabet: list
    counts: np.ndarray

    @property
    def s_index(self) -> dict:
        return {v: k for k, v in enumerate(self.s_alphabet)}

    @property
    def x_index(self) -> dict:
        return {v: i for i, v in enumerate(self.x_alphabet)}


def _value_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def _tuple_key(t):
    return tuple(_value_key(v) for v in t)


def perturb_and_normalize(counts, perturbation: float = 1e-3) -> np.ndarray:
    """Empirical pmf of ``counts``, plus ``perturbation`` in every cell, renormalized."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    freq = counts / total if total > 0 else np.zeros_like(counts)
    cells = freq + perturbation
    z = cells.sum()
    if z <= 0:
        raise InputError("no observations and no perturbation: distribution undefined")
    return cells / z


def split_joint(joint) -> tuple[np.ndarray, np.ndarray]:
    """``P_{S,X}`` (K x M) into the X-marginal and the column-stochastic ``P_{S|X}``."""
    joint = np.asarray(joint, dtype=float)
    p = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(p > 0, joint / np.where(p > 0, p, 1.0), 1.0 / joint.shape[0])
    return p, s


def read_rows(path, delimiter=","):
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    return header, rows


def ingest(spec: IngestSpec) -> Ingested:
    header, rows = read_rows(spec.path, spec.delimiter)
    if not rows:
        raise EmptyFile(f"{spec.path} has a header but no data rows")
    missing = [c for c in spec.s_columns + spec.x_columns if c not in header]
    if missing:
        raise MissingColumn(f"{spec.path}: columns not found: {missing}")
    s_pos = [header.index(c) for c in spec.s_columns]
    x_pos = [header.index(c) for c in spec.x_columns]
    try:
        s_vals = [tuple(row[c].strip() for c in s_pos) for row in rows]
        x_vals = [tuple(row[c].strip() for c in x_pos) for row in rows]
    except IndexError:
        raise InputError(f"{spec.path}: a row has fewer fields than the header") from None

    s_alpha = sorted(set(s_vals), key=_tuple_key)
    x_alpha = sorted(set(x_vals), key=_tuple_key)
    if len(x_alpha) == 1:
        warnings.warn("X takes a single value; every mapping discloses nothing", SingleValueAlphabet,
                      stacklevel=2)
    s_idx = {v: k for k, v in enumerate(s_alpha)}
    x_idx = {v: i for i, v in enumerate(x_alpha)}
    counts = np.zeros((len(s_alpha), len(x_alpha)))
    np.add.at(counts, ([s_idx[v] for v in s_vals], [x_idx[v] for v in x_vals]), 1.0)

    p, s = split_joint(perturb_and_normalize(counts, spec.perturbation))
    prior, channel = validate(p, s)
    return Ingested(prior, channel, s_alpha, x_alpha, counts)
