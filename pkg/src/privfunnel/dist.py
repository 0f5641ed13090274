"""Validated discrete distributions and the information measures built on them.

All quantities are in nats. Matrices follow the channel convention
``s[k, i] = P(S = s_k | X = x_i)`` (columns sum to one) and joint couplings
``u[i, j] = P(X = x_i, Y = y_j)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import xlogy

from .errors import (
    DimensionMismatch,
    InfeasibleThreshold,
    InputError,
    NegativeEntry,
    RowOrColumnSumNotOne,
    ShapeMismatch,
    SupportMismatch,
)

EXACT_TOL = 1e-12
SOLVER_TOL = 1e-8


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Prior:
    p: np.ndarray

    @property
    def m(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class Channel:
    s: np.ndarray

    @property
    def k(self) -> int:
        return self.s.shape[0]

    @property
    def m(self) -> int:
        return self.s.shape[1]


def validate(prior, channel, tol: float = EXACT_TOL) -> tuple[Prior, Channel]:
    """Check raw inputs and wrap them as immutable :class:`Prior` / :class:`Channel`."""
    p = np.asarray(prior, dtype=float)
    s = np.asarray(channel, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatch(f"prior must be a non-empty vector, got shape {p.shape}")
    if s.ndim != 2 or s.shape[0] < 1:
        raise DimensionMismatch(f"channel must be a K x M matrix, got shape {s.shape}")
    if s.shape[1] != p.size:
        raise DimensionMismatch(f"channel has {s.shape[1]} columns but prior has {p.size} entries")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(s))):
        raise InputError("distributions must be finite")

    neg = np.flatnonzero(p < 0)
    if neg.size:
        raise NegativeEntry("prior", int(neg[0]), float(p[neg[0]]))
    neg = np.argwhere(s < 0)
    if neg.size:
        k, i = neg[0]
        raise NegativeEntry("channel", (int(k), int(i)), float(s[k, i]))

    dev = p.sum() - 1.0
    if abs(dev) > tol:
        raise RowOrColumnSumNotOne("prior", 0, dev)
    col_dev = s.sum(axis=0) - 1.0
    bad = np.flatnonzero(np.abs(col_dev) > tol)
    if bad.size:
        raise RowOrColumnSumNotOne("channel column", int(bad[0]), float(col_dev[bad[0]]))
    return Prior(_frozen(p)), Channel(_frozen(s))


@dataclass(frozen=True)
class PfInstance:
    """One privacy-funnel problem: prior, channel, codebook size and threshold."""

    prior: Prior
    channel: Channel
    n: int
    r_threshold: float
    r_hat: float = field(init=False)

    def __post_init__(self):
        if self.channel.m != self.prior.m:
            raise DimensionMismatch(
                f"channel has {self.channel.m} columns but prior has {self.prior.m} entries"
            )
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"codebook size must be a positive integer, got {self.n!r}")
        h = entropy(self.prior)
        if not np.isfinite(self.r_threshold) or self.r_threshold < 0:
            raise InputError(f"threshold R must be a nonnegative number, got {self.r_threshold!r}")
        if self.r_threshold > h + EXACT_TOL:
            raise InfeasibleThreshold(
                f"R = {self.r_threshold:.12g} exceeds H(X) = {h:.12g}; no feasible mapping exists"
            )
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "r_hat", self.r_threshold - h)

    @classmethod
    def from_arrays(cls, p, s, n: int, r: float) -> "PfInstance":
        prior, channel = validate(p, s)
        return cls(prior, channel, n, r)

    @property
    def p(self) -> np.ndarray:
        return self.prior.p

    @property
    def s(self) -> np.ndarray:
        return self.channel.s

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(M, K, N)``."""
        return self.prior.m, self.channel.k, self.n

    def with_threshold(self, r: float) -> "PfInstance":
        return PfInstance(self.prior, self.channel, self.n, r)

    def with_n(self, n: int) -> "PfInstance":
        return PfInstance(self.prior, self.channel, n, self.r_threshold)


def entropy(prior) -> float:
    p = prior.p if isinstance(prior, Prior) else np.asarray(prior, dtype=float)
    return float(max(-xlogy(p, p).sum(), 0.0))


def s_marginal(instance: PfInstance) -> np.ndarray:
    return instance.s @ instance.p


def kl(a, b) -> float:
    """``sum a log(a/b)`` with ``0 log 0 = 0``; raises on ``a > 0, b = 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((a > 0) & (b <= 0)):
        raise SupportMismatch("KL divergence with a > 0 where b = 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a > 0, a * (np.log(np.where(a > 0, a, 1.0)) - np.log(np.where(a > 0, b, 1.0))), 0.0)
    return float(terms.sum())


def _mi_from_joint(joint: np.ndarray) -> float:
    """Mutual information of a 2-D joint pmf.

    Logs of the marginals are subtracted separately: forming ``outer(row, col)``
    first can underflow to 0 beneath a positive joint entry.
    """
    row = joint.sum(axis=1)
    col = joint.sum(axis=0)
    pos = joint > 0
    ii, jj = np.nonzero(pos)
    a = joint[pos]
    return float(np.sum(a * (np.log(a) - np.log(row[ii]) - np.log(col[jj]))))


def mutual_information_sx(instance: PfInstance) -> float:
    """I(S;X) for the instance's prior and channel."""
    joint = instance.s * instance.p[None, :]
    return max(_mi_from_joint(joint), 0.0)


def check_coupling(u, instance: PfInstance, tol: float = SOLVER_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    m, _, n = instance.shape
    if u.shape != (m, n):
        raise ShapeMismatch(f"coupling must have shape {(m, n)}, got {u.shape}")
    if np.any(u < 0):
        raise NegativeEntry("coupling", tuple(int(v) for v in np.argwhere(u < 0)[0]), float(u.min()))
    if abs(u.sum() - 1.0) > 1e-10:
        raise RowOrColumnSumNotOne("coupling total", 0, float(u.sum() - 1.0))
    dev = u.sum(axis=1) - instance.p
    bad = np.flatnonzero(np.abs(dev) > tol)
    if bad.size:
        raise RowOrColumnSumNotOne("coupling row vs prior", int(bad[0]), float(dev[bad[0]]))
    return u


def leakage_and_disclosure(u, instance: PfInstance) -> tuple[float, float]:
    """Return ``(I(S;Y), I(X;Y))`` for the joint coupling ``u`` of X and Y."""
    u = check_coupling(u, instance)
    leak = _mi_from_joint(instance.s @ u)
    disclosure = _mi_from_joint(u)
    return max(leak, 0.0), max(disclosure, 0.0)


def load_distribution(path) -> tuple[Prior, Channel]:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return validate(doc["p_x"], doc["p_s_given_x"])
    except KeyError as exc:
        raise InputError(f"{path}: missing key {exc.args[0]!r}") from None


def dump_distribution(prior: Prior, channel: Channel, path=None, **extra) -> str:
    doc = {"p_x": prior.p.tolist(), "p_s_given_x": channel.s.tolist(), **extra}
    text = json.dumps(doc, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
