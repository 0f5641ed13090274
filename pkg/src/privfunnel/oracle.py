"""Brute-force reference solutions for tiny privacy-funnel instances."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.special import xlogy

from .dist import PfInstance, entropy, mutual_information_sx, s_marginal
from .errors import InputError, TooLarge

MAX_FREE_COORDS = 6
MAX_GRID_POINTS = 200_000_000
CHUNK = 200_000


@dataclass(frozen=True)
class GridSpec:
    step: float = 0.005
    constraint_slack: float = 0.0

    def __post_init__(self):
        if not (0 < self.step <= 0.5):
            raise InputError(f"grid step must lie in (0, 0.5], got {self.step!r}")
        if self.constraint_slack < 0:
            raise InputError(f"constraint_slack must be >= 0, got {self.constraint_slack!r}")

    @property
    def divisions(self) -> int:
        d = round(1.0 / self.step)
        if abs(d * self.step - 1.0) > 1e-9:
            raise InputError(f"grid step {self.step} does not divide 1")
        return d


@dataclass(frozen=True)
class GridResult:
    i_sy: float
    conditional: np.ndarray | None
    i_xy: float
    points: int
    feasible_points: int

    def __iter__(self):
        return iter((self.i_sy, self.conditional))


def simplex_grid(n: int, divisions: int) -> np.ndarray:
    """All length-``n`` probability vectors with entries in ``{0, 1/d, ..., 1}``.

    Rows come out in lexicographic order of their integer numerators.
    """
    if n == 1:
        return np.ones((1, 1))
    rows = []
    # stars and bars: bar positions among divisions + n - 1 slots
    for bars in combinations(range(divisions + n - 1), n - 1):
        edges = (-1,) + bars + (divisions + n - 1,)
        rows.append([edges[t + 1] - edges[t] - 1 for t in range(n)])
    rows = np.array(rows, dtype=float)
    order = np.lexsort(rows.T[::-1])
    return rows[order] / divisions


def _neg_entropy_rows(a, axes):
    return xlogy(a, a).sum(axis=axes)


def grid_search(instance: PfInstance, spec: GridSpec = GridSpec()) -> GridResult:
    """Minimize I(S;Y) over every grid conditional P_{Y|X} meeting I(X;Y) >= R - slack.

    Ties keep the lexicographically first grid point (row 0 most significant).
    """
    m, _, n = instance.shape
    if m * (n - 1) > MAX_FREE_COORDS:
        raise TooLarge(f"{m * (n - 1)} free coordinates exceed the oracle limit of {MAX_FREE_COORDS}")
    rows = simplex_grid(n, spec.divisions)
    per_row = rows.shape[0]
    total = per_row**m
    if total > MAX_GRID_POINTS:
        raise TooLarge(f"grid has {total} points; limit is {MAX_GRID_POINTS}")

    p, s = instance.p, instance.s
    h_x = entropy(instance.prior)
    ps = s_marginal(instance)
    h_s = -float(xlogy(ps, ps).sum())
    need = instance.r_threshold - spec.constraint_slack
    radix = per_row ** np.arange(m - 1, -1, -1)

    best, best_idx, best_ixy, feasible = math.inf, -1, math.nan, 0
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(start + CHUNK, total))
        digits = (idx[:, None] // radix[None, :]) % per_row  # (C, M)
        u = p[None, :, None] * rows[digits]  # (C, M, N)
        r = u.sum(axis=1)
        h_y = -_neg_entropy_rows(r, 1)
        i_xy = h_x + h_y + _neg_entropy_rows(u, (1, 2))
        joint_sy = np.einsum("ki,cin->ckn", s, u)
        i_sy = h_s + h_y + _neg_entropy_rows(joint_sy, (1, 2))
        ok = i_xy >= need
        feasible += int(ok.sum())
        if not ok.any():
            continue
        cand = np.where(ok, i_sy, np.inf)
        k = int(np.argmin(cand))
        if cand[k] < best:
            best, best_idx, best_ixy = float(cand[k]), int(idx[k]), float(i_xy[k])

    if best_idx < 0:
        return GridResult(math.inf, None, math.nan, total, 0)
    digits = (best_idx // radix) % per_row
    return GridResult(max(best, 0.0), rows[digits].copy(), best_ixy, total, feasible)


def identity_endpoint(instance: PfInstance) -> tuple[float, float]:
    """``(I(S;X), H(X))``: leakage and disclosure of releasing X itself."""
    return mutual_information_sx(instance), entropy(instance.prior)
