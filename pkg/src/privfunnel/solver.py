"""Alternating expectation-minimization (AEM) for the discrete privacy funnel.

One iteration refreshes the auxiliary posterior ``q`` (the E-step), then
minimizes the relaxed objective in closed form over ``u`` (with the disclosure
multiplier ``lam`` found by a safeguarded Newton search), ``r`` and ``w``.

Arrays: ``u``, ``w``, ``phi`` are ``M x N``; ``r`` has length ``N``; ``q`` is
``M x N x K`` with ``q[i, j, k]`` the posterior of ``x_i`` given ``(y_j, s_k)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import rel_entr, xlogy

from .dist import PfInstance, leakage_and_disclosure, s_marginal
from .errors import AllWeightsZeroRow, InputError, NewtonStall, NoRoot, SupportMismatch

log = logging.getLogger(__name__)

LAMBDA_CAP = 2.0**60
MIN_DERIVATIVE = 1e-14
INIT_MODES = ("diag_like", "random")


@dataclass(frozen=True)
class SolveConfig:
    max_iter: int = 500
    obj_tol: float = 1e-10
    newton_tol: float = 1e-10
    newton_max: int = 50
    init_mode: str = "diag_like"
    smoothing_eps: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InputError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if int(self.newton_max) != self.newton_max or self.newton_max < 1:
            raise InputError(f"newton_max must be a positive integer, got {self.newton_max!r}")
        for name in ("obj_tol", "newton_tol", "smoothing_eps"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InputError(f"{name} must be positive, got {value!r}")
        if self.init_mode not in INIT_MODES:
            raise InputError(f"init_mode must be one of {INIT_MODES}, got {self.init_mode!r}")


@dataclass(frozen=True)
class SolverState:
    """One AEM iterate.

    ``w_prev`` is the ``w`` the previous iteration fed into its ``u``-update;
    the descent decomposition needs it for the ``w`` term.
    """

    u: np.ndarray
    w: np.ndarray
    r: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    lam: float
    iter: int
    objective: float
    w_prev: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class DescentReport:
    """Per-iteration split of the objective drop into KL divergences.

    ``slack`` is ``lam_new * (sum u_old log w_prev - R_hat)``. It vanishes
    whenever the previous iteration left the disclosure constraint tight (or
    ``lam_new = 0``); only then is the drop exactly the four KL terms.
    ``saturated`` marks a step where no finite ``lam`` existed and the
    ``lam -> inf`` limit was used; the decomposition does not apply there.
    """

    kl_q: float
    kl_u: float
    kl_r: float
    kl_w: float
    slack: float
    realized_drop: float
    saturated: bool = False

    @property
    def kl_sum(self) -> float:
        return self.kl_q + self.kl_u + self.kl_r + self.kl_w

    @property
    def identity_gap(self) -> float:
        """``realized_drop`` minus all five terms; zero up to rounding."""
        return self.realized_drop - (self.kl_sum + self.slack)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    objective: float
    i_sy: float
    i_xy: float
    lam: float
    kl_q: float
    kl_u: float
    kl_r: float
    kl_w: float
    slack: float
    realized_drop: float
    saturated: bool = False

    FIELDS = ("iter", "objective", "i_sy", "i_xy", "lam", "kl_q", "kl_u", "kl_r", "kl_w",
              "slack", "realized_drop", "saturated")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass(frozen=True)
class SolveResult:
    state: SolverState
    trace: list
    converged: bool
    reports: list = field(default_factory=list, repr=False)

    @property
    def iterations(self) -> int:
        return self.state.iter

    def __iter__(self):
        # allows ``state, trace = solve(...)``
        return iter((self.state, self.trace))


@dataclass(frozen=True)
class KKTResiduals:
    r: float
    w: float
    q: float
    u_fixed_point: float

    @property
    def max(self) -> float:
        return max(self.r, self.w, self.q, self.u_fixed_point)


# --------------------------------------------------------------------------
# array-level kernels

def _posterior(u: np.ndarray, s: np.ndarray) -> np.ndarray:
    m = u.shape[0]
    joint = s.T[:, None, :] * u[:, :, None]  # (M, N, K): s_ki u_ij
    zeta = joint.sum(axis=0)  # (N, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = joint / zeta[None, :, :]
    dead = zeta <= 0
    if dead.any():
        q[:, dead] = 1.0 / m
    return q


def _phi(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    st = s.T[:, None, :]  # (M, 1, K)
    with np.errstate(divide="ignore"):
        return xlogy(st, q).sum(axis=2) - xlogy(s, s).sum(axis=0)[:, None]


class _Exponents:
    """lam-independent pieces of the u-update exponent ``lam log w + phi + log r``.

    Excluded entries (``w = 0``, ``r = 0`` or ``phi = -inf``) carry ``-inf`` in
    ``base`` and 0 in ``logw``, so they get weight exactly 0 for every ``lam``.
    """

    def __init__(self, w, phi, r, p):
        live = (w > 0) & (r[None, :] > 0) & np.isfinite(phi)
        rows = p > 0
        empty = rows & ~live.any(axis=1)
        if empty.any():
            raise AllWeightsZeroRow(int(np.flatnonzero(empty)[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            self.logw = np.where(live, np.log(np.where(live, w, 1.0)), 0.0)
            self.base = np.where(live, phi + np.log(np.where(r > 0, r, 1.0))[None, :], -np.inf)
        self.live = live
        self.p = np.where(rows, p, 0.0)
        self.rows = rows
        # inert rows (p_i = 0) get a harmless finite exponent
        self.base[~rows] = 0.0

    def log_softmax(self, lam):
        a = self.base if lam == 0 else lam * self.logw + self.base
        top = a.max(axis=1, keepdims=True)
        z = a - top
        return z - np.log(np.exp(z).sum(axis=1, keepdims=True))

    def g(self, lam, r_hat):
        pi = np.exp(self.log_softmax(lam))
        mean = (pi * self.logw).sum(axis=1)
        var = (pi * (self.logw - mean[:, None]) ** 2).sum(axis=1)
        return float(self.p @ mean - r_hat), float(self.p @ var)

    def log_u(self, lam):
        with np.errstate(divide="ignore"):
            out = self.log_softmax(lam) + np.log(self.p)[:, None]
        return out


def _g(lam, w, phi, r, p, r_hat) -> tuple[float, float]:
    return _Exponents(w, phi, r, p).g(lam, r_hat)


def _u_update(lam, w, phi, r, p) -> np.ndarray:
    return np.exp(_Exponents(w, phi, r, p).log_u(lam))


def _w_update(u, r, w_old) -> np.ndarray:
    live = r > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(live[None, :], u / np.where(live, r, 1.0)[None, :], w_old)


def _relaxed_objective(u, r, q, s, ps) -> float:
    t = s.T[:, None, :] * u[:, :, None]  # (M, N, K)
    pos = t > 0
    denom = r[None, :, None] * q * ps[None, None, :]
    if np.any(pos & (denom <= 0)):
        raise SupportMismatch("relaxed objective: positive mass where r, q or P_S vanish")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, t * (np.log(np.where(pos, t, 1.0)) - np.log(np.where(pos, denom, 1.0))), 0.0)
    return float(terms.sum())


# --------------------------------------------------------------------------
# state-level operations

def init_state(instance: PfInstance, config: SolveConfig = SolveConfig()) -> SolverState:
    """Strictly positive feasible starting point (see ``SolveConfig.init_mode``)."""
    p = instance.p
    m, _, n = instance.shape
    if config.init_mode == "diag_like":
        base = np.zeros((m, n))
        base[np.arange(m), np.arange(m) % n] = 1.0
    else:
        rng = np.random.default_rng(config.seed)
        base = rng.dirichlet(np.ones(n), size=m)
    eps = min(config.smoothing_eps * n, 1.0)
    t = (1.0 - eps) * base + eps / n
    t /= t.sum(axis=1, keepdims=True)
    u = p[:, None] * t
    r = u.sum(axis=0)
    w = _w_update(u, r, np.full((m, n), 1.0 / m))
    q = _posterior(u, instance.s)
    phi = _phi(q, instance.s)
    obj = _relaxed_objective(u, r, q, instance.s, s_marginal(instance))
    return SolverState(u=u, w=w, r=r, q=q, phi=phi, lam=1.0, iter=0, objective=obj, w_prev=w)


def update_q(state: SolverState, instance: PfInstance) -> np.ndarray:
    return _posterior(state.u, instance.s)


def compute_phi(state: SolverState, instance: PfInstance) -> np.ndarray:
    return _phi(state.q, instance.s)


def g_of_lambda(lam: float, state: SolverState, instance: PfInstance) -> tuple[float, float]:
    """Disclosure residual ``G(lam)`` of the ``u``-update and its derivative.

    The derivative is the prior-weighted softmax variance of ``log w`` per
    row, so ``G`` is nondecreasing in ``lam``.
    """
    return _g(lam, state.w, state.phi, state.r, instance.p, instance.r_hat)


def solve_lambda(state: SolverState, instance: PfInstance, config: SolveConfig = SolveConfig()) -> float:
    """Smallest nonnegative multiplier satisfying complementary slackness.

    Returns 0 when the unconstrained update already meets the threshold;
    otherwise the root of ``G`` by Newton steps kept inside a sign bracket,
    bisecting whenever a step would leave it. ``state.lam`` seeds the search.
    """
    return _solve_lambda(_Exponents(state.w, state.phi, state.r, instance.p), instance.r_hat,
                         state.lam, config)


def _solve_lambda(ex: _Exponents, r_hat: float, warm: float, config: SolveConfig) -> float:
    tol = config.newton_tol
    g0, _ = ex.g(0.0, r_hat)
    # lam = 0 is already a root to within tol; this also absorbs G == 0 up to rounding
    if g0 >= -tol:
        return 0.0

    lo, g_lo = 0.0, g0
    x = warm if 0 < warm < LAMBDA_CAP else 1.0
    gx, dx = ex.g(x, r_hat)
    if gx < 0:
        # grow the bracket; lo always carries G < 0
        while gx < 0:
            lo, g_lo = x, gx
            if x >= LAMBDA_CAP:
                raise NoRoot(gx, LAMBDA_CAP)
            x = min(2.0 * x, LAMBDA_CAP)
            gx, dx = ex.g(x, r_hat)
    hi, g_hi = x, gx

    for _ in range(config.newton_max):
        if abs(gx) <= tol:
            return x
        if gx < 0:
            lo, g_lo = x, gx
        else:
            hi, g_hi = x, gx
        nxt = x - gx / dx if dx > MIN_DERIVATIVE else math.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            break
        x = nxt
        gx, dx = ex.g(x, r_hat)
    if abs(gx) <= tol:
        return x
    raise NewtonStall(lo, hi, g_lo, g_hi)


def update_u(state: SolverState, instance: PfInstance, lam: float) -> np.ndarray:
    return _u_update(lam, state.w, state.phi, state.r, instance.p)


def update_r(state: SolverState) -> np.ndarray:
    return state.u.sum(axis=0)


def update_w(state: SolverState) -> np.ndarray:
    return _w_update(state.u, state.r, state.w)


def objective_relaxed(state: SolverState, instance: PfInstance) -> float:
    """Jensen upper bound on I(S;Y); tight when ``q`` is the exact posterior."""
    return _relaxed_objective(state.u, state.r, state.q, instance.s, s_marginal(instance))


def _weighted_kl(weights, a, b, axis) -> float:
    live = weights > 0
    with np.errstate(invalid="ignore"):
        per = rel_entr(a, b).sum(axis=axis)
    return float(np.sum(np.where(live, weights * np.where(live, per, 0.0), 0.0)))


def _log_colsum(log_x):
    top = log_x.max(axis=0)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(log_x - top).sum(axis=0)) + top


def _kl_logs(a, log_a, log_b) -> float:
    """``D(a || b)`` from logs, so underflowed entries of ``b`` stay finite."""
    pos = a > 0
    return float(np.sum(a[pos] * (log_a[pos] - log_b[pos])))


def _descent_report(old: SolverState, new: SolverState, log_u_new, instance: PfInstance,
                    saturated: bool) -> DescentReport:
    zeta = np.einsum("ki,ij->jk", instance.s, old.u)
    kl_q = _weighted_kl(zeta, new.q, old.q, axis=0)
    with np.errstate(divide="ignore"):
        kl_u = _kl_logs(old.u, np.log(old.u), log_u_new)
        log_r_new = _log_colsum(log_u_new)
        kl_r = _kl_logs(new.r, log_r_new, np.log(old.r))
    lam = new.lam
    if saturated:
        kl_w = slack = math.nan
    elif lam == 0:
        kl_w = slack = 0.0
    else:
        # sum_j r_j D(w_j || w_prev_j), with u = r w on live columns
        kl_w = lam * _weighted_kl(old.r, old.w, old.w_prev, axis=0)
        with np.errstate(divide="ignore"):
            slack = lam * (float(xlogy(old.u, old.w_prev).sum()) - instance.r_hat)
    return DescentReport(kl_q=kl_q, kl_u=kl_u, kl_r=kl_r, kl_w=kl_w, slack=slack,
                         realized_drop=old.objective - new.objective, saturated=saturated)


def step(state: SolverState, instance: PfInstance, config: SolveConfig = SolveConfig()):
    """One AEM iteration: q, phi, lam, u, r, w in that order.

    Returns ``(new_state, DescentReport)``. If no finite multiplier meets the
    threshold, the ``lam -> inf`` limit of the u-update is taken instead and
    the report is flagged ``saturated``.
    """
    return _advance(state, instance, config, True)


def _advance(state, instance, config, with_report):
    q = _posterior(state.u, instance.s)
    phi = _phi(q, instance.s)
    ex = _Exponents(state.w, phi, state.r, instance.p)
    saturated = False
    try:
        lam = _solve_lambda(ex, instance.r_hat, state.lam, config)
    except NoRoot as exc:
        log.debug("iteration %d: %s; taking the saturated update", state.iter + 1, exc)
        lam, saturated = LAMBDA_CAP, True
    log_u = ex.log_u(lam)
    u = np.exp(log_u)
    r = u.sum(axis=0)
    w = _w_update(u, r, state.w)
    obj = _relaxed_objective(u, r, q, instance.s, s_marginal(instance))
    new = SolverState(u=u, w=w, r=r, q=q, phi=phi, lam=lam, iter=state.iter + 1,
                      objective=obj, w_prev=state.w)
    if not with_report:
        return new, None
    return new, _descent_report(state, new, log_u, instance, saturated)


def tighten(state: SolverState, instance: PfInstance) -> SolverState:
    """Refresh ``q`` and ``phi`` from the current ``u`` so the bound is tight."""
    q = update_q(state, instance)
    out = replace(state, q=q)
    out = replace(out, phi=compute_phi(out, instance))
    return replace(out, objective=objective_relaxed(out, instance))


def solve(instance: PfInstance, config: SolveConfig = SolveConfig(), state: SolverState | None = None,
          trace: bool = True) -> SolveResult:
    """Iterate until the objective changes by less than ``obj_tol`` or ``max_iter``.

    With ``trace=False`` the per-iteration diagnostics are skipped (the
    iterates are identical either way).
    """
    if state is None:
        state = init_state(instance, config)
    records, reports = [], []
    converged = False
    for _ in range(config.max_iter):
        new, rep = _advance(state, instance, config, trace)
        if trace:
            i_sy, i_xy = leakage_and_disclosure(new.u, instance)
            records.append(TraceRecord(new.iter, new.objective, i_sy, i_xy, new.lam, rep.kl_q, rep.kl_u,
                                       rep.kl_r, rep.kl_w, rep.slack, rep.realized_drop, rep.saturated))
            reports.append(rep)
        done = abs(new.objective - state.objective) < config.obj_tol
        state = new
        if done:
            converged = True
            break
    if not converged:
        log.info("AEM stopped at max_iter=%d without meeting obj_tol=%g", config.max_iter, config.obj_tol)
    return SolveResult(state=tighten(state, instance), trace=records, converged=converged, reports=reports)


def kkt_residuals(state: SolverState, instance: PfInstance) -> KKTResiduals:
    """Max-norm residuals of the recovered constraints and of the ``u`` fixed point."""
    u, r = state.u, state.r
    col = u.sum(axis=0)
    live = r > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        w_exact = u[:, live] / r[live][None, :]
    w_res = float(np.max(np.abs(state.w[:, live] - w_exact), initial=0.0))
    q_res = float(np.max(np.abs(state.q - _posterior(u, instance.s))))
    fixed = _u_update(state.lam, state.w, state.phi, r, instance.p)
    return KKTResiduals(
        r=float(np.max(np.abs(r - col))),
        w=w_res,
        q=q_res,
        u_fixed_point=float(np.max(np.abs(u - fixed))),
    )
