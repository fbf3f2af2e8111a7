"""Centralized charging control.

Minimizes the transmitter drawn power subject to a minimum delivered power
per load. The problem is non-convex in the load resistances but becomes
convex after substituting each receiver's branch conductance
g = 1/(r + x): the objective turns affine in g and each load constraint
becomes a convex quadratic. A self-contained log-barrier interior-point
method solves the reformulated program; a brute-force grid oracle is
provided for bounding the optimality gap in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .circuit import SwitchState, SystemConfig, solve_closed_form
from .errors import NumericalError, ValidationError

# barrier path: multiplicative increase of the accuracy parameter and the
# duality-gap surrogate at which the path stops (normalized units)
_BARRIER_FACTOR = 10.0
_GAP_TOL = 1e-9
# phase-I worst-violation value above which the problem is declared infeasible
_FEAS_TOL = 1e-9
_NEWTON_TOL = 1e-13
# the last barrier stage is polished much harder so the reported optimality
# residual stays well under its contract even with active constraints
_POLISH_TOL = 1e-22
_MAX_NEWTON = 120


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class ChargingProblem:
    """A minimum-power charging instance.

    ``p_req_eff`` overrides the system's per-load requirements; entries
    that are zero or negative mean "no requirement for this load" and are
    dropped before solving (needed when requirements are residuals left
    over from other time slots). ``sw`` defaults to all switches closed.
    """

    sys: SystemConfig
    sw: SwitchState | None = None
    p_req_eff: tuple[float, ...] | None = None

    def __post_init__(self):
        n = self.sys.n_receivers
        if self.sw is not None and len(self.sw.s) != n:
            raise ValidationError("switch state length does not match receiver count")
        if self.p_req_eff is not None and len(self.p_req_eff) != n:
            raise ValidationError("p_req_eff must have one entry per receiver")
        for k in range(n):
            if not self.sys.x_lo[k] < self.sys.x_hi[k]:
                raise ValidationError(
                    f"receiver {k + 1}: optimization needs x_lo < x_hi"
                )

    @property
    def switch(self) -> SwitchState:
        return self.sw if self.sw is not None else SwitchState.all_closed(self.sys.n_receivers)

    @property
    def requirements(self) -> tuple[float, ...]:
        return self.p_req_eff if self.p_req_eff is not None else self.sys.p_req


@dataclass(frozen=True)
class CentralSolution:
    """Result of a centralized solve.

    For INFEASIBLE results the numeric fields are empty/NaN. For OPTIMAL
    results ``x`` holds one load value per receiver; entries for receivers
    whose switch is open are filled with the upper bound and carry no
    meaning.
    """

    x: tuple[float, ...]
    p_tx: float
    p: tuple[float, ...]
    status: SolveStatus
    kkt_residual: float


def branch_conductance(x, r):
    """Map load resistance to branch conductance g = 1/(r + x)."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(x <= 0.0):
        raise ValidationError("load resistance must be > 0")
    return 1.0 / (r + x)


def load_from_conductance(g, r):
    """Inverse of :func:`branch_conductance`; requires 0 < g < 1/r."""
    g = np.asarray(g, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(g <= 0.0) or np.any(g * r >= 1.0):
        raise ValidationError("conductance must satisfy 0 < g < 1/r")
    return 1.0 / g - r


def _newton_minimize(value_grad_hess, z0, in_domain, tol=_NEWTON_TOL):
    """Damped Newton descent with backtracking; z0 must be strictly feasible."""
    z = z0.copy()
    for _ in range(_MAX_NEWTON):
        val, grad, hess = value_grad_hess(z)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            ridge = 1e-12 * (1.0 + np.trace(hess) / len(z))
            step = np.linalg.solve(hess + ridge * np.eye(len(z)), -grad)
        decrement2 = float(-grad @ step)
        if decrement2 / 2.0 <= tol:
            break
        alpha = 1.0
        while not in_domain(z + alpha * step):
            alpha *= 0.5
            if alpha < 1e-18:
                return z
        while value_grad_hess(z + alpha * step)[0] > val - 0.25 * alpha * decrement2:
            alpha *= 0.5
            if alpha < 1e-18:
                return z
        z = z + alpha * step
    return z


class _Qcqp:
    """Normalized data for: min c.g over a box, s.t. convex quadratics <= 0.

    Raw constraint for an active receiver n (index into the connected set):
        half_v2 * B_n * (r_n g_n^2 - g_n) + preq_n * (r_tx + B.g)^2 <= 0
    with B_k = w^2 h_k^2. Each constraint is divided by its own magnitude
    scale so feasibility and duality-gap tolerances are dimensionless.
    """

    def __init__(self, b_coef, r, g_lo, g_hi, preq, half_v2, r_tx):
        self.b = b_coef
        self.r = r
        self.g_lo = g_lo
        self.g_hi = g_hi
        self.half_v2 = half_v2
        self.r_tx = r_tx
        self.active = np.nonzero(preq > 0.0)[0]
        self.preq = preq
        d_max = r_tx + float(self.b @ g_hi)
        self.scale = np.array(
            [
                max(half_v2 * self.b[n] * g_hi[n] + preq[n] * d_max**2, 1e-30)
                for n in self.active
            ]
        )
        b_max = float(self.b.max()) if self.b.size else 0.0
        self.c = -self.b / b_max if b_max > 0.0 else np.zeros_like(self.b)

    def quad_values(self, g):
        d = self.r_tx + float(self.b @ g)
        vals = np.empty(len(self.active))
        for i, n in enumerate(self.active):
            raw = (
                self.half_v2 * self.b[n] * (self.r[n] * g[n] ** 2 - g[n])
                + self.preq[n] * d * d
            )
            vals[i] = raw / self.scale[i]
        return vals

    def quad_grad(self, g, i):
        n = self.active[i]
        d = self.r_tx + float(self.b @ g)
        grad = 2.0 * self.preq[n] * d * self.b
        grad[n] += self.half_v2 * self.b[n] * (2.0 * self.r[n] * g[n] - 1.0)
        return grad / self.scale[i]

    def quad_hess(self, i):
        n = self.active[i]
        hess = 2.0 * self.preq[n] * np.outer(self.b, self.b)
        hess[n, n] += 2.0 * self.half_v2 * self.b[n] * self.r[n]
        return hess / self.scale[i]


def _phase_one(q: _Qcqp):
    """Find a strictly feasible point, or report the minimal worst violation.

    Minimizes s subject to quad_n(g) <= s and the box, starting from the
    box midpoint. Returns (g, None) on success or (None, s_star) when no
    point with violation below the feasibility tolerance exists.
    """
    m = len(q.b)
    g0 = 0.5 * (q.g_lo + q.g_hi)
    s0 = float(np.max(q.quad_values(g0)))
    z = np.concatenate([g0, [s0 + max(1.0, 0.1 * abs(s0))]])
    n_cons = len(q.active) + 2 * m
    t = 1.0

    def in_domain(zz):
        g, s = zz[:m], zz[m]
        if not np.all(np.isfinite(zz)):
            return False
        if np.any(g <= q.g_lo) or np.any(g >= q.g_hi):
            return False
        vals = q.quad_values(g)
        return bool(np.all(np.isfinite(vals)) and np.all(s - vals > 0.0))

    while True:
        def vgh(zz, t=t):
            g, s = zz[:m], zz[m]
            slacks = s - q.quad_values(g)
            lo = g - q.g_lo
            hi = q.g_hi - g
            # rounding can park a line-search iterate exactly on the
            # boundary; treat it as outside via an infinite barrier value
            if (
                not np.all(np.isfinite(slacks))
                or np.any(slacks <= 0.0)
                or np.any(lo <= 0.0)
                or np.any(hi <= 0.0)
            ):
                return np.inf, np.zeros(m + 1), np.eye(m + 1)
            val = t * s - np.sum(np.log(slacks)) - np.sum(np.log(lo)) - np.sum(np.log(hi))
            grad = np.zeros(m + 1)
            hess = np.zeros((m + 1, m + 1))
            grad[m] = t
            for i in range(len(q.active)):
                gi = q.quad_grad(g, i)
                inv = 1.0 / slacks[i]
                grad[:m] += gi * inv
                grad[m] -= inv
                row = np.concatenate([gi, [-1.0]])
                hess += inv * inv * np.outer(row, row)
                hess[:m, :m] += inv * q.quad_hess(i)
            grad[:m] += 1.0 / hi - 1.0 / lo
            diag = 1.0 / hi**2 + 1.0 / lo**2
            hess[:m, :m] += np.diag(diag)
            return val, grad, hess

        z = _newton_minimize(vgh, z, in_domain)
        g = z[:m]
        if float(np.max(q.quad_values(g))) < -1e-8:
            return g, None
        if n_cons / t < 1e-10:
            s_star = float(z[m])
            return (g, None) if s_star <= _FEAS_TOL else (None, s_star)
        t *= _BARRIER_FACTOR


def _phase_two(q: _Qcqp, g_start):
    """Follow the central path from a strictly feasible point; returns (g, kkt)."""
    m = len(q.b)
    n_cons = len(q.active) + 2 * m
    g = g_start.copy()
    t = 1.0

    def in_domain(gg):
        if not np.all(np.isfinite(gg)):
            return False
        if np.any(gg <= q.g_lo) or np.any(gg >= q.g_hi):
            return False
        if len(q.active):
            vals = q.quad_values(gg)
            if not np.all(np.isfinite(vals)) or np.any(vals >= 0.0):
                return False
        return True

    while True:
        def vgh(gg, t=t):
            lo = gg - q.g_lo
            hi = q.g_hi - gg
            vals = q.quad_values(gg) if len(q.active) else np.empty(0)
            # see _phase_one: boundary-rounded line-search iterates get an
            # infinite barrier value instead of a log-domain error
            if (
                np.any(lo <= 0.0)
                or np.any(hi <= 0.0)
                or not np.all(np.isfinite(vals))
                or np.any(vals >= 0.0)
            ):
                return np.inf, np.zeros(m), np.eye(m)
            val = t * float(q.c @ gg) - np.sum(np.log(lo)) - np.sum(np.log(hi))
            grad = t * q.c + 1.0 / hi - 1.0 / lo
            hess = np.diag(1.0 / hi**2 + 1.0 / lo**2)
            for i in range(len(q.active)):
                val -= np.log(-vals[i])
                gi = q.quad_grad(gg, i)
                inv = 1.0 / (-vals[i])
                grad += gi * inv
                hess += inv * inv * np.outer(gi, gi) + inv * q.quad_hess(i)
            return val, grad, hess

        if n_cons / t <= _GAP_TOL:
            g = _newton_minimize(vgh, g, in_domain, tol=_POLISH_TOL)
            break
        g = _newton_minimize(vgh, g, in_domain)
        t *= _BARRIER_FACTOR

    return g, _kkt_residual(q, g)


def _kkt_residual(q: _Qcqp, g) -> float:
    """Stationarity plus complementarity residual of a primal point.

    Multipliers are fitted by nonnegative least squares over the
    near-active constraints, which measures the point itself rather than
    the (conditioning-limited) final barrier iterate. The dual can be
    non-unique near degeneracy, so columns whose complementarity product
    dominates are dropped greedily as long as stationarity survives,
    selecting a minimal-support certificate.
    """
    from scipy.optimize import nnls

    m = len(g)
    width = q.g_hi - q.g_lo
    columns = []
    slacks = []
    for k in range(m):  # box gradients: +e_k at the top, -e_k at the bottom
        hi_slack = (q.g_hi[k] - g[k]) / width[k]
        lo_slack = (g[k] - q.g_lo[k]) / width[k]
        if hi_slack <= 1e-4:
            col = np.zeros(m)
            col[k] = 1.0
            columns.append(col)
            slacks.append(hi_slack)
        if lo_slack <= 1e-4:
            col = np.zeros(m)
            col[k] = -1.0
            columns.append(col)
            slacks.append(lo_slack)
    if len(q.active):
        vals = q.quad_values(g)
        for i in range(len(q.active)):
            if -vals[i] <= 1e-4:
                columns.append(q.quad_grad(g, i))
                slacks.append(-vals[i])
    scale = max(1.0, float(np.linalg.norm(q.c, ord=np.inf)))
    if not columns:
        return float(np.linalg.norm(q.c, ord=np.inf)) / scale

    def fit(indices):
        jac = np.column_stack([columns[j] for j in indices])
        lam, _ = nnls(jac, -q.c)
        stationarity = float(np.linalg.norm(q.c + jac @ lam, ord=np.inf)) / scale
        products = [lam[i] * slacks[j] for i, j in enumerate(indices)]
        return lam, stationarity, max(products, default=0.0), products

    indices = list(range(len(columns)))
    lam, stationarity, complementarity, products = fit(indices)
    floor = max(10.0 * stationarity, 1e-13)
    while len(indices) > 1 and complementarity > floor:
        worst = max(range(len(indices)), key=lambda i: products[i])
        trial = indices[:worst] + indices[worst + 1:]
        lam2, stat2, comp2, prod2 = fit(trial)
        if stat2 > floor or comp2 >= complementarity:
            break
        indices, lam, stationarity, complementarity, products = (
            trial, lam2, stat2, comp2, prod2
        )
    return max(stationarity, complementarity)


def _infeasible() -> CentralSolution:
    return CentralSolution(
        x=(), p_tx=float("nan"), p=(), status=SolveStatus.INFEASIBLE,
        kkt_residual=float("nan"),
    )


def solve_convex(prob: ChargingProblem) -> CentralSolution:
    """Solve the conductance-space convex program for one switch configuration.

    Requirements that are zero or negative are dropped. Returns an
    INFEASIBLE solution (not an exception) when no load vector can meet
    the remaining requirements.
    """
    sys = prob.sys
    sw = prob.switch
    conn = list(sw.connected)
    reqs = prob.requirements

    r = np.array([sys.receivers[k].resistance for k in conn])
    b_coef = np.array([(sys.w * sys.h[k]) ** 2 for k in conn])
    g_lo = 1.0 / (r + np.array([sys.x_hi[k] for k in conn]))
    g_hi = 1.0 / (r + np.array([sys.x_lo[k] for k in conn]))
    preq = np.array([max(reqs[k], 0.0) for k in conn])
    half_v2 = 0.5 * abs(sys.v_tx) ** 2
    r_tx = sys.transmitter.resistance

    # a requirement on a receiver with zero coupling can never be met
    if np.any((preq > 0.0) & (b_coef == 0.0)):
        return _infeasible()

    q = _Qcqp(b_coef, r, g_lo, g_hi, preq, half_v2, r_tx)
    if len(q.active):
        g_start, s_star = _phase_one(q)
        if g_start is None:
            return _infeasible()
        if np.max(q.quad_values(g_start)) >= 0.0:
            # feasible only on the boundary: return the phase-one point
            g_opt, kkt = g_start, float("nan")
        else:
            g_opt, kkt = _phase_two(q, g_start)
    else:
        g_opt, kkt = _phase_two(q, 0.5 * (g_lo + g_hi))

    x_opt = [float(v) for v in sys.x_hi]
    for j, k in enumerate(conn):
        x_opt[k] = float(1.0 / g_opt[j] - r[j])
        x_opt[k] = min(max(x_opt[k], sys.x_lo[k]), sys.x_hi[k])

    state = solve_closed_form(sys, sw, x_opt)
    for k in conn:
        if reqs[k] > 0.0 and state.p[k] < reqs[k] - 1e-6 * max(reqs[k], 1.0):
            raise NumericalError(
                f"receiver {k + 1}: optimizer returned an infeasible point"
            )
    return CentralSolution(
        x=tuple(x_opt),
        p_tx=state.p_tx,
        p=state.p,
        status=SolveStatus.OPTIMAL,
        kkt_residual=kkt,
    )


def optimize_loads(prob: ChargingProblem) -> CentralSolution:
    """Minimum-transmitter-power load resistances for one configuration.

    Thin wrapper over :func:`solve_convex` that re-derives the reported
    powers through the closed-form circuit solution and checks consistency.
    """
    sol = solve_convex(prob)
    if sol.status is not SolveStatus.INFEASIBLE:
        check = solve_closed_form(prob.sys, prob.switch, sol.x)
        if abs(check.p_tx - sol.p_tx) > 1e-9 * max(abs(sol.p_tx), 1e-300):
            raise NumericalError("objective mismatch between solver and circuit")
    return sol


@dataclass(frozen=True)
class OracleResult:
    """Best feasible grid point found by exhaustive search."""

    x: tuple[float, ...] | None
    p_tx: float | None
    feasible: bool


def brute_force_oracle(prob: ChargingProblem, grid_resolution: int) -> OracleResult:
    """Exhaustive log-grid search over the load box (test oracle).

    Only supports up to three connected receivers; the cost grows
    geometrically with the dimension.
    """
    sys = prob.sys
    sw = prob.switch
    conn = list(sw.connected)
    if len(conn) > 3:
        raise ValidationError("the exhaustive oracle supports at most 3 connected receivers")
    if grid_resolution < 2:
        raise ValidationError("grid_resolution must be at least 2")
    reqs = prob.requirements

    axes = [
        np.geomspace(sys.x_lo[k], sys.x_hi[k], grid_resolution) for k in conn
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    w2 = sys.w**2
    half_v2 = 0.5 * abs(sys.v_tx) ** 2

    denom = np.full(mesh[0].shape, sys.transmitter.resistance)
    for j, k in enumerate(conn):
        denom = denom + w2 * sys.h[k] ** 2 / (sys.receivers[k].resistance + mesh[j])
    p_tx = half_v2 / denom

    feasible = np.ones(mesh[0].shape, dtype=bool)
    for j, k in enumerate(conn):
        if reqs[k] <= 0.0:
            continue
        series = sys.receivers[k].resistance + mesh[j]
        p_k = half_v2 * w2 * sys.h[k] ** 2 * mesh[j] / (series**2 * denom**2)
        feasible &= p_k >= reqs[k] * (1.0 - 1e-12)

    if not feasible.any():
        return OracleResult(x=None, p_tx=None, feasible=False)
    masked = np.where(feasible, p_tx, np.inf)
    flat = int(np.argmin(masked))
    idx = np.unravel_index(flat, masked.shape)
    x_best = [float(v) for v in sys.x_hi]
    for j, k in enumerate(conn):
        x_best[k] = float(axes[j][idx[j]])
    return OracleResult(x=tuple(x_best), p_tx=float(masked[idx]), feasible=True)
