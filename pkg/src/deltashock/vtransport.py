"""Transport of v along the characteristics of speed ``g(u_eps)``.

Every value of v is obtained from its foot: ``v(x, t) = vhat(x0) * dx0/dx``.
The speed field is continuous but has kinks on the fan edges, so RK4 steps
that straddle an edge are split at the crossing.

After the catastrophe the characteristics inside the fan contract at a rate
of order ``1/eps``.  The gap between the two curves issued from ``a2`` and
``a1`` is therefore tracked through its logarithm, and pairings of v are done
in label space (see :func:`pullback_pair`), where nothing is singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CrossCheckFailed, OrderingViolation
from .problem import Problem
from .uwave import Kinematics, UField

ILLINOIS_ITERS = 12  # superlinear; ~1e-15 of a step in practice
LANDING_PUSH = 1e-9  # land this fraction of a step past the edge
MAX_SPLITS = 6
GAP_SWITCH = 1e-6  # below gap/eps the analytic slope replaces the difference quotient
LIMIT_FRACTION = 50.0
FAN_LABEL_PANEL = 1.0  # label panel width, in units of eps, where labels enter the fan
CROSS_CHECK_TOL = 0.01
PANELS_PER_SUPPORT = 64
T_MAX_FACTOR = 5.0

DOMAINS = ("D1", "D2", "D3", "D4", "D5")


def step_size(problem: Problem, eps: float) -> float:
    return min(eps / 4.0, problem.consts.tstar / 200.0)


class _Speed:
    """Right-hand side of ``X' = g(u)`` and ``(log X_x0)' = g'(u) u_x``."""

    def __init__(self, problem: Problem, kin: Kinematics):
        self.kin = kin
        self.g = problem.flux.g
        self.dg = problem.flux.dg

    def __call__(self, X, s):
        u, ux = self.kin.u_and_ux(X, s)
        return self.g(u), self.dg(u) * ux

    def side(self, X, s):
        return self.kin.side(X, s)


def _rk4(rhs, X, S, s, h):
    k1, l1 = rhs(X, s)
    k2, l2 = rhs(X + 0.5 * h * k1, s + 0.5 * h)
    k3, l3 = rhs(X + 0.5 * h * k2, s + 0.5 * h)
    k4, l4 = rhs(X + h * k3, s + h)
    return (X + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0,
            S + h * (l1 + 2 * l2 + 2 * l3 + l4) / 6.0)


def _crossing(rhs: _Speed, x, q, t, left, side0):
    """Fraction of the remaining step after which each trajectory is just past
    the edge it crosses, and the side it lands on.

    Illinois iteration on the signed distance to that edge.
    """
    x_end, _ = _rk4(rhs, x, q, t, left)
    side1 = rhs.side(x_end, t + left)
    use_left = (side0 == -1) | ((side0 == 0) & (side1 == -1))
    landed = np.where(use_left, np.where(side0 == -1, 0, -1), np.where(side0 == 1, 0, 1))

    def dist(theta):
        xm, _ = _rk4(rhs, x, q, t, theta * left)
        phi2, phi1 = rhs.kin.edges(t + theta * left)
        return xm - np.where(use_left, phi2, phi1)

    a, b = np.zeros_like(x), np.ones_like(x)
    fa, fb = dist(a), dist(b)
    far_sign = np.sign(fb)
    for _ in range(ILLINOIS_ITERS):
        denom = fb - fa
        c = np.where(denom != 0, (a * fb - b * fa) / np.where(denom != 0, denom, 1.0), 0.5 * (a + b))
        c = np.clip(c, np.minimum(a, b), np.maximum(a, b))
        fc = dist(c)
        flip = fc * fb < 0
        a, fa = np.where(flip, b, a), np.where(flip, fb, 0.5 * fa)
        b, fb = c, fc
        if np.all(np.abs(fb) <= 4e-16 * (1.0 + np.abs(x))):
            break  # at roundoff; the landing loop settles the side
    # the bracket end whose distance has the sign of the step end lies past the edge
    far = np.where(np.sign(fb) == far_sign, b, a)
    return np.minimum(1.0, far + LANDING_PUSH), landed


def _advance(rhs: _Speed, X, S, s, h: float):
    """One nominal step of size ``h``; trajectories crossing an edge are split there."""
    X1, S1 = _rk4(rhs, X, S, s, h)
    side_start = rhs.side(X, s)
    bad = rhs.side(X1, s + h) != side_start
    if not np.any(bad):
        return X1, S1
    X1, S1 = X1.copy(), S1.copy()
    idx = np.flatnonzero(bad)
    x, q = X[idx], S[idx]
    t = np.full(idx.size, float(s))
    left = np.full(idx.size, float(h))
    cur = side_start[idx]
    for _ in range(MAX_SPLITS):
        theta, cur = _crossing(rhs, x, q, t, left, cur)
        push = LANDING_PUSH
        while True:
            xl, ql = _rk4(rhs, x, q, t, theta * left)
            short = (rhs.side(xl, t + theta * left) != cur) & (theta < 1.0)
            if not np.any(short):
                break
            # rounding left the landing point on the near side; nudge it over
            theta = np.where(short, np.minimum(1.0, theta + push), theta)
            push *= 4.0
        x, q = xl, ql
        t, left = t + theta * left, left * (1.0 - theta)
        x2, q2 = _rk4(rhs, x, q, t, left)
        again = rhs.side(x2, t + left) != cur
        done = ~again
        X1[idx[done]], S1[idx[done]] = x2[done], q2[done]
        if not np.any(again):
            return X1, S1
        idx, x, q, t, left, cur = idx[again], x[again], q[again], t[again], left[again], cur[again]
    # out of splits: finish the remaining time unsplit rather than dropping it
    X1[idx], S1[idx] = _rk4(rhs, x, q, t, left)
    return X1, S1


def integrate(rhs: _Speed, X, s0: float, s1: float, h: float):
    """Carry positions from ``s0`` to ``s1``; also returns ``log dX(s1)/dX(s0)``."""
    X = np.array(X, dtype=float, copy=True)
    S = np.zeros_like(X)
    span = s1 - s0
    if span == 0.0:
        return X, S
    n = max(1, math.ceil(abs(span) / h - 1e-9))
    dt = span / n
    for k in range(n):
        X, S = _advance(rhs, X, S, s0 + k * dt, dt)
    return X, S


@dataclass(frozen=True, eq=False)
class BoundaryCurves:
    """Fan edges and the two ``g``-characteristics from the ends of ``[a2, a1]``.

    ``log_gap`` is ``log(phi1_star - phi2_star)``; the gap itself underflows
    soon after the catastrophe and is never reconstructed from positions.
    """

    t_grid: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    phi2_star: np.ndarray
    log_gap: np.ndarray
    eps: float
    step: float

    @property
    def phi1_star(self) -> np.ndarray:
        return self.phi2_star + np.exp(self.log_gap)

    @property
    def t_max(self) -> float:
        return float(self.t_grid[-1])

    def node(self, t: float) -> int:
        k = int(round(t / self.step))
        if k < 0 or k >= len(self.t_grid) or abs(self.t_grid[k] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"t={t} is not a node of the curve grid")
        return k


class _GapSystem:
    """(phi2_star, log gap) as one ODE state."""

    def __init__(self, rhs: _Speed, eps: float):
        self.rhs = rhs
        self.floor = GAP_SWITCH * eps

    def __call__(self, y, s):
        p, lg = y
        gap = math.exp(lg)
        v2, gx2 = self.rhs(np.array([p]), s)
        if gap > self.floor:
            v1, _ = self.rhs(np.array([p + gap]), s)
            slope = (v1[0] - v2[0]) / gap
        else:
            slope = gx2[0]
        return np.array([v2[0], slope])


def _rk4_vec(fun, y, s, h):
    k1 = fun(y, s)
    k2 = fun(y + 0.5 * h * k1, s + 0.5 * h)
    k3 = fun(y + 0.5 * h * k2, s + 0.5 * h)
    k4 = fun(y + h * k3, s + h)
    return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


class VField:
    """v_eps for one ``eps``: the u field, the boundary curves and the step control."""

    def __init__(self, problem: Problem, eps: float, ufield: UField | None = None,
                 t_max: float | None = None, step: float | None = None,
                 cross_check: bool = False):
        self.problem = problem
        self.eps = float(eps)
        self.ufield = ufield or UField(problem)
        self.kin = self.ufield.kinematics(self.eps)
        self.rhs = _Speed(problem, self.kin)
        self.step = step or step_size(problem, self.eps)
        self.cross_check = cross_check
        self.curves = solve_boundary_curves(self, t_max or 3.0 * problem.consts.tstar)

    def u(self, x, t):
        return self.kin.u(np.asarray(x, dtype=float), t)

    def __call__(self, x, t):
        return v_eval(self, x, t)


def solve_boundary_curves(vf: VField, t_max: float) -> BoundaryCurves:
    """Integrate both ``g``-characteristics with the ordering checked at every step."""
    k = vf.problem.consts
    d = vf.problem.data
    if t_max > T_MAX_FACTOR * k.tstar + 1e-12:
        raise ValueError(f"t_max must not exceed {T_MAX_FACTOR} t*")
    n = max(1, math.ceil(t_max / vf.step - 1e-9))
    h = t_max / n
    system = _GapSystem(vf.rhs, vf.eps)
    t_grid = np.linspace(0.0, n * h, n + 1)
    p2s = np.empty(n + 1)
    lg = np.empty(n + 1)
    y = np.array([d.a2, math.log(d.a1 - d.a2)])
    p2s[0], lg[0] = y
    phi2, phi1 = vf.kin.edges(t_grid)
    for i in range(n):
        y = _rk4_vec(system, y, t_grid[i], h)
        p2s[i + 1], lg[i + 1] = y
        if not (phi2[i + 1] <= y[0] and y[0] + math.exp(y[1]) <= phi1[i + 1] and np.isfinite(y[1])):
            raise OrderingViolation(
                f"phi2 <= phi2* < phi1* <= phi1 broken at t={t_grid[i + 1]:.6g}, eps={vf.eps}: "
                f"({phi2[i + 1]:.10g}, {y[0]:.10g}, gap=exp({y[1]:.6g}), {phi1[i + 1]:.10g})")
    return BoundaryCurves(t_grid, phi1, phi2, p2s, lg, vf.eps, h)


def curves_at(vf: VField, t: float):
    """``(phi2, phi2_star, log_gap, phi1)`` at any ``t`` in the solved range."""
    bc = vf.curves
    if not 0.0 <= t <= bc.t_max + 1e-12:
        raise ValueError(f"t={t} outside the solved range [0, {bc.t_max}]")
    i = min(int(t / bc.step), len(bc.t_grid) - 1)
    y = np.array([bc.phi2_star[i], bc.log_gap[i]])
    rest = t - bc.t_grid[i]
    if rest > 1e-14:
        y = _rk4_vec(_GapSystem(vf.rhs, vf.eps), y, bc.t_grid[i], rest)
    phi2, phi1 = vf.kin.edges(t)
    return float(phi2), float(y[0]), float(y[1]), float(phi1)


def classify_domain(vf: VField, x, t: float):
    """Domain labels; ``D1`` and ``D5`` are closed, the others open.

    D1: ``x <= phi2``; D3: ``phi2 < x < phi2*``; D5: ``phi2* <= x <= phi1*``;
    D4: ``phi1* < x < phi1``; D2: ``x >= phi1`` unless already in D5.
    """
    phi2, p2s, lg, phi1 = curves_at(vf, t)
    x = np.asarray(x, dtype=float)
    rel = x - p2s
    gap = math.exp(lg)
    out = np.select(
        [x <= phi2, rel < 0, rel <= gap, x < phi1],
        ["D1", "D3", "D5", "D4"],
        default="D2",
    )
    return out if out.ndim else str(out)


def backward_foot(vf: VField, x, t: float):
    """Foot ``x0`` at time 0 and ``J = dx0/dx`` for the characteristic through ``(x, t)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x0, S = integrate(vf.rhs, x, t, 0.0, vf.step)
    J = np.exp(S)
    if vf.cross_check:
        d = vf.eps / 10.0
        xp, _ = integrate(vf.rhs, x + 0.5 * d, t, 0.0, vf.step)
        xm, _ = integrate(vf.rhs, x - 0.5 * d, t, 0.0, vf.step)
        fd = (xp - xm) / d
        rel = np.abs(fd - J) / np.maximum(np.abs(J), 1e-300)
        if np.any(rel > CROSS_CHECK_TOL):
            k = int(np.argmax(rel))
            raise CrossCheckFailed(
                f"variational J={J[k]:.6e} vs difference {fd[k]:.6e} at x={x[k]}, t={t}")
    return x0, J


def forward_flow(vf: VField, x0, t: float):
    """Positions at time ``t`` of the labels ``x0`` and ``dX/dx0`` there."""
    X, S = integrate(vf.rhs, np.atleast_1d(np.asarray(x0, dtype=float)), 0.0, t, vf.step)
    return X, np.exp(S)


def v_eval(vf: VField, x, t: float):
    scalar = np.ndim(x) == 0
    x0, J = backward_foot(vf, x, t)
    v = vf.problem.data.vhat(x0) * J
    return float(v[0]) if scalar else v


def _curve_speed(bc: BoundaryCurves, values: np.ndarray, k: int) -> float:
    """Five-point derivative on the curve grid, one-sided near the ends."""
    h = bc.step
    n = len(bc.t_grid)
    if 2 <= k <= n - 3:
        return float((values[k - 2] - 8 * values[k - 1] + 8 * values[k + 1] - values[k + 2]) / (12 * h))
    if k < 2:
        y = values[k:k + 5]
        return float((-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h))
    y = values[k - 4:k + 1][::-1]
    return float(-(-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / (12 * h))


@dataclass
class RHReport:
    t: float
    speed_residual: list = field(default_factory=list)
    jump_residual: list = field(default_factory=list)

    @property
    def max_speed(self) -> float:
        return max(self.speed_residual)

    @property
    def max_jump(self) -> float:
        return max(self.jump_residual)

    @property
    def max_residual(self) -> float:
        return max(self.max_speed, self.max_jump)


def rh_check(vf: VField, t: float) -> RHReport:
    """Speed and jump consistency of v across both ``g``-characteristics at a curve node.

    The jump residual compares ``[v g(u)]`` with ``phi' [v]`` from one-sided
    values at distance ``d`` and ``d/2`` (``d = eps/50``), extrapolated to
    ``d -> 0`` and scaled by ``(|v_l| + |v_r|) max|g|``.
    """
    bc = vf.curves
    k = bc.node(t)
    g = vf.problem.flux.g
    d = vf.problem.data
    gmax = float(np.max(np.abs(g(np.linspace(min(d.U0, d.U1), max(d.U0, d.U1), 101)))))
    report = RHReport(t=float(t))
    for values in (bc.phi2_star, bc.phi1_star):
        pos = float(values[k])
        speed = _curve_speed(bc, values, k)
        report.speed_residual.append(abs(speed - float(g(vf.u(pos, t)))))

        def jump(dist):
            xs = np.array([pos - dist, pos + dist])
            v = v_eval(vf, xs, t)
            gu = g(vf.u(xs, t))
            num = v[1] * (gu[1] - speed) - v[0] * (gu[0] - speed)
            return num / ((abs(v[0]) + abs(v[1])) * gmax)

        dist = vf.eps / LIMIT_FRACTION
        report.jump_residual.append(abs(2.0 * jump(0.5 * dist) - jump(dist)))
    return report


def _graded(lo: float, hi: float, point: float, levels: int = 12):
    """Panel edges in ``[lo, hi]`` refined geometrically towards ``point``."""
    edges = [lo, hi]
    for side, far in ((-1, lo), (1, hi)):
        span = (far - point) * side
        if span > 0:
            edges.extend(point + side * span * 0.5 ** np.arange(1, levels + 1))
    return edges


def label_nodes(vf: VField, t: float, lo: float, hi: float, panels: int = 64, order: int = 8):
    """Gauss nodes and weights on label space ``[lo, hi]``, split at every label
    where ``vhat`` or ``x0 -> X(x0, t)`` fails to be smooth."""
    d = vf.problem.data
    phi2_0, phi1_0 = vf.kin.edges(0.0)
    edge_feet, _ = backward_foot(vf, np.array(vf.kin.edges(t)), t)
    cuts = [d.a2, d.a1, float(phi2_0), float(phi1_0), *edge_feet.tolist()]
    edges = [lo, hi, *np.linspace(lo, hi, panels + 1).tolist()]
    edges += [c for c in cuts if lo < c < hi]
    # labels that have entered the fan by time t are squeezed on a scale of eps
    for a, b in ((min(edge_feet[0], d.a2), max(edge_feet[0], d.a2)),
                 (min(edge_feet[1], d.a1), max(edge_feet[1], d.a1))):
        a, b = max(a, lo), min(b, hi)
        if b > a:
            edges += np.linspace(a, b, math.ceil((b - a) / (FAN_LABEL_PANEL * vf.eps)) + 1).tolist()
    for bp in d.v0_breakpoints:
        if lo < bp < hi:
            edges += _graded(max(lo, d.a2), min(hi, d.a1), bp)
    edges = np.unique(np.clip(np.asarray(edges, dtype=float), lo, hi))
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def pullback_pair(vf: VField, weight, t: float, support: tuple, panels: int | None = None,
                  order: int = 8) -> float:
    """``<v(., t), weight>`` computed as ``int vhat(x0) weight(X(x0, t)) dx0``.

    ``weight`` receives ``(X, t)`` so that flux terms such as ``g(u) eta'``
    can be paired the same way.  By default the label panels are no wider
    than 1/64 of the support, which is where the weight lives.
    """
    return pullback_pairs(vf, [(t, weight)], support, panels, order)[0]


def pullback_pairs(vf: VField, terms, support: tuple, panels: int | None = None,
                   order: int = 8) -> list[float]:
    """Several label-space pairings ``[(t, weight), ...]`` on one label set.

    The labels cover the feet of ``support`` at every requested time, and
    one forward flow is continued through the times in increasing order.
    Differences of the results then share their quadrature error.
    """
    times = sorted({float(t) for t, _ in terms})
    ends = np.array(support, dtype=float)
    feet = np.concatenate([backward_foot(vf, ends, t)[0] for t in times])
    lo, hi = float(feet.min()), float(feet.max())
    if panels is None:
        width = support[1] - support[0]
        panels = max(PANELS_PER_SUPPORT, math.ceil(PANELS_PER_SUPPORT * (hi - lo) / width))
    nodes, w = label_nodes(vf, times[len(times) // 2], lo, hi, panels, order)
    wv = w * vf.problem.data.vhat(nodes)
    X, s = nodes, 0.0
    at = {}
    for t in times:
        X, _ = integrate(vf.rhs, X, s, t, vf.step)
        at[t], s = X, t
    return [float(np.sum(wv * weight(at[float(t)], float(t)))) for t, weight in terms]


__all__ = [
    "BoundaryCurves", "VField", "RHReport", "solve_boundary_curves", "classify_domain",
    "backward_foot", "forward_flow", "v_eval", "rh_check", "pullback_pair", "pullback_pairs", "curves_at",
    "integrate", "step_size", "label_nodes",
]
