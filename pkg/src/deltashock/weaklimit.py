"""Distributional measurements: pairings, point-mass estimates and residual rates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureNotConverged, WindowTooSmall
from .problem import Problem
from .switch import smooth_step, smooth_step_deriv
from .uwave import UField
from .vtransport import VField, backward_foot, pullback_pair, pullback_pairs, v_eval

MIN_QUAD_N = 200
MAX_DOUBLINGS = 6
PAIR_TOL = 1e-8
ZOOM_LEVELS = 4
ZOOM_POINTS = 41
PLATEAU_TOL = 1e-3


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported weight with an analytic derivative.

    ``bump``: ``exp(1 - 1/(1 - r^2))``; ``poly_bump``: ``(1 - r^2)^4``;
    ``indicator_smooth``: 1 on ``[center - width, center + width]`` with smooth
    ramps of length ``ramp`` on both sides.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    center: float = 0.0
    width: float = 1.0
    ramp: float = 0.25

    def __post_init__(self):
        if self.kind not in ("bump", "poly_bump", "indicator_smooth"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.width <= 0 or self.ramp <= 0:
            raise ValueError("width and ramp must be positive")

    @property
    def support(self) -> tuple:
        reach = self.width + (self.ramp if self.kind == "indicator_smooth" else 0.0)
        return (self.center - reach, self.center + reach)

    @property
    def sup_norm(self) -> float:
        return 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator_smooth":
            lo, hi = self.support
            return smooth_step((x - lo) / self.ramp) * smooth_step((hi - x) / self.ramp)
        r = (x - self.center) / self.width
        inside = np.abs(r) < 1
        q = np.where(inside, 1.0 - r * r, 1.0)
        if self.kind == "bump":
            return np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
        return np.where(inside, q**4, 0.0)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "indicator_smooth":
            lo, hi = self.support
            a, b = (x - lo) / self.ramp, (hi - x) / self.ramp
            return (smooth_step_deriv(a) * smooth_step(b) - smooth_step(a) * smooth_step_deriv(b)) / self.ramp
        r = (x - self.center) / self.width
        inside = np.abs(r) < 1
        q = np.where(inside, 1.0 - r * r, 1.0)
        if self.kind == "bump":
            val = np.where(inside, np.exp(1.0 - 1.0 / q) * (-2.0 * r / q**2), 0.0)
        else:
            val = np.where(inside, -8.0 * r * q**3, 0.0)
        return val / self.width

    @property
    def derivative(self) -> "_Weight":
        return _Weight(self.deriv, self.support)

    def integral(self, lo: float = -np.inf, hi: float = np.inf, n: int = 4000) -> float:
        a, b = max(lo, self.support[0]), min(hi, self.support[1])
        if b <= a:
            return 0.0
        return _simpson(lambda x: self(x), [a, b], (b - a) / n)


@dataclass(frozen=True)
class _Weight:
    fn: Callable
    support: tuple

    def __call__(self, x):
        return self.fn(x)


def _simpson(fun, breaks: Sequence[float], h: float, fine: Sequence[tuple] = ()) -> float:
    """Composite Simpson on each segment between consecutive breaks.

    ``fine`` lists ``(lo, hi, h_fine)`` zones where the spacing is tightened.
    """
    total = 0.0
    breaks = sorted(set(breaks))
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        hh = h
        for lo, hi, hf in fine:
            if a < hi and b > lo:
                hh = min(hh, hf)
        m = max(2, 2 * math.ceil((b - a) / (2 * hh)))
        x = np.linspace(a, b, m + 1)
        y = np.asarray(fun(x), dtype=float)
        total += (b - a) / (3 * m) * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())
    return float(total)


def pair(field, eta, t: float, quad_n: int = 400, breakpoints: Sequence[float] = (),
         eps: float | None = None) -> float:
    """``<field(., t), eta>`` over the support of ``eta``.

    ``field`` is a :class:`VField` (paired in label space) or any callable
    ``field(x, t)``.  For callables the Simpson mesh is split at
    ``breakpoints`` and refined to ``eps/20`` within ``3 eps`` of them; the
    mesh is doubled until two results agree to ``1e-8 ||eta||``.
    """
    if quad_n < MIN_QUAD_N:
        raise ValueError(f"quad_n must be at least {MIN_QUAD_N}")
    if isinstance(field, VField):
        return pullback_pair(field, lambda X, s: eta(X), t, eta.support)
    lo, hi = eta.support
    cuts = [lo, hi] + [b for b in breakpoints if lo < b < hi]
    fine = [(b - 3 * eps, b + 3 * eps, eps / 20) for b in breakpoints] if eps else []
    norm = getattr(eta, "sup_norm", None) or float(np.max(np.abs(eta(np.linspace(lo, hi, 2001)))))

    def integrand(x):
        return np.asarray(field(x, t), dtype=float) * eta(x)

    h = (hi - lo) / quad_n
    prev = _simpson(integrand, cuts, h, fine)
    for _ in range(MAX_DOUBLINGS):
        h *= 0.5
        fine = [(a, b, hf * 0.5) for a, b, hf in fine]
        cur = _simpson(integrand, cuts, h, fine)
        moved = abs(cur - prev)
        if moved < PAIR_TOL * max(norm, 1e-300):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"pairing at t={t} still moving by {moved:.3e}")


def u_pair(ufield: UField, eps: float, eta, t: float, quad_n: int = 400,
           transform: Callable | None = None) -> float:
    """Pair ``transform(u_eps)`` (default identity) with ``eta``, split at the fan edges."""
    fm = ufield.flow_map(t, eps)
    fn = transform or (lambda u: u)
    return pair(lambda x, s: fn(ufield(x, s, eps)), eta, t, quad_n, (fm.phi2, fm.phi1), eps)


def riemann_pairing(problem: Problem, eta, t: float) -> float:
    """Pairing of the limiting shock ``U1 | U0`` located at the predicted position."""
    loc = float(problem.consts.shock_position(t))
    d = problem.data
    return d.U1 * eta.integral(hi=loc) + d.U0 * eta.integral(lo=loc)


@dataclass(frozen=True)
class PredictedLimit:
    mass: float
    location: float
    left_states: tuple
    right_states: tuple
    mass_rate: float


def _v0_integral(problem: Problem) -> float:
    d = problem.data
    return _label_integral(problem, d.a2, d.a1)


def _label_integral(problem: Problem, lo: float, hi: float) -> float:
    """``int_lo^hi vhat``, graded towards the breakpoints of ``v0``."""
    from .vtransport import _graded

    d = problem.data
    edges = [lo, hi, *np.linspace(lo, hi, 65).tolist()]
    edges += [c for c in (d.a2, d.a1) if lo < c < hi]
    for bp in d.v0_breakpoints:
        if lo < bp < hi:
            edges += _graded(max(lo, d.a2), min(hi, d.a1), bp, levels=30)
    edges = np.unique(np.clip(edges, lo, hi))
    x, w = np.polynomial.legendre.leggauss(10)
    half = 0.5 * np.diff(edges)[:, None]
    nodes = (0.5 * (edges[:-1] + edges[1:])[:, None] + half * x).ravel()
    return float(np.sum((half * w).ravel() * d.vhat(nodes)))


def predicted_limit(problem: Problem, t: float) -> PredictedLimit:
    """Weight and position of the point mass in the ``eps -> 0`` limit."""
    k, d, fl = problem.consts, problem.data, problem.flux
    if t < k.tstar - 1e-12:
        raise ValueError(f"the point mass forms at t*={k.tstar}; got t={t}")
    loc = float(k.shock_position(t))
    g1, g0 = float(fl.g(d.U1)), float(fl.g(d.U0))
    mass = d.V1 * (d.a2 + g1 * t - loc) + d.V0 * (loc - d.a1 - g0 * t) + _v0_integral(problem)
    rate = d.V1 * g1 - d.V0 * g0 - (d.V1 - d.V0) * k.shock_speed
    return PredictedLimit(mass, loc, (d.U1, d.V1), (d.U0, d.V0), rate)


def locate_peak(vf: VField, t: float, lo: float, hi: float) -> float:
    """Leftmost argmax of v on a grid of spacing ``eps/20``, then zoomed in."""
    spacing = vf.eps / 20.0
    x = np.arange(lo, hi + 0.5 * spacing, spacing)
    v = v_eval(vf, x, t)
    best = float(x[int(np.argmax(v))])
    for _ in range(ZOOM_LEVELS):
        x = np.linspace(best - spacing, best + spacing, ZOOM_POINTS)
        v = v_eval(vf, x, t)
        best = float(x[int(np.argmax(v))])
        spacing = x[1] - x[0]
    return best


def delta_mass(vf: VField, t: float, window: float | None = None) -> tuple:
    """Excess of v over the two plateaus near the shock, and where it sits.

    The excess over ``[loc - w, loc + w]`` equals ``int vhat`` over the labels
    that end up in that window minus the plateau background; the labels come
    from the characteristic feet of the window ends.
    """
    problem = vf.problem
    k, d = problem.consts, problem.data
    if t <= k.tstar:
        raise ValueError("delta_mass needs t > t*")
    w = 20.0 * vf.eps if window is None else float(window)
    if w < 20.0 * vf.eps - 1e-15:
        raise WindowTooSmall(f"window {w} is below 20 eps")
    pred = float(k.shock_position(t))
    ends = np.array([pred - w, pred + w])
    v_ends = v_eval(vf, ends, t)
    dev = np.abs(v_ends - np.array([d.V1, d.V0]))
    if np.any(dev > PLATEAU_TOL):
        raise WindowTooSmall(f"v at the window ends deviates from the plateaus by {dev.max():.3e}")
    loc = locate_peak(vf, t, pred - w, pred + w)
    L, R = loc - w, loc + w
    feet, _ = backward_foot(vf, np.array([L, R]), t)
    inside = _label_integral(problem, float(feet[0]), float(feet[1]))
    mass = inside - d.V1 * (loc - L) - d.V0 * (R - loc)
    return float(mass), float(loc)


def _slope(eps_list, values) -> float:
    x, y = np.log(np.asarray(eps_list)), np.log(np.maximum(np.asarray(values), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ResidualScaling:
    eps_list: list
    R_u: list  # R_u[i][j]: eps i, test function j
    R_v: list
    slope_u_per_eta: list
    slope_u: float
    slope_v: float


def u_residual(ufield: UField, eps: float, eta: TestFunction, t: float, quad_n: int = 400) -> float:
    """``|d/dt <u, eta> - <f(u), eta'>|`` with a central difference of step ``eps^2``."""
    dt = eps * eps
    f = ufield.problem.flux.f
    ahead = u_pair(ufield, eps, eta, t + dt, quad_n)
    behind = u_pair(ufield, eps, eta, t - dt, quad_n)
    flux = u_pair(ufield, eps, eta.derivative, t, quad_n, transform=f)
    return abs((ahead - behind) / (2 * dt) - flux)


def v_residual(vf: VField, eta: TestFunction, t: float) -> float:
    """``|d/dt <v, eta> - <v g(u), eta'>|``, all pairings taken in label space."""
    dt = vf.eps * vf.eps
    g = vf.problem.flux.g
    behind, flux, ahead = pullback_pairs(vf, [
        (t - dt, lambda X, s: eta(X)),
        (t, lambda X, s: g(vf.u(X, s)) * eta.deriv(X)),
        (t + dt, lambda X, s: eta(X)),
    ], eta.support)
    return abs((ahead - behind) / (2 * dt) - flux)


def residual_scaling(problem: Problem, t: float, etas: Sequence[TestFunction],
                     eps_list: Sequence[float], ufield: UField | None = None,
                     vfields: dict | None = None, quad_n: int = 400) -> ResidualScaling:
    """Log-log slopes of the weak residuals of both equations against ``eps``."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 4:
        raise ValueError("need at least four eps values")
    ratios = np.array(eps_list[:-1]) / np.array(eps_list[1:])
    if not np.allclose(ratios, 2.0, rtol=1e-9):
        raise ValueError("eps_list must be geometric with ratio 2")
    if t <= 0:
        raise ValueError("t must be positive")
    ufield = ufield or UField(problem)
    R_u = [[u_residual(ufield, e, eta, t, quad_n) for eta in etas] for e in eps_list]
    R_v = []
    for e in eps_list:
        vf = (vfields or {}).get(e) or VField(problem, e, ufield, t_max=t + 2 * e * e)
        R_v.append(max(v_residual(vf, eta, t) for eta in etas))
    per_eta = [_slope(eps_list, [row[j] for row in R_u]) for j in range(len(etas))]
    return ResidualScaling(eps_list, R_u, R_v, per_eta,
                           _slope(eps_list, [max(row) for row in R_u]), _slope(eps_list, R_v))


@dataclass
class WeakLimitReport:
    t: float
    eps_list: list
    mass_estimates: list
    location_estimates: list
    predicted_mass: float
    predicted_location: float
    u_residual_slope: float | None = None
    v_residual_slope: float | None = None
    background: tuple = ()
    R_u: list = field(default_factory=list)
    R_v: list = field(default_factory=list)

    def __post_init__(self):
        e = np.asarray(self.eps_list, dtype=float)
        if np.any(np.diff(e) >= 0):
            raise ValueError("eps_list must be strictly decreasing")
        if not np.all(np.isfinite(self.mass_estimates + self.location_estimates)):
            raise ValueError("non-finite estimate in report")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["background"] = dict(zip(("V1", "V0", "U1", "U0"), self.background))
        return out


def weak_limit_report(problem: Problem, t: float, eps_list: Sequence[float],
                      etas: Sequence[TestFunction] | None = None, window: float | None = None,
                      residual_eps: Sequence[float] | None = None,
                      ufield: UField | None = None) -> WeakLimitReport:
    """Mass and location per ``eps`` plus the residual slopes, in one report."""
    ufield = ufield or UField(problem)
    pred = predicted_limit(problem, t)
    masses, locs, vfields = [], [], {}
    for e in eps_list:
        vf = VField(problem, e, ufield, t_max=t + 2 * e * e)
        vfields[e] = vf
        m, x = delta_mass(vf, t, window)
        masses.append(m)
        locs.append(x)
    su = sv = None
    R_u, R_v = [], []
    if etas:
        rs = residual_scaling(problem, t, etas, residual_eps or eps_list, ufield, vfields)
        su, sv, R_u, R_v = rs.slope_u, rs.slope_v, [max(r) for r in rs.R_u], rs.R_v
    d = problem.data
    return WeakLimitReport(t=float(t), eps_list=[float(e) for e in eps_list], mass_estimates=masses,
                           location_estimates=locs, predicted_mass=pred.mass,
                           predicted_location=pred.location, u_residual_slope=su,
                           v_residual_slope=sv, background=(d.V1, d.V0, d.U1, d.U0),
                           R_u=R_u, R_v=R_v)
