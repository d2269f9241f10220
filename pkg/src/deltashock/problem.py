"""Problem instances: fluxes, plateau states, geometry and derived constants.

The initial datum for ``u`` is ``U1`` left of ``a2``, ``U0`` right of ``a1`` and,
in between, the profile ``u0`` defined implicitly by ``f'(u0(x)) = -K x + b``.
All characteristics leaving ``[a2, a1]`` then meet at a single point
``(tstar, xstar)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateStates, FluxDescriptorError, InvalidProblem, RootNotBracketed

ArrayFn = Callable[[np.ndarray], np.ndarray]

HYPOTHESIS_GRID = 1000
HYPOTHESIS_TOL = 1e-10
FD_STEP = 1e-5
FD_TOL = 1e-6
U0_TOL = 1e-12


@dataclass(frozen=True)
class FluxPair:
    """Flux ``f`` of the u-equation and transport speed ``g`` of the v-equation.

    ``dfinv`` is an optional exact inverse of ``f'``; when absent the profile
    is found by bisection.
    """

    f: ArrayFn
    df: ArrayFn
    ddf: ArrayFn
    g: ArrayFn
    dg: ArrayFn
    name: str = "custom"
    dfinv: ArrayFn | None = None


def _poly(coeffs: Sequence[float]):
    p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    return p, p.deriv(), p.deriv(2)


def flux_from_spec(f_spec, g_spec) -> FluxPair:
    """Build a :class:`FluxPair` from catalog names or polynomial coefficients.

    ``f_spec``: ``"quadratic"`` (u^2/2), ``"quartic"`` (u^4/4) or
    ``{"poly": [c0, c1, ...]}`` (low order first).
    ``g_spec``: ``"linear"`` / ``{"name": "linear", "slope": k}`` (k u, k=2 by
    default), ``{"name": "sin_perturbed", "delta": d}`` (u + d sin u) or
    ``{"poly": [...]}``.
    """
    names = []
    dfinv = None
    if f_spec == "quadratic":
        f = lambda u: 0.5 * np.asarray(u) ** 2
        df = lambda u: np.asarray(u, dtype=float) * 1.0
        ddf = lambda u: np.ones_like(np.asarray(u, dtype=float))
        dfinv = lambda y: np.asarray(y, dtype=float) * 1.0
        names.append("quadratic")
    elif f_spec == "quartic":
        f = lambda u: 0.25 * np.asarray(u) ** 4
        df = lambda u: np.asarray(u, dtype=float) ** 3
        ddf = lambda u: 3.0 * np.asarray(u, dtype=float) ** 2
        dfinv = np.cbrt
        names.append("quartic")
    elif isinstance(f_spec, dict) and "poly" in f_spec:
        f, df, ddf = _poly(f_spec["poly"])
        names.append("fpoly")
    else:
        raise InvalidProblem(f"unknown flux f: {f_spec!r}")

    if isinstance(g_spec, str):
        g_spec = {"name": g_spec}
    if not isinstance(g_spec, dict):
        raise InvalidProblem(f"unknown transport speed g: {g_spec!r}")
    if "poly" in g_spec:
        g, dg, _ = _poly(g_spec["poly"])
        names.append("gpoly")
    elif g_spec.get("name") == "linear":
        k = float(g_spec.get("slope", 2.0))
        g = lambda u: k * np.asarray(u, dtype=float)
        dg = lambda u: np.full_like(np.asarray(u, dtype=float), k)
        names.append(f"linear{k:g}")
    elif g_spec.get("name") == "sin_perturbed":
        d = float(g_spec.get("delta", 1.0))
        g = lambda u: np.asarray(u, dtype=float) + d * np.sin(u)
        dg = lambda u: 1.0 + d * np.cos(u)
        names.append(f"sin{d:g}")
    else:
        raise InvalidProblem(f"unknown transport speed g: {g_spec!r}")
    return FluxPair(f, df, ddf, g, dg, name="/".join(names), dfinv=dfinv)


@dataclass(frozen=True)
class Profile:
    """Bounded initial profile of v on ``[a2, a1]``.

    ``breakpoints`` lists points where the profile is not smooth (e.g. the cusp
    of ``|x|^(2/3)``); quadrature routines grade their panels towards them.
    """

    kind: str
    params: tuple = ()
    breakpoints: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "abs_power":
            scale, exponent, center = self.params
            # |x|^p through (x^2)^(p/2) keeps the value real and even
            return scale * np.power((x - center) ** 2, 0.5 * exponent)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(x, self.params)
        raise InvalidProblem(f"unknown profile kind {self.kind!r}")

    @classmethod
    def from_spec(cls, spec) -> "Profile":
        if isinstance(spec, (int, float)):
            return cls("constant", (float(spec),))
        kind = spec.get("kind")
        if kind == "constant":
            return cls("constant", (float(spec["value"]),))
        if kind == "abs_power":
            exponent = spec.get("exponent", "2/3")
            exponent = float(Fraction(exponent)) if isinstance(exponent, str) else float(exponent)
            center = float(spec.get("center", 0.0))
            return cls("abs_power", (float(spec.get("scale", 1.0)), exponent, center), (center,))
        if kind == "poly":
            return cls("poly", tuple(float(c) for c in spec["coeffs"]))
        raise InvalidProblem(f"unknown profile spec {spec!r}")


@dataclass(frozen=True)
class ProblemData:
    U1: float
    U0: float
    V1: float
    V0: float
    a2: float
    a1: float
    v0: Callable = field(default_factory=lambda: Profile("constant", (1.0,)))
    A: float | None = None

    def __post_init__(self):
        if not self.a2 < self.a1:
            raise InvalidProblem(f"need a2 < a1, got a2={self.a2}, a1={self.a1}")
        if self.A is not None and self.A <= 0:
            raise InvalidProblem("A must be positive")
        probe = np.asarray(self.v0(np.linspace(self.a2, self.a1, 1001)), dtype=float)
        if not np.all(np.isfinite(probe)):
            raise InvalidProblem("v0 must be bounded on [a2, a1]")

    @property
    def v0_breakpoints(self) -> tuple:
        return tuple(getattr(self.v0, "breakpoints", ()))

    def vhat(self, x):
        """Initial datum of v on the whole line."""
        x = np.asarray(x, dtype=float)
        inner = np.clip(x, self.a2, self.a1)
        return np.where(x < self.a2, self.V1, np.where(x > self.a1, self.V0, self.v0(inner)))


@dataclass(frozen=True)
class DerivedConstants:
    K: float
    b: float
    tstar: float
    xstar: float
    c: float
    df1: float  # f'(U1)
    df0: float  # f'(U0)

    @property
    def dspan(self) -> float:
        return self.df1 - self.df0

    @property
    def shock_speed(self) -> float:
        return 0.5 * self.c

    def psi0(self, t):
        """Distance between the classical edge characteristics; zero at tstar."""
        return self.dspan * (np.asarray(t, dtype=float) - self.tstar)

    def shock_position(self, t):
        return 0.5 * self.c * (np.asarray(t, dtype=float) - self.tstar) + self.xstar


def derive_constants(flux: FluxPair, data: ProblemData) -> DerivedConstants:
    if data.U1 == data.U0:
        raise DegenerateStates("U1 == U0")
    df1 = float(flux.df(data.U1))
    df0 = float(flux.df(data.U0))
    if df1 == df0:
        raise DegenerateStates("f'(U1) == f'(U0): no gradient catastrophe")
    if df1 < df0:
        raise InvalidProblem("f'(U1) < f'(U0): data is expansive, no shock forms")
    width = data.a1 - data.a2
    K = (df1 - df0) / width
    b = (df1 * data.a1 - df0 * data.a2) / width
    tstar = width / (df1 - df0)
    xstar = df1 * tstar + data.a2
    c = 2.0 * (float(flux.f(data.U1)) - float(flux.f(data.U0))) / (data.U1 - data.U0)
    return DerivedConstants(K=K, b=b, tstar=tstar, xstar=xstar, c=c, df1=df1, df0=df0)


def _check_descriptor(fn, dfn, grid, tol=FD_TOL):
    fd = (fn(grid + FD_STEP) - fn(grid - FD_STEP)) / (2 * FD_STEP)
    exact = dfn(grid)
    return bool(np.all(np.abs(fd - exact) <= tol * (1.0 + np.abs(exact))))


@dataclass(frozen=True)
class Problem:
    """A flux pair, its data and the constants derived from both."""

    flux: FluxPair
    data: ProblemData
    consts: DerivedConstants = field(init=False)

    def __post_init__(self):
        lo, hi = sorted((self.data.U0, self.data.U1))
        grid = np.linspace(lo, hi, HYPOTHESIS_GRID)
        for name, fn, dfn in (("df", self.flux.f, self.flux.df),
                              ("ddf", self.flux.df, self.flux.ddf),
                              ("dg", self.flux.g, self.flux.dg)):
            if not _check_descriptor(fn, dfn, grid):
                raise FluxDescriptorError(f"{name} is inconsistent with its primitive")
        object.__setattr__(self, "consts", derive_constants(self.flux, self.data))

    def u0(self, x):
        """Profile on ``[a2, a1]``; exact inverse of f' when the catalog has one."""
        if self.flux.dfinv is not None:
            target = -self.consts.K * np.asarray(x, dtype=float) + self.consts.b
            return np.clip(self.flux.dfinv(target), self.data.U0, self.data.U1)
        return u0_profile(self, x)

    def du0(self, u):
        """Slope of the profile expressed through its value: ``-K / f''(u)``."""
        return -self.consts.K / self.flux.ddf(u)

    def uhat(self, x):
        x = np.asarray(x, dtype=float)
        inner = np.clip(x, self.data.a2, self.data.a1)
        return np.where(x < self.data.a2, self.data.U1,
                        np.where(x > self.data.a1, self.data.U0, self.u0(inner)))


def u0_profile(problem: Problem, x):
    """Solve ``f'(u) = -K x + b`` for u in ``[U0, U1]`` by bisection (vectorized)."""
    k, d = problem.consts, problem.data
    x = np.asarray(x, dtype=float)
    target = -k.K * x + k.b
    slack = U0_TOL * (1.0 + abs(k.df0) + abs(k.df1))
    if np.any(target < k.df0 - slack) or np.any(target > k.df1 + slack):
        raise RootNotBracketed("-K x + b lies outside [f'(U0), f'(U1)]; x is outside [a2, a1]")
    lo = np.full_like(target, d.U0)
    hi = np.full_like(target, d.U1)
    df = problem.flux.df
    n_iter = int(math.ceil(math.log2((d.U1 - d.U0) / U0_TOL))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = df(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AdmissibilityReport:
    convex: bool
    convex_margin: float
    g_dominates: bool
    g_margin: float
    crossing: bool
    Uhat: float | None
    chain: tuple
    chain_ok: bool

    @property
    def passed(self) -> bool:
        return self.convex and self.g_dominates and self.crossing and self.chain_ok

    def failures(self) -> list[str]:
        out = []
        if not self.convex:
            out.append("f'' > 0")
        if not self.g_dominates:
            out.append("g' - f'' >= 0")
        if not self.crossing:
            out.append("g(Uhat) = f'(Uhat)")
        if not self.chain_ok:
            out.append("g(U0) <= f'(U0) <= c/2 <= f'(U1) <= g(U1)")
        return out


def check_admissibility(flux: FluxPair, data: ProblemData) -> AdmissibilityReport:
    """Sample the overcompressive hypotheses on a dense grid of ``[U0, U1]``."""
    consts = derive_constants(flux, data)
    lo, hi = sorted((data.U0, data.U1))
    u = np.linspace(lo, hi, HYPOTHESIS_GRID)
    tol = HYPOTHESIS_TOL

    convex_margin = float(np.min(flux.ddf(u)))
    g_margin = float(np.min(flux.dg(u) - flux.ddf(u)))

    gap = flux.g(u) - flux.df(u)
    Uhat = None
    neg, pos = np.nonzero(gap < -tol)[0], np.nonzero(gap > tol)[0]
    if neg.size and pos.size:
        # bracket the first sign change
        flips = np.nonzero(np.sign(gap[:-1]) * np.sign(gap[1:]) <= 0)[0]
        for i in flips:
            if gap[i] == 0.0 and i > 0:  # roots at the end states do not count
                Uhat = float(u[i])
                break
            if gap[i] * gap[i + 1] < 0:
                Uhat = float(brentq(lambda s: float(flux.g(s) - flux.df(s)), u[i], u[i + 1], xtol=1e-14))
                break

    chain = (float(flux.g(data.U0)), consts.df0, consts.shock_speed, consts.df1, float(flux.g(data.U1)))
    chain_ok = all(chain[i] <= chain[i + 1] + tol for i in range(4))
    return AdmissibilityReport(
        convex=convex_margin > tol,
        convex_margin=convex_margin,
        g_dominates=g_margin >= -tol,
        g_margin=g_margin,
        crossing=Uhat is not None and lo < Uhat < hi,
        Uhat=Uhat,
        chain=chain,
        chain_ok=chain_ok,
    )


def example12() -> Problem:
    """Burgers flux with g = 2u, u0(x) = -x and v0(x) = |x|^(2/3) on [-1, 1]."""
    flux = flux_from_spec("quadratic", {"name": "linear", "slope": 2.0})
    data = ProblemData(U1=1.0, U0=-1.0, V1=1.0, V0=1.0, a2=-1.0, a1=1.0,
                       v0=Profile("abs_power", (1.0, 2.0 / 3.0, 0.0), (0.0,)))
    return Problem(flux, data)


def quartic_instance() -> Problem:
    """Quartic flux with g = u^3 + 2(u - 1); strictly convex on its state range."""
    flux = flux_from_spec("quartic", {"poly": [-2.0, 2.0, 0.0, 1.0]})
    data = ProblemData(U1=1.5, U0=0.5, V1=1.0, V0=0.5, a2=-1.0, a1=1.0,
                       v0=Profile("poly", (0.75, -0.25)))
    return Problem(flux, data)


CATALOG = {
    "example12": example12,
    "quartic": quartic_instance,
}
