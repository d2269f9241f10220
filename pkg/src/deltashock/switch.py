"""Smoothed Heaviside pair and the switch functions B1, B2.

``B1(rho) = int w1'(z) w2(z + rho) dz`` and ``B2(rho) = int w2'(z) w1(z - rho) dz``
sum to one for every rho; they weigh characteristic transport against shock
transport once two smoothed jumps overlap.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import QuadratureNotConverged

RHO_MIN, RHO_MAX, RHO_NODES = -2.0, 4.0, 601
GL_ORDER = 8
REFINE_TOL = 1e-10


def _bump_tail(s):
    s = np.asarray(s, dtype=float)
    pos = s > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, s, 1.0)), 0.0)


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, symmetric about 1/2."""
    a, b = _bump_tail(s), _bump_tail(1.0 - np.asarray(s, dtype=float))
    return a / (a + b)


def smooth_step_deriv(s):
    s = np.asarray(s, dtype=float)
    a, b = _bump_tail(s), _bump_tail(1.0 - s)
    da = np.where(s > 0, a / np.where(s > 0, s, 1.0) ** 2, 0.0)
    db = np.where(s < 1, b / np.where(s < 1, 1.0 - s, 1.0) ** 2, 0.0)
    return (da * b + a * db) / (a + b) ** 2


@dataclass(frozen=True)
class MollifierPair:
    omega1: Callable
    omega2: Callable
    domega1: Callable
    domega2: Callable
    support1: tuple = (-1.0, 0.0)
    support2: tuple = (0.0, 1.0)


def make_mollifiers() -> MollifierPair:
    """w1 ramps on [-1, 0] and w2 on [0, 1]; w2(z) = w1(z - 1)."""
    return MollifierPair(
        omega1=lambda z: smooth_step(np.asarray(z, dtype=float) + 1.0),
        omega2=smooth_step,
        domega1=lambda z: smooth_step_deriv(np.asarray(z, dtype=float) + 1.0),
        domega2=smooth_step_deriv,
    )


def gauss_panels(lo: float, hi: float, n_nodes: int, order: int = GL_ORDER):
    """Nodes and weights of composite Gauss-Legendre with ``n_nodes // order`` panels."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, max(n_nodes // order, 1) + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def _tabulate(m: MollifierPair, rho: np.ndarray, n_quad: int):
    z1, w1 = gauss_panels(*m.support1, n_quad)
    z2, w2 = gauss_panels(*m.support2, n_quad)
    k1 = w1 * m.domega1(z1)
    k2 = w2 * m.domega2(z2)
    B1 = m.omega2(z1[None, :] + rho[:, None]) @ k1
    B2 = m.omega1(z2[None, :] - rho[:, None]) @ k2
    return B1, B2


@dataclass(frozen=True, eq=False)
class SwitchTable:
    rho_grid: np.ndarray
    B1_values: np.ndarray
    B2_values: np.ndarray
    quadrature_n: int

    def __post_init__(self):
        interp = PchipInterpolator(self.rho_grid, self.B1_values, extrapolate=False)
        object.__setattr__(self, "_b1", interp)
        object.__setattr__(self, "_db1", interp.derivative())
        object.__setattr__(self, "_b2", PchipInterpolator(self.rho_grid, self.B2_values, extrapolate=False))
        object.__setattr__(self, "_coef", np.ascontiguousarray(interp.c.T))
        rho0 = brentq(lambda r: float(self.B1(r)) - 0.5, 0.0, 2.0, xtol=1e-15)
        object.__setattr__(self, "rho0", rho0)

    @property
    def spacing(self) -> float:
        return float(self.rho_grid[1] - self.rho_grid[0])

    def B1(self, rho):
        rho = np.asarray(rho, dtype=float)
        lo, hi = self.rho_grid[0], self.rho_grid[-1]
        out = self._b1(np.clip(rho, lo, hi))
        out = np.where(rho <= lo, self.B1_values[0], np.where(rho >= hi, self.B1_values[-1], out))
        return out if out.ndim else float(out)

    def B2(self, rho):
        rho = np.asarray(rho, dtype=float)
        lo, hi = self.rho_grid[0], self.rho_grid[-1]
        out = self._b2(np.clip(rho, lo, hi))
        out = np.where(rho <= lo, self.B2_values[0], np.where(rho >= hi, self.B2_values[-1], out))
        return out if out.ndim else float(out)

    def dB1(self, rho):
        rho = np.asarray(rho, dtype=float)
        lo, hi = self.rho_grid[0], self.rho_grid[-1]
        inside = (rho > lo) & (rho < hi)
        out = np.where(inside, self._db1(np.clip(rho, lo, hi)), 0.0)
        return out if out.ndim else float(out)

    def B1_scalar(self, rho: float) -> float:
        """Fast scalar evaluation of the interpolant, used inside ODE loops."""
        r0 = self.rho_grid[0]
        n = len(self.rho_grid) - 1
        if rho <= r0:
            return float(self.B1_values[0])
        h = self.spacing
        i = int((rho - r0) / h)
        if i >= n:
            return float(self.B1_values[-1])
        s = rho - (r0 + i * h)
        c3, c2, c1, c0 = self._coef[i]
        return float(((c3 * s + c2) * s + c1) * s + c0)


def build_switch_table(m: MollifierPair | None = None, n_quad: int = 128,
                       rho_range: tuple = (RHO_MIN, RHO_MAX), n_nodes: int = RHO_NODES,
                       check: bool = True) -> SwitchTable:
    """Tabulate B1 and B2; refuse the table if doubling the rule moves any node."""
    if n_quad < 64:
        raise ValueError("n_quad must be at least 64")
    m = m or make_mollifiers()
    rho = np.linspace(rho_range[0], rho_range[1], n_nodes)
    B1, B2 = _tabulate(m, rho, n_quad)
    if check:
        B1f, B2f = _tabulate(m, rho, 2 * n_quad)
        drift = max(np.max(np.abs(B1 - B1f)), np.max(np.abs(B2 - B2f)))
        if drift > REFINE_TOL:
            raise QuadratureNotConverged(f"switch table moved by {drift:.3e} when n_quad doubled")
    # support arithmetic makes these exact; remove quadrature dust
    B1 = np.clip(np.where(rho <= 0.0, 0.0, np.where(rho >= 2.0, 1.0, B1)), 0.0, 1.0)
    B2 = np.clip(np.where(rho >= 2.0, 0.0, np.where(rho <= 0.0, 1.0, B2)), 0.0, 1.0)
    return SwitchTable(rho, B1, B2, n_quad)


def verify_superposition(a: float, b_amp: float, c_amp: float, phi1: float, phi2: float,
                         eps: float, f: Callable, eta, table: SwitchTable | None = None,
                         m: MollifierPair | None = None, n_panels: int = 400) -> float:
    """Distance between both sides of the nonlinear superposition law, paired with ``eta``.

    ``f`` is the scalar flux (a :class:`~deltashock.problem.FluxPair` is accepted
    too) and ``eta`` a :class:`~deltashock.weaklimit.TestFunction`.
    """
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 0.5]")
    f = getattr(f, "f", f)
    m = m or make_mollifiers()
    table = table or default_switch_table()
    rho = (phi2 - phi1) / eps
    B1, B2 = table.B1(rho), table.B2(rho)

    lo, hi = eta.support
    cuts = [phi1, phi1 + eps, phi2 - eps, phi2]
    edges = np.unique(np.clip(np.concatenate([np.linspace(lo, hi, n_panels + 1), cuts]), lo, hi))
    x, wq = np.polynomial.legendre.leggauss(GL_ORDER)
    half = 0.5 * np.diff(edges)[:, None]
    xs = (0.5 * (edges[:-1] + edges[1:])[:, None] + half * x).ravel()
    ws = (half * wq).ravel()

    th1 = m.omega1((phi1 - xs) / eps)
    th2 = m.omega2((phi2 - xs) / eps)
    lhs = f(a + b_amp * th1 + c_amp * th2)
    fa, fab, fac, fabc = f(a), f(a + b_amp), f(a + c_amp), f(a + b_amp + c_amp)
    rhs = (fa + th1 * (fabc * B1 + fab * B2 - fac * B1 - fa * B2)
           + th2 * (fabc * B2 - fab * B2 + fac * B1 - fa * B1))
    return float(abs(np.sum(ws * (lhs - rhs) * eta(xs))))


@functools.lru_cache(maxsize=None)
def default_switch_table() -> SwitchTable:
    """Process-wide table for the default mollifier pair (built once)."""
    return build_switch_table()
