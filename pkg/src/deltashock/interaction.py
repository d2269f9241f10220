"""Fast-variable dynamics of the two merging edge characteristics.

With ``tau = psi0(t) / eps`` the scaled distance between the edge
characteristics obeys the autonomous ODE ``rho' = 1 - 2 B1(rho)``.  For
``tau <= 0`` the switch is off and ``rho = tau``; afterwards rho climbs to the
fixed point ``rho0`` with ``B1(rho0) = 1/2``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import StepNotConverged
from .switch import SwitchTable, default_switch_table

TAU_MIN, TAU_MAX, TAU_STEP = -10.0, 50.0, 0.005
STEP_TOL = 1e-9


def _rk4(sw: SwitchTable, tau_max: float, step: float):
    n = int(round(tau_max / step))
    h = tau_max / n
    b1 = sw.B1_scalar
    rho = np.empty(n + 1)
    i1 = np.empty(n + 1)
    i2 = np.empty(n + 1)
    bb = np.empty(n + 1)
    r = a = c = 0.0
    rho[0] = i1[0] = i2[0] = 0.0
    bb[0] = b1(0.0)
    for k in range(n):
        s1 = bb[k]
        s2 = b1(r + 0.5 * h * (1 - 2 * s1))
        s3 = b1(r + 0.5 * h * (1 - 2 * s2))
        s4 = b1(r + h * (1 - 2 * s3))
        mean_b = (s1 + 2 * s2 + 2 * s3 + s4) / 6.0
        r += h * (1 - 2 * mean_b)
        a += h * (1 - 2 * mean_b)
        c += h * mean_b
        rho[k + 1], i1[k + 1], i2[k + 1] = r, a, c
        bb[k + 1] = b1(r)
    tau = np.linspace(0.0, n * h, n + 1)
    return tau, rho, i1, i2, bb


@dataclass(frozen=True, eq=False)
class RhoTable:
    """rho(tau) with the running integrals of ``1 - 2 B1`` (I1) and ``B1`` (I2)."""

    tau_grid: np.ndarray
    rho_values: np.ndarray
    B1_values: np.ndarray
    I1_values: np.ndarray
    I2_values: np.ndarray
    rho0: float
    tail: float
    step: float
    switch: SwitchTable

    def __post_init__(self):
        pos = self.tau_grid >= 0
        tau = self.tau_grid[pos]
        slope = 1.0 - 2.0 * self.B1_values[pos]
        object.__setattr__(self, "_rho", CubicHermiteSpline(tau, self.rho_values[pos], slope))
        object.__setattr__(self, "_i1", CubicHermiteSpline(tau, self.I1_values[pos], slope))
        object.__setattr__(self, "_i2", CubicHermiteSpline(tau, self.I2_values[pos], self.B1_values[pos]))

    @property
    def tau_max(self) -> float:
        return float(self.tau_grid[-1])

    @property
    def I1_inf(self) -> float:
        """``int_0^inf (1 - 2 B1(rho)) d tau``; finite because the integrand decays exponentially."""
        return float(self.I1_values[-1] + self.tail)

    def _piecewise(self, tau, neg, spline, beyond):
        tau = np.asarray(tau, dtype=float)
        mid = np.clip(tau, 0.0, self.tau_max)
        out = np.where(tau <= 0, neg(tau), np.where(tau > self.tau_max, beyond(tau), spline(mid)))
        return out if out.ndim else float(out)

    def rho_at(self, tau):
        return self._piecewise(tau, lambda s: s, self._rho, lambda s: np.full_like(s, self.rho0))

    def I1_at(self, tau):
        return self._piecewise(tau, lambda s: s, self._i1, lambda s: np.full_like(s, self.I1_inf))

    def I2_at(self, tau):
        end = float(self.I2_values[-1])
        return self._piecewise(tau, np.zeros_like, self._i2,
                               lambda s: end + 0.5 * (s - self.tau_max))

    def B1_of_tau(self, tau):
        b = np.asarray(self.switch.B1(self.rho_at(tau)))
        assert np.all(b >= -1e-12) and np.all(b <= 0.5 + 1e-12), "B1(rho(tau)) left [0, 1/2]"
        b = np.clip(b, 0.0, 0.5)
        return b if b.ndim else float(b)


def solve_rho(sw: SwitchTable | None = None, tau_max: float = TAU_MAX, step: float = TAU_STEP,
              tau_min: float = TAU_MIN, verify: bool = True) -> RhoTable:
    """Integrate ``rho' = 1 - 2 B1(rho)`` from ``rho(0) = 0`` with classical RK4.

    The running integrals ride along as extra components of the state, so
    they inherit the fourth-order accuracy of the main variable.
    """
    if step > 0.01:
        raise ValueError("step must not exceed 0.01")
    sw = sw or default_switch_table()
    tau, rho, i1, i2, bb = _rk4(sw, tau_max, step)
    if verify:
        _, rho_half, *_ = _rk4(sw, tau_max, 0.5 * step)
        if abs(rho_half[-1] - rho[-1]) > STEP_TOL:
            raise StepNotConverged(f"rho({tau_max}) moved by {abs(rho_half[-1] - rho[-1]):.3e} on halving")

    rate = 2.0 * float(sw.dB1(sw.rho0))
    tail = (1.0 - 2.0 * bb[-1]) / rate if rate > 0 else np.inf

    neg = -np.geomspace(-tau_min, step, 40) if tau_min < 0 else np.empty(0)
    zeros = np.zeros_like(neg)
    return RhoTable(
        tau_grid=np.concatenate([neg, tau]),
        rho_values=np.concatenate([neg, rho]),
        B1_values=np.concatenate([zeros, bb]),
        I1_values=np.concatenate([neg, i1]),
        I2_values=np.concatenate([zeros, i2]),
        rho0=sw.rho0,
        tail=float(tail),
        step=tau_max / (len(tau) - 1),
        switch=sw,
    )


def rho_at(table: RhoTable, tau):
    return table.rho_at(tau)


def B1_of_tau(table: RhoTable, tau):
    return table.B1_of_tau(tau)


@functools.lru_cache(maxsize=None)
def default_rho_table() -> RhoTable:
    return solve_rho()
