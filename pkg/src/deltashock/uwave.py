"""New characteristics for u and the resulting continuous approximation u_eps.

A label ``x0`` in ``[a2, a1]`` starts at ``x0 + eps A (x0 - (a1 + a2)/2)`` and
moves with speed ``(B2 - B1) f'(u0(x0)) + c B1``.  The speed is affine in
``x0`` so the whole flow is the affine map ``x = beta x0 + alpha`` on the fan
plus two translations for the plateaus.  Its coefficients only need the
time integrals of ``B2 - B1`` and ``B1``, which the rho table already holds.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import JacobianNonPositive
from .interaction import RhoTable, default_rho_table
from .problem import Problem

A_SAFETY = 2.0


def choose_A(problem: Problem, rho: RhoTable) -> float:
    """Initial spreading constant keeping ``dx/dx0`` positive for all time."""
    k = problem.consts
    return A_SAFETY * 2.0 * k.K * rho.I1_inf / k.dspan


@dataclass(frozen=True)
class FlowMap:
    """Piecewise-affine label-to-position map at a fixed ``(t, eps)``."""

    t: float
    eps: float
    A: float
    beta: float
    alpha: float
    left_shift: float
    right_shift: float
    a2: float
    a1: float

    @property
    def phi1(self) -> float:
        return self.beta * self.a1 + self.alpha

    @property
    def phi2(self) -> float:
        return self.beta * self.a2 + self.alpha

    def forward(self, x0):
        x0 = np.asarray(x0, dtype=float)
        out = np.where(x0 < self.a2, x0 + self.left_shift,
                       np.where(x0 > self.a1, x0 + self.right_shift, self.beta * x0 + self.alpha))
        return out if out.ndim else float(out)

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.phi2, x - self.left_shift,
                       np.where(x > self.phi1, x - self.right_shift, (x - self.alpha) / self.beta))
        return out if out.ndim else float(out)


class Kinematics:
    """Vectorized fan coefficients for one ``eps``; ``t`` may be an array."""

    def __init__(self, problem: Problem, rho: RhoTable, eps: float, A: float):
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        self.problem = problem
        self.rho = rho
        self.eps = float(eps)
        self.A = float(A)
        k, d = problem.consts, problem.data
        self._tau0 = float(k.psi0(0.0)) / self.eps
        self._i1_0 = float(rho.I1_at(self._tau0))
        self._i2_0 = float(rho.I2_at(self._tau0))
        self._half = 0.5 * self.eps * self.A * (d.a1 - d.a2)
        self._mid = 0.5 * (d.a1 + d.a2)
        self._memo: dict[float, tuple] = {}

    def tau(self, t):
        return self.problem.consts.psi0(t) / self.eps

    def integrals(self, t):
        """``int_0^t (B2 - B1) ds`` and ``int_0^t B1 ds``."""
        tau = self.tau(t)
        scale = self.eps / self.problem.consts.dspan
        j1 = scale * (self.rho.I1_at(tau) - self._i1_0)
        j2 = scale * (self.rho.I2_at(tau) - self._i2_0)
        return j1, j2

    def coefficients(self, t):
        """``(beta, alpha, left_shift, right_shift)``; scalar times are memoized."""
        if np.ndim(t) == 0:
            key = float(t)
            hit = self._memo.get(key)
            if hit is None:
                if len(self._memo) > 200_000:
                    self._memo.clear()
                hit = self._memo[key] = tuple(float(v) for v in self._coefficients(key))
            return hit
        return self._coefficients(t)

    def _coefficients(self, t):
        k = self.problem.consts
        j1, j2 = self.integrals(t)
        beta = 1.0 + self.eps * self.A - k.K * j1
        alpha = -self.eps * self.A * self._mid + k.b * j1 + k.c * j2
        left = -self._half + k.df1 * j1 + k.c * j2
        right = self._half + k.df0 * j1 + k.c * j2
        return beta, alpha, left, right

    def edges(self, t):
        beta, alpha, _, _ = self.coefficients(t)
        d = self.problem.data
        return beta * d.a2 + alpha, beta * d.a1 + alpha

    def flow_map(self, t: float) -> FlowMap:
        if t < 0:
            raise ValueError("t must be non-negative")
        beta, alpha, left, right = (float(v) for v in self.coefficients(t))
        if beta <= 0:
            raise JacobianNonPositive(f"dx/dx0 = {beta:.3e} at t={t}, eps={self.eps}; increase A")
        d = self.problem.data
        return FlowMap(float(t), self.eps, self.A, beta, alpha, left, right, d.a2, d.a1)

    def _fan(self, X, s):
        beta, alpha, _, _ = self.coefficients(s)
        d = self.problem.data
        phi2 = beta * d.a2 + alpha
        phi1 = beta * d.a1 + alpha
        x0 = np.clip((X - alpha) / beta, d.a2, d.a1)
        return x0, beta, phi2, phi1

    def side(self, X, s):
        """-1 left of the fan, 0 on it, +1 right of it."""
        _, _, phi2, phi1 = self._fan(X, s)
        return np.where(X < phi2, -1, np.where(X > phi1, 1, 0))

    def u(self, X, s):
        x0, _, phi2, phi1 = self._fan(X, s)
        d = self.problem.data
        return np.where(X < phi2, d.U1, np.where(X > phi1, d.U0, self.problem.u0(x0)))

    def u_and_ux(self, X, s):
        x0, beta, phi2, phi1 = self._fan(X, s)
        d = self.problem.data
        inner = self.problem.u0(x0)
        on_fan = (X >= phi2) & (X <= phi1)
        u = np.where(X < phi2, d.U1, np.where(X > phi1, d.U0, inner))
        ux = np.where(on_fan, self.problem.du0(inner) / beta, 0.0)
        return u, ux


class UField:
    """u_eps for every ``(x, t, eps)``; flow maps are cached per ``(t, eps)``."""

    def __init__(self, problem: Problem, rho: RhoTable | None = None, A: float | None = None):
        self.problem = problem
        self.rho = rho or default_rho_table()
        self.A = A if A is not None else (problem.data.A or choose_A(problem, self.rho))
        self._kin: dict[float, Kinematics] = {}
        self._maps: dict[tuple, FlowMap] = {}
        self._lock = threading.Lock()

    def kinematics(self, eps: float) -> Kinematics:
        with self._lock:
            kin = self._kin.get(eps)
            if kin is None:
                kin = self._kin[eps] = Kinematics(self.problem, self.rho, eps, self.A)
            return kin

    def flow_map(self, t: float, eps: float) -> FlowMap:
        key = (float(t), float(eps))
        with self._lock:
            fm = self._maps.get(key)
        if fm is None:
            fm = self.kinematics(eps).flow_map(t)
            with self._lock:
                fm = self._maps.setdefault(key, fm)
        return fm

    def __call__(self, x, t, eps, form="composition"):
        return u_eval(self, x, t, eps, form)


def flow_map(problem: Problem, rho: RhoTable, t: float, eps: float, A: float) -> FlowMap:
    return Kinematics(problem, rho, eps, A).flow_map(t)


def invert_map(fm: FlowMap, x):
    return fm.inverse(x)


def u_eval(field: UField, x, t, eps, form: str = "composition"):
    """Evaluate u_eps by composing the initial datum with the inverse flow.

    ``form="mollified"`` rebuilds the field from the two smoothed jumps at the
    fan edges instead; it is kept for cross-validation.
    """
    fm = field.flow_map(t, eps)
    x = np.asarray(x, dtype=float)
    x0 = fm.inverse(x)
    problem = field.problem
    if form == "composition":
        out = problem.uhat(x0)
    elif form == "mollified":
        from .switch import make_mollifiers

        m = make_mollifiers()
        d = problem.data
        u1 = problem.u0(np.clip(x0, d.a2, d.a1))
        out = (d.U0 + (u1 - d.U0) * m.omega1((fm.phi1 - x) / eps)
               + (d.U1 - u1) * m.omega2((fm.phi2 - x) / eps))
    else:
        raise ValueError(f"unknown form {form!r}")
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)
