"""Closed-form reference for the Burgers / ``g = 2u`` instance.

Data: ``u0(x) = -x`` and ``v0(x) = |x|^(2/3)`` on ``[-1, 1]``, ``u = 1`` and
``v = 1`` to the left, ``u = -1`` and ``v = 1`` to the right.  The classical
solution exists for ``t < 1``; at ``t = 1`` the whole fan collapses into
``x = 0`` and a point mass of size ``4t - 0.8`` sits there afterwards.

All functions are vectorized in ``x``.
"""

from __future__ import annotations

import numpy as np

from .errors import OutOfValidity

U_LEFT, U_RIGHT = 1.0, -1.0
V_LEFT, V_RIGHT = 1.0, 1.0
TSTAR = 1.0
MASS_RATE = 4.0
V0_INTEGRAL = 1.2  # integral of |x|^(2/3) over [-1, 1]


def _check_field_time(t: float) -> None:
    if not 0.0 <= t < TSTAR:
        raise OutOfValidity(f"closed-form fields hold for 0 <= t < 1, got t={t}")


def _out(x):
    return x if np.ndim(x) else float(x)


def oracle_u(x, t: float):
    """Rarefaction-free compression fan: 1, then ``x/(t-1)``, then -1."""
    _check_field_time(t)
    x = np.asarray(x, dtype=float)
    s = 1.0 - t
    return _out(np.where(x < -s, U_LEFT, np.where(x >= s, U_RIGHT, x / (t - 1.0))))


def oracle_x0_map(x, t: float):
    """Foot at time 0 of the ``g``-characteristic through ``(x, t)``."""
    _check_field_time(t)
    x = np.asarray(x, dtype=float)
    s = 1.0 - t
    s2 = s * s
    safe = np.where(x == 0.0, 1.0, x)
    return _out(np.select(
        [x <= -s, x <= -s2, x < s2, x < s],
        [x - 2.0 * t, -2.0 - s2 / safe, x / s2, 2.0 - s2 / safe],
        default=x + 2.0 * t,
    ))


def oracle_v(x, t: float):
    """Five-piece density: plateau, ``s^2/x^2``, ``|x|^(2/3)/s^(10/3)``, ``s^2/x^2``, plateau."""
    _check_field_time(t)
    x = np.asarray(x, dtype=float)
    s = 1.0 - t
    s2 = s * s
    safe = np.where(x == 0.0, 1.0, x)
    side = s2 / safe**2
    middle = np.cbrt(x * x) / s ** (10.0 / 3.0)
    return _out(np.select(
        [x <= -s, x <= -s2, x < s2, x < s],
        [V_LEFT, side, middle, side],
        default=V_RIGHT,
    ))


def oracle_mass(t: float) -> float:
    """Point mass at ``x = 0`` for ``t >= 1``."""
    if t < TSTAR:
        raise OutOfValidity(f"the point mass exists for t >= 1, got t={t}")
    # plateau mass swept in from both sides plus the initial fan content
    return V_LEFT * (2.0 * t - 1.0) + V_RIGHT * (2.0 * t - 1.0) + V0_INTEGRAL


def oracle_curves(t: float) -> dict:
    """Fan edges and the two ``g``-characteristics from the interval ends."""
    _check_field_time(t)
    s = 1.0 - t
    return {"phi2": -s, "phi2_star": -s * s, "phi1_star": s * s, "phi1": s}
