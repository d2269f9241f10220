"""Delta-shock formation in triangular systems of conservation laws.

The package builds continuous approximations ``(u_eps, v_eps)`` of
``u_t + f(u)_x = 0``, ``v_t + (v g(u))_x = 0`` through characteristics that
never cross, then measures the point mass that v develops once the
characteristics of u would have met.
"""

from .errors import DeltaShockError
from .interaction import RhoTable, default_rho_table, solve_rho
from .oracle import oracle_mass, oracle_u, oracle_v, oracle_x0_map
from .problem import (CATALOG, Problem, ProblemData, Profile, check_admissibility, derive_constants,
                      example12, flux_from_spec, quartic_instance)
from .switch import SwitchTable, build_switch_table, default_switch_table, make_mollifiers
from .uwave import FlowMap, UField, choose_A, flow_map, invert_map, u_eval
from .vtransport import BoundaryCurves, VField, backward_foot, classify_domain, rh_check, v_eval
from .weaklimit import TestFunction, delta_mass, pair, predicted_limit, residual_scaling

__version__ = "0.1.0"

__all__ = [
    "DeltaShockError", "RhoTable", "default_rho_table", "solve_rho", "oracle_mass", "oracle_u",
    "oracle_v", "oracle_x0_map", "CATALOG", "Problem", "ProblemData", "Profile",
    "check_admissibility", "derive_constants", "example12", "flux_from_spec", "quartic_instance",
    "SwitchTable", "build_switch_table", "default_switch_table", "make_mollifiers", "FlowMap",
    "UField", "choose_A", "flow_map", "invert_map", "u_eval", "BoundaryCurves", "VField",
    "backward_foot", "classify_domain", "rh_check", "v_eval", "TestFunction", "delta_mass", "pair",
    "predicted_limit", "residual_scaling",
]
