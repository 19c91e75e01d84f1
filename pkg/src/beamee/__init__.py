"""Energy-efficient beam-domain power allocation for massive MIMO downlink.

Statistical CSI only: each user is described by its eigenmode coupling
matrix, ergodic rates come from a deterministic equivalent, and the power
allocation is found by MM around Dinkelbach / water-filling subproblems.
"""

from .de import (DEState, de_ee, de_fixed_point, de_gradient_cross, de_gradient_own, de_net_rates,
                 de_rate_plus, de_states)
from .mc import McEstimate, Prop1Report, mc_ee, mc_net_rate, mc_rate_plus, prop1_validate
from .model import (BeamEEError, ChannelStats, DimensionMismatch, EmptyUser, NegativeEntry,
                    NoConvergence, NonFiniteEntry, NumericalFailure, PowerAllocation, PowerModel,
                    SolverConfig, UserStats, ValidationError, ZeroCouplingRowAll, dbm_to_watts,
                    validate, watts_to_dbm)
from .ops import all_deltas, delta_k, kbar, pi_op, rate_minus, xi_op
from .oracle import InstanceTooLarge, grid_search_ee, pg_solve_f6
from .solver import (MMRecord, SolveTrace, auxiliary_power_curve, solve_ee_lowcomplexity,
                     solve_ee_reference, solve_sumrate)
from .synth import InvalidSpec, ParseError, ScenarioSpec, generate, load, load_alloc, load_stats, save
from .wf import ee_waterfill, sr_waterfill

__version__ = "0.1.0"

__all__ = [
    "BeamEEError", "ChannelStats", "DEState", "DimensionMismatch", "EmptyUser", "InstanceTooLarge",
    "InvalidSpec", "MMRecord", "McEstimate", "NegativeEntry", "NoConvergence", "NonFiniteEntry",
    "NumericalFailure", "ParseError", "PowerAllocation", "PowerModel", "Prop1Report", "ScenarioSpec",
    "SolveTrace", "SolverConfig", "UserStats", "ValidationError", "ZeroCouplingRowAll",
    "all_deltas", "auxiliary_power_curve", "dbm_to_watts", "de_ee", "de_fixed_point",
    "de_gradient_cross", "de_gradient_own", "de_net_rates", "de_rate_plus", "de_states", "delta_k",
    "ee_waterfill", "generate", "grid_search_ee", "kbar", "load", "load_alloc", "load_stats",
    "mc_ee", "mc_net_rate", "mc_rate_plus", "pg_solve_f6", "pi_op", "prop1_validate", "rate_minus",
    "save", "solve_ee_lowcomplexity", "solve_ee_reference", "solve_sumrate", "sr_waterfill",
    "validate", "watts_to_dbm", "xi_op",
]
