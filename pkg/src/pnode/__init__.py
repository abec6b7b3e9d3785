"""Probabilistic ODE/DAE solvers via square-root extended Kalman filtering."""

from .infoops import (
    EK0,
    EK1,
    InformationOperator,
    Joint,
    Partitioned,
    chainrule_operator,
    compose,
    dae_operator,
    invariant_operator,
    ode1_operator,
    ode2_operator,
)
from .prior import IWPModel, Projection, initial_state, iwp_transition, preconditioner
from .problems import (
    IVProblem,
    analytic_solution,
    first_order_transform,
    load_problem,
    reference_solution,
)
from .solver import (
    Solution,
    SolverConfig,
    default_scheme,
    sample,
    smooth,
    solve,
)
from .statespace import GaussianSqrt, condition, predict, smooth_pair, triangularize

__all__ = [
    "EK0",
    "EK1",
    "GaussianSqrt",
    "IVProblem",
    "IWPModel",
    "InformationOperator",
    "Joint",
    "Partitioned",
    "Projection",
    "Solution",
    "SolverConfig",
    "analytic_solution",
    "chainrule_operator",
    "compose",
    "condition",
    "dae_operator",
    "default_scheme",
    "first_order_transform",
    "initial_state",
    "invariant_operator",
    "iwp_transition",
    "load_problem",
    "ode1_operator",
    "ode2_operator",
    "preconditioner",
    "predict",
    "reference_solution",
    "sample",
    "smooth",
    "smooth_pair",
    "solve",
    "triangularize",
]
