"""Funnel-based feedback control of multi-agent systems under timed
reach/hold tasks over concave predicates, with an online three-stage
detection-and-repair scheme realized as a per-agent hybrid automaton.
"""
from .errors import (
    BadInitialError,
    DegenerateWindowError,
    DimensionMismatchError,
    FormulaSyntaxError,
    FunnelExit,
    InfeasibleTaskError,
    JumpStormError,
    NonConcaveNegationError,
    NonFiniteError,
    NonFiniteStateError,
    ParamMismatchError,
    ScenarioParseError,
    SelectorOutOfRangeError,
    StlppcError,
    TimeBoundOrderError,
    ValidationError,
    WindowNotCoveredError,
)
from .formulas import PhiFormula, PsiFormula, StateLayout, TaskFormula, participants
from .funnel import (
    ControllerConfig,
    FunnelParams,
    GammaParams,
    gamma_eval,
    post_sat_params,
    recompute_gamma,
    select_initial_params,
    solve_gamma,
    transform,
    transform_error,
    transform_inv,
)
from .parser import parse_task
from .robustness import (
    crisp_robustness,
    rho_opt,
    smooth_robustness,
    smooth_robustness_grad,
    trace_robustness,
)
from .scenario import Scenario, load_scenario, scenario_from_dict
from .sim import RunResult, SimConfig, Simulation, TrajectoryLog, step

__version__ = "0.1.0"
