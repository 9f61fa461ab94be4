"""Coalition economics for EV fleet aggregators sharing vehicles, chargers and a distribution feeder."""

from .bench import AumannModel, BenchmarkResult, Sampled, run_aggregator_aware, run_aggregator_blind
from .game import (
    Allocation,
    CharacteristicFunction,
    CorePolytope,
    core_feasible,
    core_max_costs,
    core_vertices,
    in_core,
    parse_cfn,
    shapley,
)
from .grid import GridState, max_charging_headroom, solve_lindistflow
from .routing import (
    CoalitionOracle,
    Infeasible,
    RoutingSolution,
    SolverConfig,
    SolverTimeout,
    characteristic_function,
    coalition_value,
)
from .scenario import Coalition, Scenario, ScenarioError, coalition_iter, validate_scenario
from .scenario_io import load_scenario, save_scenario

__all__ = [
    "Allocation", "AumannModel", "BenchmarkResult", "CharacteristicFunction", "Coalition", "CoalitionOracle",
    "CorePolytope", "GridState", "Infeasible", "RoutingSolution", "Sampled", "Scenario", "ScenarioError",
    "SolverConfig", "SolverTimeout", "characteristic_function", "coalition_iter", "coalition_value", "core_feasible", "core_max_costs",
    "core_vertices", "in_core", "load_scenario", "max_charging_headroom", "parse_cfn", "run_aggregator_aware",
    "run_aggregator_blind", "save_scenario", "shapley", "solve_lindistflow", "validate_scenario",
]
