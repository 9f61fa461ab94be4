from .model import Infeasible, RoutingProblem, SolverTimeout
from .oracle import CoalitionOracle, CoalitionValue, characteristic_function, coalition_value, solve_problem
from .solution import Action, RoutingSolution
from .solver import SolverConfig
from .validate import validate_solution

__all__ = [
    "Action", "CoalitionOracle", "CoalitionValue", "Infeasible", "RoutingProblem", "RoutingSolution",
    "SolverConfig", "SolverTimeout", "characteristic_function", "coalition_value", "solve_problem",
    "validate_solution",
]
