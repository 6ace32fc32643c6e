"""Simulation lab for online packet scheduling with deadlines."""
from .assignment import AssignmentProblem, AssignmentSolution, offline_optimum, solve, solve_bruteforce
from .model import Buffer, ConfigError, Instance, Packet, RunResult, SimulationError
from .policies import GOLDEN, PolicySpec
from .sim import run
from .workload import GenConfig, generate, generate_agreeable, scenario1

__all__ = [
    "AssignmentProblem", "AssignmentSolution", "Buffer", "ConfigError", "GOLDEN", "GenConfig",
    "Instance", "Packet", "PolicySpec", "RunResult", "SimulationError", "generate",
    "generate_agreeable", "offline_optimum", "run", "scenario1", "solve", "solve_bruteforce",
]
