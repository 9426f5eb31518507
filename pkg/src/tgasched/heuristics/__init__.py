from .dispatch import DispatchRule, dispatch_choice, dispatch_solve, priority_key
from .mtsp import InsertionRule, insertion_tour, kmeans, tours_to_solution, two_phase_solve
from .oracle import LimitExceededError, OracleLimits, brute_force, held_karp

__all__ = [
    "DispatchRule", "InsertionRule", "LimitExceededError", "OracleLimits", "brute_force", "dispatch_choice",
    "dispatch_solve", "held_karp", "insertion_tour", "kmeans", "priority_key", "tours_to_solution",
    "two_phase_solve",
]
