"""Conic programs and a self-contained interior-point solver."""
from .kkt import check_kkt
from .program import Cone, ConicProgram, ConicSolution
from .solver import solve

__all__ = ["Cone", "ConicProgram", "ConicSolution", "solve", "check_kkt"]
