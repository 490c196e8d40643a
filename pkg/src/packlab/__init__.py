"""Bin packing by LP rounding with containers and partial colorings."""

from .instance import Instance, generate, parse_instance, read_instance
from .lp import solve_gg_lp
from .params import SolveParams
from .pipeline import BinSolution, solve_paper, verify

__all__ = ["Instance", "generate", "parse_instance", "read_instance", "solve_gg_lp",
           "SolveParams", "BinSolution", "solve_paper", "verify"]
