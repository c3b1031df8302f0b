"""Gaussian domination and correlation bounds for spin O(N) models on finite graphs."""

from .analyzer import GDReport, HessianForm, audit_gde, exact_hessian, gd_verdict, gde_lower_bound, mc_hessian
from .errors import SpinLabError
from .graphs import Graph, generate, greens_function, load_graph, renormalized_green
from .mc import ChainConfig, run_chain, run_replicas

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "GDReport",
    "Graph",
    "HessianForm",
    "SpinLabError",
    "audit_gde",
    "exact_hessian",
    "gd_verdict",
    "gde_lower_bound",
    "generate",
    "greens_function",
    "load_graph",
    "mc_hessian",
    "renormalized_green",
    "run_chain",
    "run_replicas",
]
