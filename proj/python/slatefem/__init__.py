"""Python bindings for the slatefem solvers."""

from ._slatefem import SlatefemError, mesh_counts, run_compare, run_convergence

__all__ = ["SlatefemError", "mesh_counts", "run_compare", "run_convergence"]
