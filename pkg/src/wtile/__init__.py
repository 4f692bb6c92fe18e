"""Weighted tiling constructions: machines compiled to tiles, layered
simulations, exact solvers and fault audits."""

__version__ = "0.1.0"
