"""Numerical lab for Hamilton-Jacobi equations with Neumann boundary conditions."""

__version__ = "0.1.0"
