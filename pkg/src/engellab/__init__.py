"""Numerical laboratory for Engel structures.

Derived flags and Engel/contact tests, prolongation and contactification,
development maps, jet-level normal forms for Legendrian pairs, deformation
and Gray/Moser solvers, and a Zoll geodesic workbench.
"""

__version__ = "0.1.0"
