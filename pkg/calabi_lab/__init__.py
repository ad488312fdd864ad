"""
Calabi Lab - numerical laboratory for the Calabi model end
Mode solvers, decay iteration and radial Monge-Ampere solves
"""

__version__ = "1.0.0"
