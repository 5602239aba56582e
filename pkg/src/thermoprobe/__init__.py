"""Quantum thermometry with a uniformly moving two-level probe.

Modules
-------
rates       bath response: decay rate, mean excitation, Lamb shift
dynamics    closed-form evolved state and a master-equation ODE oracle
estimation  QFI (three routes), SLD, sigma_z Fisher information, (T, theta) QFI matrix
numerics    quadrature, finite differences, ODE stepping
scan        parameter sweeps, argmax refinement, figure presets
cli         command-line front end
"""

__version__ = "0.1.0"
