"""Fractional Laplacians, Riesz potentials, Green functions and sharp exponential-integrability tools."""

from .constants import (RieszKernel, SharpConstants, gamma_fn, kernel_constant,
                        riesz_convolution_coefficient, sharp_constants, sphere_measure)
from .errors import ConfigurationError, DomainError, FracAdamsError, SolverError, UsageError
from .grid import Domain, Grid, GridFunction, make_ball_domain, smooth_bump
from .lorentz import LorentzParams, lorentz_norm

__version__ = "0.1.0"

__all__ = [
    "RieszKernel", "SharpConstants", "gamma_fn", "kernel_constant", "riesz_convolution_coefficient",
    "sharp_constants", "sphere_measure", "ConfigurationError", "DomainError", "FracAdamsError",
    "SolverError", "UsageError", "Domain", "Grid", "GridFunction", "make_ball_domain",
    "smooth_bump", "LorentzParams", "lorentz_norm",
]
