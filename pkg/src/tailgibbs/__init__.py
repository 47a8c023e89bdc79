"""Gibbs samplers for linear hierarchical models with heavy-tailed errors.

Centred, non-centred, partially centred, grouped and hybrid samplers, a
quadrature oracle for the conditional and marginal posteriors, empirical
stability diagnostics and a latent Gaussian process variant.
"""

from ._accel import USE_JIT
from .conditionals import SliceConfig, SliceError
from .diagnostics import DiagConfig, StabilityReport, classify, drift_ratio, increment_stationarity, \
    property_check, return_time
from .errors import ErrorDist, TailClass
from .kernels import ChainState, Trace, run_chain, step
from .latent_gp import LgpModel, MalaConfig, build_ar1_cov, mala_block_update, run_lgp_chain, theta_given_x
from .model import HierModel, Parametrisation, Stability, joint_log_density, theoretical_stability
from .oracle import QuadConfig, QuadratureError

__version__ = "0.1.0"

__all__ = [
    "USE_JIT", "ChainState", "DiagConfig", "ErrorDist", "HierModel", "LgpModel", "MalaConfig", "Parametrisation",
    "QuadConfig", "QuadratureError", "SliceConfig", "SliceError", "Stability", "StabilityReport", "TailClass",
    "Trace", "build_ar1_cov", "classify", "drift_ratio", "increment_stationarity", "joint_log_density",
    "mala_block_update", "property_check", "return_time", "run_chain", "run_lgp_chain", "step",
    "theoretical_stability", "theta_given_x",
]
