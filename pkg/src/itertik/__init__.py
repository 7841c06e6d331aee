"""Iterated weighted and fractional Tikhonov regularization on SVD spectra."""
from .filters import FilterSpec, filter_gain, filter_solve, filter_value, one_minus_filter
from .iterate import ParamSchedule, run_iteration
from .problems import make_problem
from .spectral import SpectralOperator, decompose
from .stopping import NoiseModel, StopRule, add_noise

__version__ = "0.1.0"
