"""Stable and mixed stable heat kernels under gradient (drift) perturbations."""
from .conditions import ControlPair, Rate, TabulatedF, estimate_class_P, kato_functional
from .drift import DriftField
from .kernel import KernelParams, SpaceTimeArg, eval_density, eval_gradient
from .quadrature import GridSpec
from .series import series_sum, series_term

__version__ = "0.1.0"

__all__ = ["ControlPair", "Rate", "TabulatedF", "estimate_class_P", "kato_functional", "DriftField",
           "KernelParams", "SpaceTimeArg", "eval_density", "eval_gradient", "GridSpec", "series_sum",
           "series_term", "__version__"]
