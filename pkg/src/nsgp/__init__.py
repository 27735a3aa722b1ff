"""Non-stationary heteroscedastic Gaussian processes with latent hyper-functions."""

from .errors import NsgpError
from .kernels import GibbsInputs, RbfParams, cross_gram, gibbs, gram, rbf
from .latent import LatentConstant, LatentGp, latent_outputs, predict_log, predict_value
from .model import (
    ALL_VARIANTS,
    FULL,
    STATIONARY,
    NsgpModel,
    ParamVector,
    Prediction,
    Variant,
    load_model,
    pack,
    param_count,
    save_model,
    unpack,
)
from .numerics import CholFactor, cholesky_psd, logdet, solve_chol
from .train import AdamState, FitReport, adam_step, fit, gradient, init, value_and_grad

__version__ = "0.1.0"
