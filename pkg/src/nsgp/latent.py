"""Log-scale hyper-functions: learned constants or inducing-point latent GPs.

A latent GP stores whitened outputs ``gamma`` at the shared inducing inputs.
The log outputs there are ``mean + L @ gamma`` with ``L`` the Cholesky factor
of the jittered RBF gram, and predictions elsewhere use the GP conditional
mean given those outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import RbfParams, _as_points, rbf_cross
from .numerics import CholFactor, cholesky_psd, solve_upper

LATENT_JITTER = 1e-6

TAGS = ("ell", "sigma", "omega")


@dataclass(frozen=True)
class LatentConstant:
    """A hyper-function that is the same everywhere; ``value`` is on the log scale."""

    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("constant must be finite")


@dataclass(frozen=True)
class LatentGp:
    """Inducing-point GP over a log hyper-function.

    Attributes
    ----------
    mean : float
        Constant prior mean (log scale).
    lengthscale, amplitude : float
        RBF parameters of the latent GP.
    gamma : ndarray, shape (M, C)
        Whitened outputs; ``C`` is the number of output channels (one per
        input dimension for ARD length scales, otherwise one).
    """

    mean: float
    lengthscale: float
    amplitude: float
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim == 1:
            gamma = gamma[:, None]
        if gamma.shape[0] < 1 or not np.all(np.isfinite(gamma)):
            raise ValueError("gamma must be a finite (M, C) array with M >= 1")
        object.__setattr__(self, "gamma", gamma)
        RbfParams(self.lengthscale, self.amplitude)

    @property
    def rbf(self) -> RbfParams:
        return RbfParams(self.lengthscale, self.amplitude)

    @property
    def channels(self) -> int:
        return self.gamma.shape[1]

    def factor(self, inducing) -> CholFactor:
        """Cholesky factor of the RBF gram over ``inducing`` with relative jitter."""
        K = rbf_cross(inducing, inducing, self.rbf)
        return cholesky_psd(K, base_jitter=LATENT_JITTER * self.amplitude)


def latent_outputs(g: LatentGp, inducing, factor: CholFactor | None = None) -> np.ndarray:
    """Log outputs at the inducing inputs, shape (M, C)."""
    F = factor if factor is not None else g.factor(inducing)
    return g.mean + F.lower @ g.gamma


def predict_log(h, X, inducing=None, factor: CholFactor | None = None) -> np.ndarray:
    """Conditional-mean prediction of a log hyper-function, shape (N, C).

    For a :class:`LatentConstant` the result has a single column.
    """
    X = _as_points(X)
    if isinstance(h, LatentConstant):
        return np.full((X.shape[0], 1), float(h.value))
    inducing = _as_points(inducing)
    F = factor if factor is not None else h.factor(inducing)
    # K(X, Xbar) K^-1 (L gamma) = K(X, Xbar) L^-T gamma
    weights = solve_upper(F, h.gamma)
    return h.mean + rbf_cross(X, inducing, h.rbf) @ weights


def predict_value(h, X, inducing=None, factor: CholFactor | None = None) -> np.ndarray:
    return np.exp(predict_log(h, X, inducing, factor))
