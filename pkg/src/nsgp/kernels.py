"""Stationary RBF kernel and the non-stationary Gibbs kernel.

The RBF amplitude multiplies the exponential directly (``k(x, x) = amplitude``),
while the Gibbs kernel carries ``sigma(x) * sigma(x')`` so its diagonal is
``sigma(x)**2``.  With constant scales the Gibbs gram therefore equals an RBF
gram of amplitude ``sigma**2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveParam


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    return X


def _positive(name, value):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)) or np.any(value <= 0):
        raise NonPositiveParam(f"{name} must be strictly positive and finite")
    return value


def sqdist(A, B) -> np.ndarray:
    """Pairwise squared Euclidean distances between the rows of ``A`` and ``B``."""
    A, B = _as_points(A), _as_points(B)
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@dataclass(frozen=True)
class RbfParams:
    lengthscale: float
    amplitude: float

    def __post_init__(self):
        _positive("lengthscale", self.lengthscale)
        _positive("amplitude", self.amplitude)


@dataclass(frozen=True)
class GibbsInputs:
    """Per-point Gibbs scales.

    ``lengthscale`` has shape (N,) for a shared scale or (N, D) for one scale
    per input dimension; ``amplitude`` has shape (N,).
    """

    lengthscale: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        ell = _positive("lengthscale", self.lengthscale)
        amp = _positive("amplitude", self.amplitude)
        if ell.ndim == 0:
            ell = ell.reshape(1)
        if amp.ndim == 0:
            amp = amp.reshape(1)
        if ell.shape[0] != amp.shape[0]:
            raise DimensionMismatch("lengthscale and amplitude must cover the same points")
        object.__setattr__(self, "lengthscale", ell)
        object.__setattr__(self, "amplitude", amp)

    def __len__(self):
        return self.amplitude.shape[0]

    def scales(self, dim: int) -> np.ndarray:
        """Length scales broadcast to shape (N, dim)."""
        ell = self.lengthscale
        if ell.ndim == 1:
            return np.repeat(ell[:, None], dim, axis=1)
        if ell.shape[1] not in (1, dim):
            raise DimensionMismatch(f"lengthscale has {ell.shape[1]} columns, inputs have {dim}")
        return np.broadcast_to(ell, (ell.shape[0], dim))


def rbf(x, x2, p: RbfParams) -> float:
    x, x2 = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(x2, float))
    if x.shape != x2.shape:
        raise DimensionMismatch("points must have equal dimension")
    r2 = float(np.sum((x - x2) ** 2))
    return p.amplitude * np.exp(-r2 / (2.0 * p.lengthscale**2))


def gibbs(x, x2, ell_x, ell_x2, sigma_x, sigma_x2) -> float:
    """Gibbs kernel value between two points.

    Scalar length scales are shared across dimensions; arrays give one scale
    per dimension, with the square-root prefactor taken per dimension.
    """
    x, x2 = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(x2, float))
    if x.shape != x2.shape:
        raise DimensionMismatch("points must have equal dimension")
    l1 = np.broadcast_to(_positive("ell_x", ell_x), x.shape)
    l2 = np.broadcast_to(_positive("ell_x2", ell_x2), x.shape)
    s1, s2 = _positive("sigma_x", sigma_x), _positive("sigma_x2", sigma_x2)
    denom = l1**2 + l2**2
    prefactor = np.prod(np.sqrt(2.0 * l1 * l2 / denom))
    return float(s1 * s2 * prefactor * np.exp(-np.sum((x - x2) ** 2 / denom)))


def rbf_cross(A, B, p: RbfParams) -> np.ndarray:
    return p.amplitude * np.exp(-sqdist(A, B) / (2.0 * p.lengthscale**2))


def gibbs_cross(A, B, inputs_a: GibbsInputs, inputs_b: GibbsInputs) -> np.ndarray:
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch("point sets have different dimensions")
    if len(inputs_a) != A.shape[0] or len(inputs_b) != B.shape[0]:
        raise DimensionMismatch("Gibbs inputs are not aligned with the points")
    dim = A.shape[1]
    la, lb = inputs_a.scales(dim), inputs_b.scales(dim)
    denom = la[:, None, :] ** 2 + lb[None, :, :] ** 2
    diff2 = (A[:, None, :] - B[None, :, :]) ** 2
    log_pref = 0.5 * np.sum(np.log(2.0 * la[:, None, :] * lb[None, :, :] / denom), axis=2)
    expo = np.sum(diff2 / denom, axis=2)
    amp = inputs_a.amplitude[:, None] * inputs_b.amplitude[None, :]
    return amp * np.exp(log_pref - expo)


def cross_gram(A, B, params, params_b=None) -> np.ndarray:
    """Rectangular kernel matrix between point sets ``A`` and ``B``.

    ``params`` is an :class:`RbfParams` or the :class:`GibbsInputs` at ``A``;
    for the Gibbs kernel ``params_b`` holds the inputs at ``B``.
    """
    if isinstance(params, RbfParams):
        return rbf_cross(A, B, params)
    if params_b is None:
        raise TypeError("Gibbs cross gram needs inputs for both point sets")
    return gibbs_cross(A, B, params, params_b)


def gram(points, params) -> np.ndarray:
    """Symmetric kernel matrix over ``points``."""
    if isinstance(params, RbfParams):
        K = rbf_cross(points, points, params)
    else:
        K = gibbs_cross(points, points, params, params)
    return 0.5 * (K + K.T)
