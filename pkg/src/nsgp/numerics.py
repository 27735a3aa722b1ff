"""Dense SPD linear algebra: jittered Cholesky, triangular solves, log-determinants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular

from .errors import DimensionMismatch, NonSymmetric, NotPositiveDefinite

DEFAULT_JITTER = 1e-6


@dataclass(frozen=True)
class CholFactor:
    """Lower Cholesky factor of ``A + jitter_used * I``."""

    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def size(self) -> int:
        return self.lower.shape[0]


def _check_symmetric(A: np.ndarray, rtol: float = 1e-10) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > rtol * scale:
        raise NonSymmetric("matrix is not symmetric within tolerance")


def cholesky_psd(A, base_jitter: float = DEFAULT_JITTER, max_jitter_ratio: float = 1e-2) -> CholFactor:
    """Cholesky factorization with escalating diagonal jitter.

    The first attempt adds ``base_jitter``; every retry multiplies the jitter by
    ten until it exceeds ``max_jitter_ratio * mean(diag(A))``.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix.
    base_jitter : float
        Jitter for the first attempt. Zero means "try the bare matrix first";
        retries then start at ``1e-10 * mean(diag(A))``.

    Raises
    ------
    NonSymmetric
        If ``A`` is not square and symmetric.
    NotPositiveDefinite
        If no jitter below the cap makes ``A`` factorizable.
    """
    A = np.asarray(A, dtype=float)
    _check_symmetric(A)
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    n = A.shape[0]
    scale = float(np.mean(np.diag(A))) if n else 1.0
    cap = max_jitter_ratio * max(scale, 0.0)
    jitter = float(base_jitter)
    eye = np.eye(n)
    while True:
        try:
            lower = np.linalg.cholesky(A + jitter * eye if jitter else A)
            return CholFactor(lower, jitter)
        except np.linalg.LinAlgError:
            pass
        jitter = jitter * 10.0 if jitter > 0 else 1e-10 * scale
        if not jitter > 0 or jitter > cap:
            raise NotPositiveDefinite(
                f"factorization failed with jitter up to {cap:.3g} (mean diagonal {scale:.3g})"
            )


def solve_chol(F: CholFactor, B) -> np.ndarray:
    """Solve ``(A + jitter I) X = B`` given the factor of ``A``."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.size:
        raise DimensionMismatch(f"factor is {F.size}x{F.size}, right-hand side has {B.shape[0]} rows")
    return cho_solve((F.lower, True), B, check_finite=False)


def solve_lower(F: CholFactor, B) -> np.ndarray:
    """Solve ``L X = B`` by forward substitution."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.size:
        raise DimensionMismatch(f"factor is {F.size}x{F.size}, right-hand side has {B.shape[0]} rows")
    return solve_triangular(F.lower, B, lower=True, check_finite=False)


def solve_upper(F: CholFactor, B) -> np.ndarray:
    """Solve ``L^T X = B`` by back substitution."""
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.size:
        raise DimensionMismatch(f"factor is {F.size}x{F.size}, right-hand side has {B.shape[0]} rows")
    return solve_triangular(F.lower, B, lower=True, trans="T", check_finite=False)


def chol_inverse(F: CholFactor) -> np.ndarray:
    """Dense ``(A + jitter I)^-1`` from its factor."""
    inv, info = lapack.dpotri(F.lower, lower=1)
    if info != 0:
        raise NotPositiveDefinite(f"potri failed with info={info}")
    # potri fills the lower triangle only; the upper triangle of L is zero
    out = inv + inv.T
    out.flat[:: out.shape[0] + 1] *= 0.5
    return out


def logdet(F: CholFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(F.lower))))


def chol_backward(F: CholFactor, lower_bar: np.ndarray) -> np.ndarray:
    """Reverse-mode sensitivity of ``L = chol(A)``.

    Maps the adjoint of the lower factor to the symmetric adjoint of ``A``
    such that ``sum(A_bar * dA) == sum(L_bar * dL)`` for symmetric ``dA``.
    """
    L = F.lower
    P = np.tril(L.T @ np.tril(lower_bar))
    P[np.diag_indices_from(P)] *= 0.5
    S = solve_triangular(L, P.T, lower=True, trans="T", check_finite=False)
    S = solve_triangular(L, S.T, lower=True, trans="T", check_finite=False)
    return 0.5 * (S + S.T)
