"""Dense complex linear-algebra kernels with explicit accuracy contracts.

LAPACK (through numpy/scipy) does the factorizations; this module adds the
input validation, Hermitian symmetrization, deterministic descending order
and unit-norm eigenvectors the rest of the package relies on.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (DimensionMismatch, NonFinite, NonSquare, NotHermitian,
                     NotPositiveDefinite)

HERMITIAN_RTOL = 1e-10

__all__ = [
    "HermitianEigenResult",
    "GeneralizedEigenResult",
    "hermitian_eig",
    "generalized_eig",
    "cholesky",
    "logdet_hpd",
    "symmetrize",
]


@dataclass(frozen=True)
class HermitianEigenResult:
    eigenvalues: np.ndarray
    """Real eigenvalues, sorted descending."""
    eigenvectors: np.ndarray
    """Unitary matrix whose columns align with ``eigenvalues``."""


@dataclass(frozen=True)
class GeneralizedEigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    """Unit-norm columns ``t_k`` with ``A t_k = lambda_k B t_k``."""


def _square(a, name="A"):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] == 0:
        raise NonSquare(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return a.astype(np.complex128, copy=False)


def symmetrize(a, name="A"):
    """Return ``(A + A^H)/2`` after checking ``A`` is Hermitian to 1e-10 relative.

    Works on a single matrix or a stack of matrices (last two axes).
    """
    a = _square(a, name)
    ah = np.swapaxes(a, -1, -2).conj()
    asym = np.linalg.norm(a - ah, axis=(-2, -1))
    scale = np.linalg.norm(a, axis=(-2, -1))
    if np.any(asym > HERMITIAN_RTOL * scale):
        raise NotHermitian(
            f"{name} is not Hermitian: max asymmetry {np.max(asym):.3e} vs norm {np.max(scale):.3e}")
    return 0.5 * (a + ah)


def _sort_descending(w, v):
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def hermitian_eig(a):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    a = symmetrize(a)
    if a.ndim != 2:
        raise NonSquare("hermitian_eig expects a single matrix")
    w, v = np.linalg.eigh(a)
    w, v = _sort_descending(w, v)
    return HermitianEigenResult(eigenvalues=w, eigenvectors=v)


def cholesky(a):
    """Lower Cholesky factor ``L`` with ``L L^H = A`` and a real positive diagonal."""
    a = symmetrize(a)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    diag = np.diagonal(chol, axis1=-2, axis2=-1).real
    if np.any(diag <= 0) or not np.all(np.isfinite(chol)):
        raise NotPositiveDefinite("non-positive pivot in Cholesky factorization")
    return chol


def generalized_eig(a, b):
    """Solve ``A t = lambda B t`` for Hermitian ``A`` and Hermitian positive-definite ``B``.

    Reduces to the standard problem ``L^{-1} A L^{-H} v = lambda v`` with
    ``B = L L^H`` and back-transforms ``t = L^{-H} v``. Eigenvectors are
    returned with unit Euclidean norm.
    """
    a = symmetrize(a, "A")
    b = _square(b, "B")
    if a.ndim != 2 or a.shape != b.shape:
        raise DimensionMismatch(f"A {a.shape} and B {b.shape} must be equal-size square matrices")
    chol = cholesky(b)
    half = solve_triangular(chol, a, lower=True)
    reduced = solve_triangular(chol, half.conj().T, lower=True).conj().T
    reduced = 0.5 * (reduced + reduced.conj().T)
    w, v = np.linalg.eigh(reduced)
    t = solve_triangular(chol.conj().T, v, lower=False)
    t = t / np.linalg.norm(t, axis=0, keepdims=True)
    w, t = _sort_descending(w, t)
    return GeneralizedEigenResult(eigenvalues=w, eigenvectors=t)


def logdet_hpd(a):
    """Natural log-determinant of a Hermitian positive-definite matrix.

    Accepts a stack of matrices and returns one value per matrix.
    """
    chol = cholesky(a)
    diag = np.diagonal(chol, axis1=-2, axis2=-1).real
    return 2.0 * np.sum(np.log(diag), axis=-1)
