"""Small dense complex linear algebra shared by the other modules.

Matrices are plain ``numpy`` arrays. Vectorization is row-major everywhere:
``vec([[a, b], [c, d]]) == (a, b, c, d)``, which is what ``ndarray.ravel``
gives for C-ordered input. Bitstring reshaping relies on the same order.
"""

from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian, NotPSD

ATOL = 1e-10


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def kron(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.size == 0 or b.size == 0:
        raise DimensionMismatch("kron of an empty matrix")
    return np.kron(a, b)


def vec(a) -> np.ndarray:
    """Row-major flattening of a matrix into a vector."""
    return np.ascontiguousarray(np.asarray(a)).ravel(order="C")


def unvec(v, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    v = np.asarray(v)
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape length {v.size} to {rows}x{cols}")
    return v.reshape(rows, cols, order="C")


def dagger(a) -> np.ndarray:
    return np.conjugate(np.asarray(a)).T


def is_hermitian(a, atol: float = ATOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.allclose(a, dagger(a), rtol=0, atol=atol)


def hermitian_eig(a, atol: float = ATOL) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    Raises
    ------
    NotHermitian
        If ``a`` is not square or deviates from its adjoint by more than
        ``atol`` in any entry.
    NoConvergence
        If the LAPACK driver fails to converge.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NotHermitian(f"matrix is not square: {a.shape}")
    asym = np.max(np.abs(a - dagger(a))) if a.size else 0.0
    if asym > atol:
        raise NotHermitian(f"asymmetry {asym:.3e} exceeds {atol:.1e}")
    try:
        w, v = np.linalg.eigh(0.5 * (a + dagger(a)))
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return HermitianEig(w, v)


def clip_eigenvalues(w, atol: float = ATOL) -> np.ndarray:
    if np.any(w < -atol):
        raise NotPSD(f"eigenvalue {w.min():.3e} below -{atol:.1e}")
    return np.clip(w, 0.0, None)


def matrix_sqrt_psd(a, atol: float = ATOL) -> np.ndarray:
    """Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues in ``[-atol, 0)`` are treated as numerical noise and set to
    zero; anything more negative raises :class:`NotPSD`.
    """
    w, v = hermitian_eig(a, atol=atol)
    w = clip_eigenvalues(w, atol=atol)
    return (v * np.sqrt(w)) @ dagger(v)
