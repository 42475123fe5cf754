"""Complex dense linear algebra used by the detectors.

Orthonormal bases are plain ``(B, I)`` complex arrays with orthonormal
columns; projectors are ``(B, B)`` Hermitian arrays.  ``I = 0`` is a valid
rank and yields an empty ``(B, 0)`` basis.
"""

from __future__ import annotations

import numpy as np

from ._kernels import power_deflate
from .errors import DimensionError, SingularMatrixError

RANK_TOL = 1e-12


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def _as_basis(basis) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    if basis.ndim == 1:
        basis = basis[:, None]
    if basis.ndim != 2:
        raise DimensionError(f"basis must be 2-D, got shape {basis.shape}")
    if basis.shape[1] > basis.shape[0]:
        raise DimensionError(
            f"rank {basis.shape[1]} exceeds ambient dimension {basis.shape[0]}")
    return basis


def complement_projector(basis) -> np.ndarray:
    """Return ``I - U U^H``, the projector onto the orthogonal complement of col(U).

    >>> complement_projector(np.array([[1.0], [0.0], [0.0]])).real
    array([[0., 0., 0.],
           [0., 1., 0.],
           [0., 0., 1.]])
    """
    basis = _as_basis(basis)
    B = basis.shape[0]
    return np.eye(B, dtype=complex) - basis @ basis.conj().T


def apply_complement(basis: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Compute ``(I - U U^H) X`` with two thin products."""
    if basis.shape[1] == 0:
        return X.copy()
    return X - basis @ (basis.conj().T @ X)


def orthonormalize(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis for col(M) of a full-column-rank tall matrix."""
    M = np.asarray(M, dtype=complex)
    if M.shape[1] == 0:
        return np.zeros((M.shape[0], 0), dtype=complex)
    Q, R = np.linalg.qr(M)
    d = np.abs(np.diag(R))
    if d.min() <= RANK_TOL * d.max():
        raise SingularMatrixError("matrix is numerically rank deficient")
    return Q


def pseudo_inverse_tall(M: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse ``(M^H M)^{-1} M^H`` of a tall full-column-rank matrix."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise DimensionError(f"expected a tall matrix, got shape {M.shape}")
    s = np.linalg.svd(M, compute_uv=False)
    if s.size and (s[-1] <= RANK_TOL * s[0]):
        raise SingularMatrixError(
            f"rank-deficient input (sigma_min/sigma_max = {s[-1] / s[0]:.3e})")
    Mh = M.conj().T
    return np.linalg.solve(Mh @ M, Mh)


def projector_from_channel(J: np.ndarray) -> np.ndarray:
    """``I - J J^+`` for a tall full-column-rank jammer channel ``J``."""
    J = np.asarray(J, dtype=complex)
    return np.eye(J.shape[0], dtype=complex) - J @ pseudo_inverse_tall(J)


def approx_dominant_left_singvecs(M: np.ndarray, count: int,
                                  rng: np.random.Generator,
                                  iterations: int = 1,
                                  start: np.ndarray | None = None) -> np.ndarray:
    """Approximate the ``count`` dominant left-singular vectors of ``M``.

    Sequential deflation: for each dimension a random start vector receives
    ``iterations`` power steps ``v <- M (M^H v)``, is re-orthogonalized
    against the vectors already found and normalized, and the working copy
    of ``M`` is deflated by ``(I - v v^H)``.  With ``iterations=1`` this costs
    O(count * B * N).

    Parameters
    ----------
    M : (B, N) complex array
    count : int
        Number of vectors, ``0 <= count <= B``.
    rng : numpy Generator
        Source of the random start vectors (and of the fallback directions
        used when ``M`` has rank below ``count``).
    iterations : int
        Power iterations per dimension.
    start : (B, count) complex array, optional
        Start vectors (e.g. the previous estimate); random if omitted.

    Returns
    -------
    (B, count) complex array with orthonormal columns.
    """
    M = np.asarray(M, dtype=complex)
    B = M.shape[0]
    if count < 0 or count > B:
        raise DimensionError(f"count={count} not in [0, {B}]")
    if count == 0:
        return np.zeros((B, 0), dtype=complex)
    starts = crandn(rng, B, count) if start is None else np.asarray(start, dtype=complex)
    if starts.shape != (B, count):
        raise DimensionError(f"start shape {starts.shape} != ({B}, {count})")
    fallback = crandn(rng, B, count)
    return power_deflate(np.array(M, order="C"), np.ascontiguousarray(starts),
                         fallback, int(iterations))


def exact_dominant_left_singvecs(M: np.ndarray, count: int) -> np.ndarray:
    """Exact dominant left-singular subspace via a full SVD."""
    M = np.asarray(M, dtype=complex)
    if count < 0 or count > min(M.shape):
        raise DimensionError(f"count={count} exceeds min{M.shape}")
    U, _, _ = np.linalg.svd(M, full_matrices=False)
    return np.ascontiguousarray(U[:, :count])


def principal_angles(U1: np.ndarray, U2: np.ndarray) -> np.ndarray:
    """Principal angles (radians, ascending) between two orthonormal bases."""
    U1 = _as_basis(U1)
    U2 = _as_basis(U2)
    if U1.shape != U2.shape:
        raise DimensionError(f"basis shapes differ: {U1.shape} vs {U2.shape}")
    if U1.shape[1] == 0:
        return np.zeros(0)
    s = np.linalg.svd(U1.conj().T @ U2, compute_uv=False)
    return np.sort(np.arccos(np.clip(s, 0.0, 1.0)))
