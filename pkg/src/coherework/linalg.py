"""Dense complex linear algebra kernel sized for dimensions up to ~64.

Everything here works on plain ``numpy`` arrays of ``complex128``; the rest of
the library layers physical meaning on top. All functions are pure and never
mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonHermitianError, NonSquareError

DEFAULT_TOL = 1e-10

# eigenvalues closer than this are treated as one degenerate cluster
CLUSTER_GAP = 1e-8


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-d complex array (no copy when already one)."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise NonSquareError(f"expected a 2-d array, got shape {m.shape}")
    return m


def hs_norm(a) -> float:
    """Hilbert-Schmidt norm sqrt(tr[A^dag A]) (the Frobenius norm)."""
    return float(np.linalg.norm(np.asarray(a)))


def kron(a, b) -> np.ndarray:
    """Kronecker product; output dimensions are the products of the inputs'."""
    return np.kron(as_matrix(a), as_matrix(b))


def is_hermitian(a, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(hs_norm(m), 1e-300)
    return hs_norm(m - m.conj().T) <= tol * scale


def is_unitary(a, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    d = m.shape[0]
    return hs_norm(m.conj().T @ m - np.eye(d)) <= tol * math.sqrt(d)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvector columns.

    Satisfies ``A @ V == V @ diag(w)`` and ``V^dag V == 1`` to 1e-10 relative
    accuracy for the decomposed matrix A.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Rebuild the original matrix as V diag(w) V^dag."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def hermitian_eig(a, tol: float = DEFAULT_TOL) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrised as (A + A^dag)/2 before factorisation, so the
    result is deterministic for identical inputs; within numerically degenerate
    clusters the eigenvector basis is whatever the underlying LAPACK routine
    returns, and callers must not rely on it beyond the spanned subspace.

    Raises ``NonSquareError`` on shape mismatch and ``NonHermitianError`` when
    ``||A - A^dag|| > tol * ||A||``.
    """
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise NonSquareError(f"matrix must be square, got shape {m.shape}")
    scale = max(hs_norm(m), 1e-300)
    defect = hs_norm(m - m.conj().T)
    if defect > tol * scale:
        raise NonHermitianError(
            f"matrix is not Hermitian: ||A - A^dag|| = {defect:.3e} "
            f"exceeds {tol:g} * ||A|| = {tol * scale:.3e}"
        )
    w, v = np.linalg.eigh((m + m.conj().T) / 2.0)
    return SpectralDecomposition(w, v)


def eigenvalue_clusters(values: np.ndarray, gap: float = CLUSTER_GAP) -> list[np.ndarray]:
    """Group an ascending eigenvalue array into degenerate clusters.

    A new cluster starts whenever the jump to the next eigenvalue exceeds
    ``gap``. Returns index arrays into ``values``.
    """
    n = len(values)
    if n == 0:
        return []
    clusters = []
    start = 0
    for i in range(1, n):
        if values[i] - values[i - 1] > gap:
            clusters.append(np.arange(start, i))
            start = i
    clusters.append(np.arange(start, n))
    return clusters
