"""Projection channels and the work they can yield.

The central map is rho -> sum_k P_k rho P_k for a complete family of mutually
orthogonal projectors. Removing coherences this way can extract work from a
heat bath at temperature T; the functions here compute the optimal average
work, the entropy-change lower bound that controls it, and the maximum work
at fixed average energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DimMismatchError,
    EnergyOutOfRangeError,
    NotUnitaryError,
    RankError,
    StateValidationError,
)
from .linalg import DEFAULT_TOL, as_matrix, hermitian_eig, hs_norm, is_unitary
from .states import (
    DensityMatrix,
    Hamiltonian,
    Temperature,
    average_energy,
    von_neumann_entropy,
)


class ProjectorSet:
    """Complete family of mutually orthogonal projectors {P_k}.

    Each member must be Hermitian and idempotent, distinct members must
    annihilate each other, and the family must sum to the identity, all within
    ``tol``. Rank-1 families (one per basis vector) are required by the
    entropy bound and the correlated-system machinery; general ranks appear as
    eigenprojectors of degenerate Hamiltonians.
    """

    __slots__ = ("projectors", "labels", "dim", "ranks")

    def __init__(self, projectors: Sequence, labels: Sequence | None = None,
                 tol: float = DEFAULT_TOL):
        mats = tuple(as_matrix(p) for p in projectors)
        if not mats:
            raise StateValidationError("ProjectorSet: needs at least one projector")
        d = mats[0].shape[0]
        for k, p in enumerate(mats):
            if p.shape != (d, d):
                raise StateValidationError(
                    f"ProjectorSet: projector {k} has shape {p.shape}, expected {(d, d)}"
                )
            if hs_norm(p - p.conj().T) > tol * max(1.0, hs_norm(p)):
                raise StateValidationError(f"ProjectorSet: projector {k} not Hermitian")
            if hs_norm(p @ p - p) > tol * max(1.0, hs_norm(p)):
                raise StateValidationError(f"ProjectorSet: projector {k} not idempotent")
        for k in range(len(mats)):
            for l in range(k + 1, len(mats)):
                if hs_norm(mats[k] @ mats[l]) > tol:
                    raise StateValidationError(
                        f"ProjectorSet: projectors {k} and {l} not orthogonal"
                    )
        total = sum(mats)
        if hs_norm(total - np.eye(d)) > tol * math.sqrt(d):
            raise StateValidationError("ProjectorSet: projectors do not sum to identity")
        mats = tuple(p.copy() for p in mats)
        for p in mats:
            p.setflags(write=False)
        self.projectors = mats
        self.labels = tuple(labels) if labels is not None else tuple(range(len(mats)))
        if len(self.labels) != len(mats):
            raise StateValidationError("ProjectorSet: labels length mismatch")
        self.dim = d
        self.ranks = tuple(int(round(np.trace(p).real)) for p in mats)

    @classmethod
    def from_basis(cls, basis, labels: Sequence | None = None,
                   tol: float = DEFAULT_TOL) -> "ProjectorSet":
        """Rank-1 projectors onto the columns of a unitary matrix."""
        u = as_matrix(basis)
        if not is_unitary(u, tol):
            raise NotUnitaryError("ProjectorSet.from_basis: basis matrix not unitary")
        cols = [u[:, k : k + 1] for k in range(u.shape[1])]
        return cls([c @ c.conj().T for c in cols], labels=labels, tol=tol)

    @property
    def is_rank_one(self) -> bool:
        return all(r == 1 for r in self.ranks)

    def require_rank_one(self):
        if not self.is_rank_one:
            raise RankError(f"projector set has ranks {self.ranks}, all must be 1")

    def basis_vectors(self) -> np.ndarray:
        """Columns phi_k with P_k = |phi_k><phi_k| (rank-1 sets only)."""
        self.require_rank_one()
        cols = []
        for p in self.projectors:
            dec = hermitian_eig(p)
            cols.append(dec.eigenvectors[:, -1])
        return np.column_stack(cols)

    def __len__(self):
        return len(self.projectors)

    def __repr__(self):
        return f"ProjectorSet(dim={self.dim}, ranks={self.ranks})"


def energy_projectors(h: Hamiltonian) -> ProjectorSet:
    """Eigenprojector family of a Hamiltonian, one member per clustered level."""
    return ProjectorSet(h.projectors, labels=tuple(float(e) for e in h.energies))


@dataclass(frozen=True)
class WorkReport:
    """Average energy bookkeeping of one process.

    Sign convention: positive ``work`` is drawn out of the system into the
    controlled energy sources; ``heat_absorbed`` flows from the bath into the
    system. The first law energy_change = heat_absorbed - work must hold to
    1e-10, which the constructor enforces.
    """

    work: float
    entropy_change: float
    energy_change: float
    heat_absorbed: float

    def __post_init__(self):
        gap = abs(self.energy_change - (self.heat_absorbed - self.work))
        if gap > 1e-10:
            raise ValueError(f"WorkReport violates the first law by {gap:.3e}")


def project(rho: DensityMatrix, p: ProjectorSet) -> DensityMatrix:
    """Unselective measurement channel: rho -> sum_k P_k rho P_k."""
    if rho.dim != p.dim:
        raise DimMismatchError(
            f"project: state dimension {rho.dim} != projector dimension {p.dim}"
        )
    out = np.zeros_like(rho.mat)
    for pk in p.projectors:
        out = out + pk @ rho.mat @ pk
    return DensityMatrix(out)


def optimal_projection_work(rho: DensityMatrix, h: Hamiltonian, p: ProjectorSet,
                            t: Temperature) -> WorkReport:
    """Optimal average work for realising the projection of rho thermally.

    W = dS / beta - dU, with dS the entropy gained by the projection and dU
    its average-energy change; the saturated second law fixes the absorbed
    heat at dS / beta. When the projectors are the eigenprojectors of ``h``
    the energy term vanishes and W reduces to T dS.
    """
    if rho.dim != h.dim or rho.dim != p.dim:
        raise DimMismatchError(
            f"optimal_projection_work: dimensions differ "
            f"(state {rho.dim}, H {h.dim}, projectors {p.dim})"
        )
    eta = project(rho, p)
    d_s = von_neumann_entropy(eta) - von_neumann_entropy(rho)
    d_u = average_energy(eta, h) - average_energy(rho, h)
    heat = d_s / t.beta
    return WorkReport(work=heat - d_u, entropy_change=d_s,
                      energy_change=d_u, heat_absorbed=heat)


def overlap_matrix(rho: DensityMatrix, p: ProjectorSet) -> np.ndarray:
    """Doubly stochastic overlap matrix M_kl = |<phi_k | l>|^2.

    Rows follow the projector family, columns the eigenbasis of rho in the
    deterministic ascending-eigenvalue order of ``hermitian_eig``. For a
    degenerate rho the bound below depends on this basis choice.
    """
    if rho.dim != p.dim:
        raise DimMismatchError(
            f"overlap_matrix: state dimension {rho.dim} != projector dimension {p.dim}"
        )
    phi = p.basis_vectors()
    return np.abs(phi.conj().T @ rho.eigenvectors) ** 2


def projection_angle_factor(m: np.ndarray) -> float:
    """Second-smallest eigenvalue of 1 - M^T M, clipped into [0, 1].

    Zero when M is a permutation (bases coincide), one for mutually unbiased
    bases. "Second smallest" is index 1 of the ascending spectrum, so a fully
    degenerate zero spectrum degrades the bound to zero rather than failing.
    """
    m = np.asarray(m, dtype=float)
    a = np.eye(m.shape[0]) - m.T @ m
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    return float(min(max(w[1], 0.0), 1.0))


def entropy_change_bound(rho: DensityMatrix, p: ProjectorSet) -> float:
    """Lower bound on the entropy gained by projecting rho in a rank-1 basis.

    bound = 1/2 ||rho - 1/d||_2^2 * dA, where dA is
    :func:`projection_angle_factor` of the overlap matrix between the
    projector basis and rho's eigenbasis. Always at most the actual entropy
    change. For a qubit this reduces to |s|^2 sin^2(theta) / 4 with s the
    Bloch vector and theta the angle between the bases.
    """
    m = overlap_matrix(rho, p)
    purity = hs_norm(rho.mat - np.eye(rho.dim) / rho.dim) ** 2
    return 0.5 * purity * projection_angle_factor(m)


def qubit_overlap_matrix(theta: float) -> np.ndarray:
    """Closed-form qubit overlap matrix for bases at angle theta."""
    c = math.cos(theta)
    return 0.5 * np.array([[1.0 + c, 1.0 - c], [1.0 - c, 1.0 + c]])


class MaxWorkResult(NamedTuple):
    lambda_star: float
    work: float


def _gibbs_probs(w: np.ndarray, lam: float) -> np.ndarray:
    x = -lam * w
    x = x - x.max()
    p = np.exp(x)
    return p / p.sum()


def _log_partition(w: np.ndarray, lam: float) -> float:
    x = -lam * w
    m = x.max()
    return float(m + math.log(np.exp(x - m).sum()))


def max_work_fixed_energy(rho: DensityMatrix, h: Hamiltonian,
                          t: Temperature) -> MaxWorkResult:
    """Maximum average work extractable at fixed average energy U = tr[rho H].

    The optimal final state is the Gibbs state sigma_lambda matching U; the
    matching lambda* is found by bracketed bisection of tr[sigma_lambda H] - U
    (monotone decreasing in lambda) down to |f| < 1e-12, and the work is
    (lambda* U + ln Z(lambda*) - S(rho)) / beta. For qubits sigma_lambda*
    coincides with the energy-basis projection of rho, so this equals the
    optimal projection work; in higher dimensions it is generally larger.
    """
    u = average_energy(rho, h)
    w = h.spectral.eigenvalues
    if not (w[0] < u < w[-1]):
        raise EnergyOutOfRangeError(
            f"average energy {u!r} not strictly inside the spectral interval "
            f"({w[0]!r}, {w[-1]!r})"
        )

    def f(lam: float) -> float:
        return float(_gibbs_probs(w, lam) @ w) - u

    scale = max(float(np.abs(w).max()), 1e-30)
    lo, hi = -64.0 / scale, 64.0 / scale
    # f is decreasing: f(-inf) = E_max - U > 0, f(+inf) = E_min - U < 0
    while f(lo) < 0.0:
        lo *= 2.0
    while f(hi) > 0.0:
        hi *= 2.0
    f_mid = math.inf
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) < 1e-12 or hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
    lam = mid
    work = (lam * u + _log_partition(w, lam) - von_neumann_entropy(rho)) / t.beta
    return MaxWorkResult(lambda_star=lam, work=work)
