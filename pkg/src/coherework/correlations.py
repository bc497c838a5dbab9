"""Local projections on a system correlated with an ancilla.

Projecting system S of a bipartite state leaves the ancilla marginal
untouched, yet an experimenter holding both parts can draw strictly more work
than from S alone. The surplus is beta^-1 times a projector-dependent
correlation measure delta(A:S), which vanishes on product states and reaches
its ceiling S(rho_S) exactly on purifications.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import ConsistencyError, DimMismatchError
from .linalg import kron
from .projection import ProjectorSet, WorkReport, project
from .states import (
    DensityMatrix,
    Hamiltonian,
    Temperature,
    average_energy,
    partial_trace,
    von_neumann_entropy,
)

# conditional branches below this probability contribute nothing
_BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class BipartiteState:
    """State on S (x) A with the tensor factorisation made explicit."""

    rho_sa: DensityMatrix
    dim_s: int
    dim_a: int

    def __post_init__(self):
        if self.dim_s < 1 or self.dim_a < 1 or self.dim_s * self.dim_a != self.rho_sa.dim:
            raise DimMismatchError(
                f"BipartiteState: {self.dim_s} x {self.dim_a} does not factor "
                f"dimension {self.rho_sa.dim}"
            )

    @cached_property
    def marginal_s(self) -> DensityMatrix:
        return partial_trace(self.rho_sa, (self.dim_s, self.dim_a), keep=0)

    @cached_property
    def marginal_a(self) -> DensityMatrix:
        return partial_trace(self.rho_sa, (self.dim_s, self.dim_a), keep=1)


def _lift(p: ProjectorSet, dim_a: int) -> ProjectorSet:
    eye_a = np.eye(dim_a)
    return ProjectorSet([kron(pk, eye_a) for pk in p.projectors], labels=p.labels)


def local_project(state: BipartiteState, p: ProjectorSet) -> BipartiteState:
    """Apply sum_k (P_k (x) 1) rho (P_k (x) 1); the A marginal is unchanged."""
    if p.dim != state.dim_s:
        raise DimMismatchError(
            f"local_project: projector dimension {p.dim} != system dimension "
            f"{state.dim_s}"
        )
    p.require_rank_one()
    eta = project(state.rho_sa, _lift(p, state.dim_a))
    return BipartiteState(rho_sa=eta, dim_s=state.dim_s, dim_a=state.dim_a)


def _branches(state: BipartiteState, p: ProjectorSet):
    """Probabilities p_k and unnormalised conditional ancilla blocks."""
    phi = p.basis_vectors()
    r = state.rho_sa.mat.reshape(state.dim_s, state.dim_a, state.dim_s, state.dim_a)
    out = []
    for k in range(len(p)):
        v = phi[:, k]
        block = np.einsum("i,iajb,j->ab", v.conj(), r, v)
        out.append((float(np.trace(block).real), block))
    return out


def delta_correlation(state: BipartiteState, p: ProjectorSet) -> float:
    """Correlation measure delta(A:S) for the given projector family, in nats.

    delta = S(rho_S) - S(rho_SA) + sum_k p_k S(eta_A_k), with eta_A_k the
    ancilla state conditioned on branch k. Nonnegative; zero on product
    states; equal to S(rho_S) on purifications. Branches with p_k <= 1e-12
    are skipped (their contribution vanishes in the limit). No minimisation
    over bases is performed.
    """
    if p.dim != state.dim_s:
        raise DimMismatchError(
            f"delta_correlation: projector dimension {p.dim} != system "
            f"dimension {state.dim_s}"
        )
    p.require_rank_one()
    cond = 0.0
    for pk, block in _branches(state, p):
        if pk > _BRANCH_TOL:
            w = np.maximum(np.linalg.eigvalsh((block + block.conj().T) / 2.0), 0.0)
            w = w / pk
            w = w[w > 0.0]
            cond += pk * float(-(w * np.log(w)).sum())
    return (von_neumann_entropy(state.marginal_s)
            - von_neumann_entropy(state.rho_sa) + cond)


def global_optimal_work(state: BipartiteState, h_s: Hamiltonian, p: ProjectorSet,
                        t: Temperature, h_a: Hamiltonian | None = None) -> WorkReport:
    """Optimal work from realising the local projection on S globally.

    work = dS_SA / beta - dU with dS_SA the entropy change of the joint state
    and dU the energy change of the system alone (the ancilla term of an
    additive Hamiltonian cannot move since its marginal is fixed; passing
    ``h_a`` asserts this explicitly and raises ``ConsistencyError`` beyond
    1e-8). Exceeds the system-only work by exactly delta(A:S) / beta.
    """
    if h_s.dim != state.dim_s:
        raise DimMismatchError(
            f"global_optimal_work: Hamiltonian dimension {h_s.dim} != system "
            f"dimension {state.dim_s}"
        )
    eta = local_project(state, p)
    d_s = von_neumann_entropy(eta.rho_sa) - von_neumann_entropy(state.rho_sa)
    d_u = (average_energy(eta.marginal_s, h_s)
           - average_energy(state.marginal_s, h_s))
    if h_a is not None:
        if h_a.dim != state.dim_a:
            raise DimMismatchError(
                f"global_optimal_work: ancilla Hamiltonian dimension {h_a.dim} "
                f"!= ancilla dimension {state.dim_a}"
            )
        d_u_a = (average_energy(eta.marginal_a, h_a)
                 - average_energy(state.marginal_a, h_a))
        if abs(d_u_a) > 1e-8:
            raise ConsistencyError(
                f"ancilla energy moved by {d_u_a:.3e} under a local projection"
            )
    heat = d_s / t.beta
    return WorkReport(work=heat - d_u, entropy_change=d_s,
                      energy_change=d_u, heat_absorbed=heat)


class Lemma1Result(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def verify_lemma1(state: BipartiteState, p: ProjectorSet) -> Lemma1Result:
    """Check S(rho_SA) >= sum_k p_k S(eta_A_k) for rank-1 projectors on S."""
    if p.dim != state.dim_s:
        raise DimMismatchError(
            f"verify_lemma1: projector dimension {p.dim} != system dimension "
            f"{state.dim_s}"
        )
    p.require_rank_one()
    lhs = von_neumann_entropy(state.rho_sa)
    rhs = 0.0
    for pk, block in _branches(state, p):
        if pk > _BRANCH_TOL:
            w = np.maximum(np.linalg.eigvalsh((block + block.conj().T) / 2.0), 0.0)
            w = w / pk
            w = w[w > 0.0]
            rhs += pk * float(-(w * np.log(w)).sum())
    return Lemma1Result(lhs=lhs, rhs=rhs, holds=lhs >= rhs - 1e-10)
