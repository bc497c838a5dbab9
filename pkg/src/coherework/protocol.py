"""Three-step optimal projection protocol: rotate, isotherm, quench.

The protocol drives (rho, H) -> (eta, H), where eta is rho with its
coherences in the energy eigenbasis removed, through

1. a unitary rotation into the energy eigenbasis while the Hamiltonian jumps
   to H1, chosen so the rotated state is thermal,
2. a quasi-static isothermal drag of the eigenvalues from H1 to H2, whose
   thermal state is eta,
3. a quench back to the original H.

Steps 1 and 3 are isolated (work only); all heat flows in step 2. The exact
step works sum to the optimal projection work, and the discretised isotherm
converges to it at rate O(1/steps).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ClampRequiredError, NotUnitaryError, StateValidationError
from .linalg import eigenvalue_clusters, hs_norm, is_unitary
from .states import (
    DensityMatrix,
    Hamiltonian,
    Temperature,
    average_energy,
    gibbs_state,
)

PLAN_TOL = 1e-8

# an eigenvalue at or below this is "zero" for clamping purposes
_ZERO_EIGENVALUE = 1e-14


def _shannon(p: np.ndarray) -> float:
    p = p[p > 0.0]
    return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class LedgerEntry:
    """One protocol step: average work drawn, heat absorbed, and the changes."""

    label: str
    work: float
    heat_absorbed: float
    energy_change: float
    entropy_change: float


@dataclass(frozen=True)
class WorkLedger:
    """Ordered per-step energy bookkeeping with summed totals.

    Every entry satisfies the first law (energy_change = heat_absorbed - work)
    to 1e-10; isolated steps carry exactly zero heat by construction.
    """

    entries: tuple[LedgerEntry, ...]
    purity_clamp: float | None = None

    def __post_init__(self):
        for e in self.entries:
            gap = abs(e.energy_change - (e.heat_absorbed - e.work))
            if gap > 1e-10:
                raise ValueError(
                    f"ledger entry {e.label!r} violates the first law by {gap:.3e}"
                )

    @property
    def totals(self) -> LedgerEntry:
        return LedgerEntry(
            label="total",
            work=sum(e.work for e in self.entries),
            heat_absorbed=sum(e.heat_absorbed for e in self.entries),
            energy_change=sum(e.energy_change for e in self.entries),
            entropy_change=sum(e.entropy_change for e in self.entries),
        )


@dataclass(frozen=True)
class ProtocolPlan:
    """Fully specified three-step protocol.

    ``basis`` holds the shared eigenbasis (columns) in which rho1, eta, and
    all three Hamiltonians are diagonal; ``e0/e1/e2`` are their eigenvalues in
    that basis, ``populations`` the spectrum of the rotated state, and
    ``target_populations`` the spectrum of eta. ``rho0`` is the (possibly
    clamped) initial state the plan actually drives.
    """

    rho0: DensityMatrix
    h0: Hamiltonian
    h1: Hamiltonian
    h2: Hamiltonian
    v: np.ndarray
    temperature: Temperature
    basis: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    populations: np.ndarray
    target_populations: np.ndarray
    purity_clamp: float
    pairing: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for arr in (self.v, self.basis, self.e0, self.e1, self.e2,
                    self.populations, self.target_populations):
            arr.setflags(write=False)
        if not is_unitary(self.v, 1e-10):
            raise NotUnitaryError("ProtocolPlan: step-1 rotation is not unitary")
        if not is_unitary(self.basis, 1e-10):
            raise NotUnitaryError("ProtocolPlan: shared eigenbasis is not unitary")
        rho1 = self.v @ self.rho0.mat @ self.v.conj().T
        gap1 = hs_norm(gibbs_state(self.h1, self.temperature).mat - rho1)
        if gap1 > PLAN_TOL:
            raise StateValidationError(
                f"ProtocolPlan: rotated state is not thermal for H1 "
                f"(distance {gap1:.3e})"
            )
        eta = (self.basis * self.target_populations) @ self.basis.conj().T
        gap2 = hs_norm(gibbs_state(self.h2, self.temperature).mat - eta)
        if gap2 > PLAN_TOL:
            raise StateValidationError(
                f"ProtocolPlan: target state is not thermal for H2 "
                f"(distance {gap2:.3e})"
            )
        mats = (self.h0.mat, self.h1.mat, self.h2.mat)
        scale = max(max(hs_norm(m) for m in mats), 1e-30)
        for i in range(3):
            for j in range(i + 1, 3):
                comm = hs_norm(mats[i] @ mats[j] - mats[j] @ mats[i])
                if comm > PLAN_TOL * scale * scale:
                    raise StateValidationError(
                        f"ProtocolPlan: H{i} and H{j} do not share eigenprojectors "
                        f"(commutator norm {comm:.3e})"
                    )

    @cached_property
    def target_state(self) -> DensityMatrix:
        """eta, the projection of rho0 onto the energy eigenspaces of h0."""
        m = (self.basis * self.target_populations) @ self.basis.conj().T
        return DensityMatrix(m)

    @property
    def dim(self) -> int:
        return self.rho0.dim


def _clamp_distribution(p: np.ndarray, clamp: float) -> np.ndarray:
    if clamp > 0.0:
        p = np.clip(p, clamp, 1.0 - clamp)
    return p / p.sum()


def build_plan(rho: DensityMatrix, h: Hamiltonian, t: Temperature,
               purity_clamp: float = 1e-9,
               pairing: Sequence[int] | None = None) -> ProtocolPlan:
    """Construct the three-step plan for projecting rho onto h's eigenbasis.

    The spectrum of rho is clamped into [purity_clamp, 1 - purity_clamp] and
    renormalised before taking logarithms; a pure state with no clamp would
    need an infinite energy gap, so ``purity_clamp = 0`` raises
    ``ClampRequiredError`` whenever rho has a zero eigenvalue. The clamp
    shifts the achievable total work by at most
    ``2 * d * purity_clamp * ln(1/purity_clamp)``.

    Degenerate Hamiltonians are handled by diagonalising rho's block within
    each eigenspace, so the isotherm's endpoint is exactly the block-projected
    state. ``pairing`` optionally assigns rho-eigenvector l (ascending
    eigenvalue order) to basis slot pairing[l]; the default pairs descending
    populations with ascending energies, which reduces to the identity
    rotation when rho is already thermal. Pairing changes the rotation and
    the discretised isotherm path but never the exact step works or totals
    (the auxiliary Hamiltonians are built from the paired populations, so
    their traces see only the multiset).
    """
    if not 0.0 <= purity_clamp <= 1e-3:
        raise ValueError(
            f"purity_clamp must lie in [0, 1e-3], got {purity_clamp!r}"
        )
    if rho.dim != h.dim:
        raise StateValidationError(
            f"build_plan: state dimension {rho.dim} != Hamiltonian dimension {h.dim}"
        )
    d = rho.dim
    beta = t.beta

    a_raw = rho.spectrum()
    if purity_clamp == 0.0 and a_raw.min() <= _ZERO_EIGENVALUE:
        raise ClampRequiredError(
            "state has a zero eigenvalue; a positive purity_clamp is required "
            "to keep the step-1 energy gap finite"
        )
    a = _clamp_distribution(a_raw, purity_clamp)
    w_vecs = rho.eigenvectors
    rho_c = DensityMatrix((w_vecs * a) @ w_vecs.conj().T)

    # shared basis: within each energy eigenspace, diagonalise rho_c's block
    hw = h.spectral.eigenvalues
    hv = h.spectral.eigenvectors
    f_cols = []
    e0_list = []
    q_list = []
    for idx in eigenvalue_clusters(hw):
        energy = float(np.mean(hw[idx]))
        cols = hv[:, idx]
        block = cols.conj().T @ rho_c.mat @ cols
        qk, gk = np.linalg.eigh((block + block.conj().T) / 2.0)
        f_cols.append(cols @ gk)
        e0_list.extend([energy] * len(idx))
        q_list.extend(qk.tolist())
    basis = np.hstack(f_cols)
    e0 = np.array(e0_list)
    q = np.maximum(np.array(q_list), 0.0)
    q = q / q.sum()

    if pairing is None:
        perm = tuple(range(d - 1, -1, -1))
    else:
        perm = tuple(int(i) for i in pairing)
        if sorted(perm) != list(range(d)):
            raise ValueError(f"pairing must be a permutation of 0..{d - 1}, got {perm}")

    pop = np.empty(d)
    pop[np.array(perm)] = a
    v = basis[:, np.array(perm)] @ w_vecs.conj().T

    e1 = -np.log(pop) / beta
    e1 -= e1.mean()
    e2 = -np.log(q) / beta
    e2 -= e2.mean()
    h1 = Hamiltonian((basis * e1) @ basis.conj().T)
    h2 = Hamiltonian((basis * e2) @ basis.conj().T)

    return ProtocolPlan(
        rho0=rho_c, h0=h, h1=h1, h2=h2, v=v, temperature=t,
        basis=basis, e0=e0, e1=e1, e2=e2,
        populations=pop, target_populations=q,
        purity_clamp=purity_clamp, pairing=perm,
    )


def exact_step_works(plan: ProtocolPlan) -> WorkLedger:
    """Closed-form ledger for the three steps (no discretisation).

    The rotate and quench works are the energy drops of the isolated system;
    the isotherm work is the equilibrium free-energy difference. The totals
    reproduce the optimal projection work of the (clamped) initial state
    exactly.
    """
    beta = plan.temperature.beta
    pop, q = plan.populations, plan.target_populations
    e0, e1, e2 = plan.e0, plan.e1, plan.e2

    u_rho = average_energy(plan.rho0, plan.h0)
    u1 = float(pop @ e1)
    u2 = float(q @ e2)
    u3 = float(q @ e0)
    s_pop = _shannon(pop)
    s_q = _shannon(q)

    rotate = LedgerEntry("rotate", work=u_rho - u1, heat_absorbed=0.0,
                         energy_change=u1 - u_rho, entropy_change=0.0)
    isotherm = LedgerEntry(
        "isotherm",
        work=(u1 - s_pop / beta) - (u2 - s_q / beta),
        heat_absorbed=(s_q - s_pop) / beta,
        energy_change=u2 - u1,
        entropy_change=s_q - s_pop,
    )
    quench = LedgerEntry("quench", work=u2 - u3, heat_absorbed=0.0,
                         energy_change=u3 - u2, entropy_change=0.0)
    return WorkLedger((rotate, isotherm, quench), purity_clamp=plan.purity_clamp)


def simulate(plan: ProtocolPlan, quasi_static_steps: int) -> WorkLedger:
    """Run the protocol with a discretised isotherm.

    The isotherm is a staircase of ``quasi_static_steps`` (small quench, full
    thermalisation) pairs along a linear eigenvalue schedule from H1 to H2;
    the state is exactly thermal after every sub-step. Its work approaches
    the free-energy difference with error O(1/steps).
    """
    n = int(quasi_static_steps)
    if n < 1:
        raise ValueError(f"quasi_static_steps must be >= 1, got {quasi_static_steps!r}")
    beta = plan.temperature.beta
    e0, e1, e2 = plan.e0, plan.e1, plan.e2
    q = plan.target_populations

    u_rho = average_energy(plan.rho0, plan.h0)

    work = 0.0
    heat = 0.0
    s = np.linspace(0.0, 1.0, n + 1)
    prev_e = e1
    prev_p = _thermal(e1, beta)
    first_p, first_e = prev_p, prev_e
    chunk = 65536
    for start in range(1, n + 1, chunk):
        stop = min(start + chunk, n + 1)
        ee = e1[None, :] + s[start:stop, None] * (e2 - e1)[None, :]
        pp = _thermal_rows(ee, beta)
        ee_full = np.vstack([prev_e[None, :], ee])
        pp_full = np.vstack([prev_p[None, :], pp])
        work += float((pp_full[:-1] * (ee_full[:-1] - ee_full[1:])).sum())
        heat += float(((pp_full[1:] - pp_full[:-1]) * ee_full[1:]).sum())
        prev_e = ee[-1]
        prev_p = pp[-1]
    last_p, last_e = prev_p, prev_e

    u1 = float(first_p @ first_e)
    u2 = float(last_p @ last_e)
    rotate = LedgerEntry("rotate", work=u_rho - u1, heat_absorbed=0.0,
                         energy_change=u1 - u_rho, entropy_change=0.0)
    isotherm = LedgerEntry("isotherm", work=work, heat_absorbed=heat,
                           energy_change=u2 - u1,
                           entropy_change=_shannon(last_p) - _shannon(first_p))
    u3 = float(q @ e0)
    quench = LedgerEntry("quench", work=u2 - u3, heat_absorbed=0.0,
                         energy_change=u3 - u2, entropy_change=0.0)
    return WorkLedger((rotate, isotherm, quench), purity_clamp=plan.purity_clamp)


def _thermal(e: np.ndarray, beta: float) -> np.ndarray:
    x = -beta * e
    x = x - x.max()
    p = np.exp(x)
    return p / p.sum()


def _thermal_rows(e: np.ndarray, beta: float) -> np.ndarray:
    x = -beta * e
    x = x - x.max(axis=1, keepdims=True)
    p = np.exp(x)
    return p / p.sum(axis=1, keepdims=True)
