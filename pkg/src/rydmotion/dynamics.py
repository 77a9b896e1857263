"""Density-matrix evolution, channel application, and observables.

The frozen-chain state evolves unitarily in the spin eigenbasis; the
dephasing channel multiplies its matrix elements by Gamma_nm(t). All
observables here are pure functions; time points may be processed in
any order once a channel trajectory exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEvaluator, ChannelMatrix, chain_pipeline
from .config import NormalizedChain
from .spinmodel import EigenSystem

COMPUTATIONAL = "computational"
EIGEN = "eigen"

# two-atom computational basis indices, atom 1 most significant
GG, GR, RG, RR = 0, 1, 2, 3


@dataclass
class DensityMatrix:
    """Complex Hermitian unit-trace matrix tagged with its basis."""

    matrix: np.ndarray
    basis: str

    def __post_init__(self):
        if self.basis not in (COMPUTATIONAL, EIGEN):
            raise ValueError(f"unknown basis {self.basis!r}")
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self, *, herm_tol=1e-10, trace_tol=1e-10, eig_floor=-1e-8):
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > trace_tol or abs(np.trace(m).imag) > trace_tol:
            raise ValueError("density matrix trace differs from 1")
        if np.min(np.linalg.eigvalsh((m + m.conj().T) / 2)) < eig_floor:
            raise ValueError("density matrix has a negative eigenvalue")
        return self

    def to_eigen(self, es: EigenSystem) -> "DensityMatrix":
        if self.basis == EIGEN:
            return self
        v = es.vectors
        return DensityMatrix(v.conj().T @ self.matrix @ v, EIGEN)

    def to_computational(self, es: EigenSystem) -> "DensityMatrix":
        if self.basis == COMPUTATIONAL:
            return self
        v = es.vectors
        return DensityMatrix(v @ self.matrix @ v.conj().T, COMPUTATIONAL)


def pure_state(vector, basis: str) -> DensityMatrix:
    v = np.asarray(vector, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()), basis)


def evolve_fga(rho0: DensityMatrix, es: EigenSystem, t: float) -> DensityMatrix:
    """Unitary frozen-chain evolution, returned in the eigenbasis."""
    rho = rho0.to_eigen(es).matrix
    phases = np.exp(-1j * es.energies * t)
    return DensityMatrix(phases[:, None] * rho * phases.conj()[None, :], EIGEN)


def apply_channel(rho_fga: DensityMatrix, channel) -> DensityMatrix:
    """Elementwise modulation rho'_nm = Gamma_nm rho_nm (eigenbasis only).

    The Schur product of the positive-semidefinite Gamma with a density
    matrix is again a density matrix, so the map is CPTP.
    """
    if rho_fga.basis != EIGEN:
        raise ValueError("apply_channel expects the state in the eigenbasis")
    gamma = channel.gamma if isinstance(channel, ChannelMatrix) else np.asarray(channel)
    if gamma.shape != rho_fga.matrix.shape:
        raise ValueError("channel and state dimensions differ")
    return DensityMatrix(gamma * rho_fga.matrix, EIGEN)


def _check_same_basis(a: DensityMatrix, b: DensityMatrix):
    if a.basis != b.basis:
        raise ValueError("density matrices are expressed in different bases")


def trace_fidelity(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """Re tr(rho_a rho_b); equals <psi|rho_a|psi> for pure rho_b."""
    _check_same_basis(rho_a, rho_b)
    return float(np.trace(rho_a.matrix @ rho_b.matrix).real)


def trace_distance(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """(1/2) tr |rho_a - rho_b|."""
    _check_same_basis(rho_a, rho_b)
    diff = rho_a.matrix - rho_b.matrix
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def purity(rho: DensityMatrix) -> float:
    return float(np.trace(rho.matrix @ rho.matrix).real)


@dataclass(frozen=True)
class BreakdownEstimate:
    """Perturbative validity horizon of the channel for two atoms.

    t_star_per_state is indexed by eigenstate (normalized time units,
    inf for states carrying no doubly-excited admixture, nan for the
    doubly-excited branch itself); t_star is the minimum over the
    blockaded states.
    """

    t_star_per_state: np.ndarray
    t_star: float
    rr_index: int


def breakdown_time(es: EigenSystem, chain: NormalizedChain) -> BreakdownEstimate:
    """Time at which the accelerating doubly-excited wavepacket displaces
    far enough that its energy perturbation rivals the spectral gaps.

    Solves x(T) F |<n| pi pi |rr'>| = |E_rr' - E_n| with the ballistic
    displacement x(t) = F t^2 / 2 (normalized units), which for the
    van der Waals exponent is the closed form
    (r / 3 V) sqrt(|E_rr' - E_n| / 2 |<n|rr'>|).
    """
    if chain.n_atoms != 2:
        raise ValueError("breakdown_time is defined for the two-atom chain")
    f12 = float(chain.f_bond[0])
    v = es.vectors
    rr_idx = int(np.argmax(np.abs(v[RR, :])))
    # <n| pi^1 pi^2 |rr'> reduces to conj(v_n[RR]) v_rr'[RR]
    element = np.abs(np.conj(v[RR, :]) * v[RR, rr_idx])
    gaps = np.abs(es.energies[rr_idx] - es.energies)

    t_star = np.full(es.dim, np.inf)
    for n in range(es.dim):
        if n == rr_idx:
            t_star[n] = np.nan
        elif element[n] > 1e-300:
            t_star[n] = np.sqrt(2.0 * gaps[n] / element[n]) / f12
    finite = np.r_[t_star[:rr_idx], t_star[rr_idx + 1 :]]
    return BreakdownEstimate(
        t_star_per_state=t_star, t_star=float(np.min(finite)), rr_index=rr_idx
    )


def spin_exchange_rate(chain: NormalizedChain) -> float:
    """Synthetic exchange rate J = Omega^2 V / (4 Delta (Delta - V)).

    Two-atom far-detuned formula; poles at Delta = 0 and Delta = V are
    rejected.
    """
    omega = float(chain.omega[0])
    delta = float(chain.delta[0])
    v = float(chain.v0[0])
    if delta == 0.0 or delta == v:
        raise ValueError("exchange rate diverges at Delta = 0 and Delta = V0")
    return omega**2 * v / (4.0 * delta * (delta - v))


def quadratic_peak(t, y, i):
    """Vertex of the parabola through points i-1, i, i+1."""
    denom = y[i - 1] - 2 * y[i] + y[i + 1]
    if denom >= 0:  # flat or concave-up: keep the grid point
        return t[i], y[i]
    shift = 0.5 * (y[i - 1] - y[i + 1]) / denom
    dt = t[i + 1] - t[i]
    height = y[i] - 0.25 * shift * (y[i - 1] - y[i + 1])
    return t[i] + shift * dt, height


def find_peaks(t, y):
    """Interior local maxima with quadratic refinement."""
    idx = np.nonzero((y[1:-1] >= y[:-2]) & (y[1:-1] > y[2:]))[0] + 1
    peaks = [quadratic_peak(t, y, i) for i in idx]
    return np.array([p[0] for p in peaks]), np.array([p[1] for p in peaks])


@dataclass(frozen=True)
class ExchangeCycleMetrics:
    """Return-probability trace of repeated spin exchange plus its peaks."""

    times: np.ndarray
    probability: np.ndarray
    peak_times: np.ndarray
    peak_heights: np.ndarray
    cycle_count: int
    cycle_time_nominal: float
    cycle_time_detected: float


def exchange_cycle_metrics(
    chain: NormalizedChain,
    threshold: float,
    *,
    n_cycles: int = 40,
    points_per_cycle: int = 60,
    dephasing: bool = True,
) -> ExchangeCycleMetrics:
    """Count exchange cycles whose |rg> return probability clears threshold.

    Simulates rho'(t) from |rg> over n_cycles nominal periods pi/|J|,
    detects return peaks by local maxima with quadratic interpolation,
    and counts those at or above the threshold. cycle_time_nominal is
    pi/|J|; cycle_time_detected the first detected return.
    """
    j = spin_exchange_rate(chain)
    t_cycle = np.pi / abs(j)
    times = np.linspace(0.0, n_cycles * t_cycle, n_cycles * points_per_cycle + 1)

    es, modes = chain_pipeline(chain)
    rho0 = pure_state(np.eye(4)[RG], COMPUTATIONAL).to_eigen(es)
    if dephasing:
        gammas = [cm.gamma for cm in ChannelEvaluator(modes).trajectory(times)]
    else:
        gammas = [np.ones((4, 4))] * times.size

    rg_eigen = es.vectors.conj().T @ np.eye(4)[RG]
    prob = np.empty(times.size)
    for i, t in enumerate(times):
        rho = apply_channel(evolve_fga(rho0, es, t), gammas[i])
        prob[i] = float(np.real(rg_eigen.conj() @ rho.matrix @ rg_eigen))

    peak_times, peak_heights = find_peaks(times, prob)
    count = int(np.sum(peak_heights >= threshold))
    detected = float(peak_times[0]) if peak_times.size else float("nan")
    return ExchangeCycleMetrics(
        times=times,
        probability=prob,
        peak_times=peak_times,
        peak_heights=peak_heights,
        cycle_count=count,
        cycle_time_nominal=float(t_cycle),
        cycle_time_detected=detected,
    )


def two_atom_states():
    """Named two-atom vectors: gg, s, a, rr in the computational basis."""
    gg = np.eye(4)[GG]
    rr = np.eye(4)[RR]
    s = (np.eye(4)[RG] + np.eye(4)[GR]) / np.sqrt(2)
    a = (np.eye(4)[RG] - np.eye(4)[GR]) / np.sqrt(2)
    return gg, s, a, rr


def branch_labels(es: EigenSystem) -> list[str]:
    """Label two-atom eigenstates by their closest state in {gg, s, rr}.

    The antisymmetric combination decouples under symmetric drive; the
    eigenstate parallel to it is labeled 'a'. Ties go to the earlier
    candidate in (gg, s, rr).
    """
    if es.dim != 4:
        raise ValueError("branch labels are defined for the two-atom system")
    gg, s, a, rr = two_atom_states()
    candidates = np.stack([gg, s, rr])
    labels = []
    a_idx = int(np.argmax(np.abs(a @ es.vectors) ** 2))
    overlaps = np.abs(candidates.conj() @ es.vectors) ** 2  # (3, 4)
    names = ["gg", "s", "rr"]
    for n in range(4):
        labels.append("a" if n == a_idx else names[int(np.argmax(overlaps[:, n]))])
    return labels
