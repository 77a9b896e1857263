"""Frozen-chain spin Hamiltonian, eigensystem, and pair projector elements.

Basis ordering is the computational product basis with atom 1 in the
most significant bit, |g> = 0 and |r> = 1, so for two atoms the states
are {gg, gr, rg, rr} at indices {0, 1, 2, 3}. With real drive amplitudes
the Hamiltonian is real symmetric and everything downstream of the
eigensolve stays in real arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NormalizedChain
from .errors import CapacityError, NumericalError

MAX_ATOMS = 14


def occupation_table(n_atoms: int) -> np.ndarray:
    """(2^L, L) array of Rydberg occupations, atom 1 most significant."""
    states = np.arange(2**n_atoms, dtype=np.int64)
    shifts = n_atoms - 1 - np.arange(n_atoms)
    return ((states[:, None] >> shifts[None, :]) & 1).astype(np.float64)


def build_hamiltonian(chain: NormalizedChain) -> np.ndarray:
    """Dense spin Hamiltonian of the chain with atoms pinned in place.

    Diagonal: -sum_l delta_l n_l plus nearest-neighbor v0 terms.
    Off-diagonal: omega_l / 2 on single spin flips.
    """
    L = chain.n_atoms
    if not 2 <= L <= MAX_ATOMS:
        raise CapacityError(f"dense spin model supports 2..{MAX_ATOMS} atoms, got {L}")
    dim = 2**L
    occ = occupation_table(L)

    diag = -occ @ chain.delta
    diag += (occ[:, :-1] * occ[:, 1:]) @ chain.v0

    h = np.zeros((dim, dim))
    h[np.diag_indices(dim)] = diag
    states = np.arange(dim)
    for l in range(L):
        flipped = states ^ (1 << (L - 1 - l))
        h[states, flipped] += 0.5 * chain.omega[l]
    return h


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition of the frozen-chain Hamiltonian.

    energies ascend; vectors holds eigenvectors as columns with a fixed
    phase convention (largest-magnitude component real positive), so
    repeated runs produce bit-identical output.
    """

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.size

    def spectral_range(self) -> float:
        return float(self.energies[-1] - self.energies[0])


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    anchor = np.argmax(np.abs(vectors), axis=0)
    lead = vectors[anchor, np.arange(vectors.shape[1])]
    if np.iscomplexobj(vectors):
        vectors = vectors * np.exp(-1j * np.angle(lead))[None, :]
        # drop a numerically-zero imaginary part left by the rotation
        if np.max(np.abs(vectors.imag)) < 1e-14:
            vectors = vectors.real.copy()
    else:
        vectors = vectors * np.sign(lead)[None, :]
    return vectors


def diagonalize(hamiltonian: np.ndarray, hermiticity_tol: float = 1e-12) -> EigenSystem:
    """Eigensystem with ascending energies and deterministic phases."""
    h = np.asarray(hamiltonian)
    scale = max(np.max(np.abs(h)), 1.0)
    if np.max(np.abs(h - h.conj().T)) > hermiticity_tol * scale:
        raise NumericalError("Hamiltonian is not Hermitian within tolerance")
    energies, vectors = np.linalg.eigh(h)
    return EigenSystem(energies=energies, vectors=_fix_phases(vectors))


def bond_mask(n_atoms: int, bond: int) -> np.ndarray:
    """Boolean mask of basis states with atoms bond and bond+1 both excited."""
    occ = occupation_table(n_atoms)
    return (occ[:, bond] > 0.5) & (occ[:, bond + 1] > 0.5)


def pair_elements(es: EigenSystem, n_atoms: int) -> np.ndarray:
    """Projector elements <n| pi_r^l pi_r^(l+1) |m> for every bond.

    Returns an (L-1, dim, dim) tensor, Hermitian in (n, m). Materializes
    the full tensor, so intended for small chains; the coupling builder
    streams the same quantities in chunks for large ones.
    """
    bonds = n_atoms - 1
    dim = es.dim
    out = np.empty((bonds, dim, dim), dtype=es.vectors.dtype)
    for b in range(bonds):
        rows = es.vectors[bond_mask(n_atoms, b), :]
        out[b] = rows.conj().T @ rows
    return out
