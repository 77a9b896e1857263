"""Spin-motion coupling data and the per-eigenstate normal-mode reduction.

For each spin eigenstate |n> the position-dependent interaction shifts
its energy by a linear force term and a quadratic virtual-transition
term. The coupling tensor

    w^l_nm = F_(l-1,l) <n| pi pi |m>  -  F_(l,l+1) <n| pi pi |m>

telescopes nearest-neighbor bond forces onto atoms (open-chain boundary:
F_(0,1) = F_(L,L+1) = 0), giving f^l_n = -w^l_nn and
M^lk_n = sum_(m != n) w^l_mn w^k_nm / (E_n - E_m).

The center-of-mass coordinate never couples, so the quadratic form is
reduced to L-1 relative coordinates with a fixed Gram-Schmidt basis G
and then diagonalized per eigenstate: S_n = G M_n G^T = Q_n^T D_n Q_n.
The stored (D_n, Q_n, transformed forces) feed the channel kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NormalizedChain
from .errors import DegeneracyError, NumericalError
from .spinmodel import EigenSystem, bond_mask

GAP_TOL_FACTOR = 1e-8
COUPLING_TOL_FACTOR = 1e-12


@dataclass(frozen=True)
class CouplingData:
    """Per-eigenstate linear forces f (D, L) and quadratic matrices M (D, L, L)."""

    f: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class DisentangledModes:
    """Normal-mode data consumed by the channel kernel.

    For each of D eigenstates: d holds the L-1 eigenvalues of
    S_n = G M_n G^T sorted descending (negative values allowed and
    continued as imaginary frequencies downstream), Q the orthogonal
    eigenvector rows with S_n = Q^T diag(d) Q, and forces the
    transformed linear terms F^l_n = -(Q G w_nn)^l = (Q G f_n)^l.
    """

    n_coords: int
    d: np.ndarray
    Q: np.ndarray
    forces: np.ndarray
    f: np.ndarray

    @property
    def n_states(self) -> int:
        return self.d.shape[0]

    @property
    def n_modes(self) -> int:
        return self.d.shape[1]

    def frequencies(self) -> np.ndarray:
        """Mode frequencies sqrt(d) with d < 0 continued to i sqrt(|d|)."""
        return np.sqrt(self.d.astype(np.complex128))


def telescoped_coupling(bond_terms: np.ndarray) -> np.ndarray:
    """Assemble w^l from per-bond derivative elements D_b = <n|dH/dr_b|m>.

    bond_terms has shape (L-1, dim, dim); the result (L, dim, dim)
    satisfies w^l = D_l - D_(l-1) with zero padding at the chain ends,
    hence sum_l w^l = 0.
    """
    bonds, dim, _ = bond_terms.shape
    w = np.zeros((bonds + 1, dim, dim), dtype=bond_terms.dtype)
    w[:-1] += bond_terms
    w[1:] -= bond_terms
    return w


def spin_chain_coupling(es: EigenSystem, chain: NormalizedChain) -> np.ndarray:
    """Coupling tensor w (L, dim, dim) for the full spin chain.

    Materializes the bond projector elements, so meant for small chains;
    chain_modes streams the same construction for large ones.
    """
    L = chain.n_atoms
    bond_terms = np.empty((L - 1, es.dim, es.dim), dtype=es.vectors.dtype)
    for b in range(L - 1):
        rows = es.vectors[bond_mask(L, b), :]
        bond_terms[b] = -chain.f_bond[b] * (rows.conj().T @ rows)
    return telescoped_coupling(bond_terms)


def default_tolerances(energies: np.ndarray, force_scale: float) -> tuple[float, float]:
    gap_tol = GAP_TOL_FACTOR * float(np.max(energies) - np.min(energies))
    coupling_tol = COUPLING_TOL_FACTOR * abs(force_scale)
    return gap_tol, coupling_tol


def _quadratic_chunk(energies, w_rows, index0, gap_tol, coupling_tol):
    """f and M for a block of eigenstates given their coupling rows.

    w_rows has shape (L, C, dim): w^l_{nm} for n in the block. Raises
    DegeneracyError when a vanishing gap carries real coupling;
    uncoupled degenerate pairs contribute nothing.
    """
    n_chunk = w_rows.shape[1]
    rows_idx = np.arange(index0, index0 + n_chunk)

    gaps = energies[rows_idx][:, None] - energies[None, :]
    near = np.abs(gaps) <= gap_tol
    near[np.arange(n_chunk), rows_idx] = False  # self term always excluded
    if np.any(near):
        coupled = np.max(np.abs(w_rows), axis=0) > coupling_tol
        bad = near & coupled
        if np.any(bad):
            j, m = np.argwhere(bad)[0]
            n = int(rows_idx[j])
            raise DegeneracyError(
                n,
                int(m),
                float(abs(gaps[j, m])),
                float(np.max(np.abs(w_rows[:, j, m]))),
            )

    inv = np.zeros_like(gaps)
    valid = ~near
    valid[np.arange(n_chunk), rows_idx] = False
    np.divide(1.0, gaps, out=inv, where=valid)

    a = np.ascontiguousarray(w_rows.transpose(1, 0, 2))  # (C, L, dim)
    m_block = (a.conj() * inv[:, None, :]) @ a.transpose(0, 2, 1)
    f_block = -w_rows[:, np.arange(n_chunk), rows_idx].T.real
    return f_block, np.real(m_block)


def quadratic_data(
    energies: np.ndarray,
    w: np.ndarray,
    *,
    gap_tol: float | None = None,
    coupling_tol: float | None = None,
) -> CouplingData:
    """Linear and quadratic energy coefficients for every eigenstate."""
    if gap_tol is None or coupling_tol is None:
        g, c = default_tolerances(energies, np.max(np.abs(w)) if w.size else 0.0)
        gap_tol = g if gap_tol is None else gap_tol
        coupling_tol = c if coupling_tol is None else coupling_tol
    f, m = _quadratic_chunk(energies, w, 0, gap_tol, coupling_tol)
    return CouplingData(f=f, M=m)


def gram_schmidt_iterative(n_atoms: int) -> np.ndarray:
    """Orthonormalize the adjacent-separation directions one by one."""
    rows = []
    for l in range(n_atoms - 1):
        d = np.zeros(n_atoms)
        d[l], d[l + 1] = -1.0, 1.0
        for q in rows:
            d -= (d @ q) * q
        rows.append(d / np.linalg.norm(d))
    return np.array(rows)


def gram_schmidt(n_atoms: int, verify: bool = True) -> np.ndarray:
    """Closed-form Gram-Schmidt basis of the relative-coordinate subspace.

    Row l (1-based) is -1/sqrt(l + l^2) on the first l entries,
    l/sqrt(l + l^2) at position l+1, zero after. Rows are orthonormal
    and orthogonal to the uniform translation vector.
    """
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    g = np.zeros((n_atoms - 1, n_atoms))
    for l in range(1, n_atoms):
        norm = np.sqrt(l + l * l)
        g[l - 1, :l] = -1.0 / norm
        g[l - 1, l] = l / norm
    if verify:
        err = np.max(np.abs(g - gram_schmidt_iterative(n_atoms)))
        if err > 1e-12:
            raise NumericalError(
                f"Gram-Schmidt closed form deviates from construction by {err:.3e}"
            )
    return g


def _fix_row_signs(q: np.ndarray) -> np.ndarray:
    # q: (..., K, K) with eigenvector rows; make the largest entry of
    # each row positive so repeated runs are byte-identical
    anchor = np.argmax(np.abs(q), axis=-1, keepdims=True)
    lead = np.take_along_axis(q, anchor, axis=-1)
    return q * np.where(lead < 0, -1.0, 1.0)


def disentangle(coupling: CouplingData, g_basis: np.ndarray) -> DisentangledModes:
    """Diagonalize S_n = G M_n G^T for every eigenstate.

    Eigenvalues are sorted descending with a stable order on ties, so a
    zero matrix keeps Q = identity.
    """
    s = np.einsum("ab,nbc,dc->nad", g_basis, coupling.M, g_basis, optimize=True)
    s = 0.5 * (s + s.transpose(0, 2, 1))
    d, vecs = np.linalg.eigh(s)
    order = np.argsort(-d, axis=1, kind="stable")
    d = np.take_along_axis(d, order, axis=1)
    q = np.take_along_axis(vecs, order[:, None, :], axis=2).transpose(0, 2, 1)
    q = _fix_row_signs(q)

    gf = coupling.f @ g_basis.T
    forces = np.einsum("nij,nj->ni", q, gf)
    return DisentangledModes(
        n_coords=g_basis.shape[1], d=d, Q=q, forces=forces, f=coupling.f
    )


def chain_modes(
    es: EigenSystem,
    chain: NormalizedChain,
    *,
    chunk_size: int = 256,
) -> DisentangledModes:
    """Stage-one precompute for the full chain, streamed in blocks.

    Equivalent to disentangle(quadratic_data(...)) but never holds the
    (L, dim, dim) coupling tensor: for each block of eigenstates the
    w rows are rebuilt from per-bond eigenvector slices, which keeps the
    peak memory at O(dim^2) even for 12-atom chains.
    """
    L = chain.n_atoms
    dim = es.dim
    gap_tol, coupling_tol = default_tolerances(es.energies, np.max(np.abs(chain.f_bond)))
    g_basis = gram_schmidt(L)

    u_bond = [es.vectors[bond_mask(L, b), :] for b in range(L - 1)]

    f_all = np.empty((dim, L))
    d_all = np.empty((dim, L - 1))
    q_all = np.empty((dim, L - 1, L - 1))

    for i0 in range(0, dim, chunk_size):
        i1 = min(i0 + chunk_size, dim)
        w_rows = np.zeros((L, i1 - i0, dim), dtype=es.vectors.dtype)
        for b in range(L - 1):
            p_rows = u_bond[b][:, i0:i1].conj().T @ u_bond[b]
            w_rows[b] -= chain.f_bond[b] * p_rows
            w_rows[b + 1] += chain.f_bond[b] * p_rows

        f_blk, m_blk = _quadratic_chunk(es.energies, w_rows, i0, gap_tol, coupling_tol)
        sub = disentangle(CouplingData(f=f_blk, M=m_blk), g_basis)
        f_all[i0:i1] = f_blk
        d_all[i0:i1] = sub.d
        q_all[i0:i1] = sub.Q

    gf = f_all @ g_basis.T
    forces = np.einsum("nij,nj->ni", q_all, gf)
    return DisentangledModes(n_coords=L, d=d_all, Q=q_all, forces=forces, f=f_all)
