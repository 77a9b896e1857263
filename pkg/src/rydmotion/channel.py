"""Time-dependent dephasing channel: mode coefficients and overlap matrix.

Each spin eigenstate |n> drags a product of Gaussian wavepackets, one
per relative-coordinate normal mode, whose parameters evolve under a
driven harmonic (or inverted, for negative curvature) oscillator. The
channel element Gamma_nm(t) is the overlap of the motional states
attached to |n> and |m>:

    Gamma_nm = 2^((L-1)/2) conj(C_n) C_m
               exp(b_nm^T K_nm^(-1) b_nm / 2) / sqrt(det K_nm),

with K_nm = conj(K_n) + K_m and b_nm = conj(b_n) + b_m. The per-mode
coefficients are evaluated in a form with no sin(omega t) nodes; the
only singular point is omega -> 0, handled by a dedicated limit branch.

Both sqrt(gamma) inside C_n and sqrt(det K_nm) have branch ambiguities.
Gamma(t) is continuous with Gamma(0) = 1, so the evaluator walks a time
grid from t = 0 and accumulates both phases continuously; single-time
helpers use principal branches and are only trustworthy before the
first branch crossing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NormalizedChain
from .coupling import DisentangledModes, chain_modes
from .errors import NumericalError
from .spinmodel import EigenSystem, build_hamiltonian, diagonalize

# Below this magnitude of |omega| and |omega| t the closed forms lose
# precision to cancellation and the omega -> 0 Laurent limits take over
# (crossover error ~1e-8 relative on either side of the switch).
SINGULAR_SWITCH = 1e-4

LOG_DET_FLOOR = -690.0  # |det K_nm| below ~1e-300 is a lost cause


@dataclass(frozen=True)
class ModeCoefficients:
    """Gaussian parameters of one evolved mode: exp(-kbar s^2/2 + bbar s)
    scaled by exp(alpha)/sqrt(gamma)."""

    kbar: np.ndarray
    bbar: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray


def mode_coefficients(omega, force, t: float) -> ModeCoefficients:
    """Closed-form coefficients at time t for modes (omega, force).

    omega may be complex (negative curvature enters as imaginary
    frequency, turning the trigonometric factors hyperbolic). Arrays
    broadcast elementwise. At omega t = k pi the naive expressions are
    0/0 but the simplified forms used here are regular; the omega -> 0
    removable singularity switches to its limit branch when both
    |omega| and |omega| t are below SINGULAR_SWITCH.
    """
    omega = np.asarray(omega, dtype=np.complex128)
    force = np.asarray(force, dtype=np.float64)
    if t < 0:
        raise ValueError("time must be nonnegative")

    absw = np.abs(omega)
    limit = (absw < SINGULAR_SWITCH) & (absw * t < SINGULAR_SWITCH)
    wsafe = np.where(limit, 1.0, omega)

    wt = wsafe * t
    c = np.cos(wt)
    s = np.sin(wt)
    one_minus_c = 2.0 * np.sin(0.5 * wt) ** 2  # 1 - cos, cancellation-free

    gamma_c = c + 1j * s / wsafe
    kbar_c = (c + 1j * wsafe * s) / gamma_c
    # Re(kbar) = 1 / |gamma|^2 exactly, on the trigonometric and the
    # hyperbolic branch alike; the quotient form loses it to
    # cancellation once cosh^2 outgrows 1/eps, so pin the real part
    kbar_c = 1.0 / np.abs(gamma_c) ** 2 + 1j * kbar_c.imag
    bbar_c = -force * (one_minus_c - 1j * wsafe * s) / (wsafe**2 * gamma_c)
    bracket = (wt * c - s) + 1j * (t * s - 2.0 * one_minus_c / wsafe)
    alpha_c = 0.5j * force**2 * bracket / (wsafe**3 * gamma_c)

    den = 1.0 + 1j * t
    gamma_l = np.broadcast_to(den, omega.shape)
    kbar_l = np.broadcast_to(1.0 / den, omega.shape)
    bbar_l = force * t * (2j - t) / (2.0 * den)
    alpha_l = force**2 * t**3 * (t - 4j) / (24.0 * den)

    return ModeCoefficients(
        kbar=np.where(limit, kbar_l, kbar_c),
        bbar=np.where(limit, bbar_l, bbar_c),
        alpha=np.where(limit, alpha_l, alpha_c),
        gamma=np.where(limit, gamma_l, gamma_c),
    )


def assemble_state_factors(modes: DisentangledModes, t: float):
    """Per-eigenstate (C_n, K_n, b_n) at a single time, principal branch.

    C_n = prod_l exp(alpha)/sqrt(gamma), K_n = Q^T diag(kbar) Q,
    b_n = Q^T bbar. The principal sqrt makes C_n discontinuous once any
    gamma crosses the negative real axis; trajectory evaluation with
    phase tracking (ChannelEvaluator) is authoritative.
    """
    mc = mode_coefficients(modes.frequencies(), modes.forces, t)
    k = np.einsum("nli,nl,nlj->nij", modes.Q, mc.kbar, modes.Q, optimize=True)
    b = np.einsum("nli,nl->ni", modes.Q, mc.bbar)
    c = np.prod(np.exp(mc.alpha) / np.sqrt(mc.gamma), axis=1)
    return c, k, b


def gamma_overlap(k_n, b_n, c_n, k_m, b_m, c_m) -> complex:
    """Overlap of two Gaussian motional states from their factors.

    Principal-branch sqrt(det); see module docstring for the caveat.
    """
    k_nm = np.conj(k_n) + k_m
    b_nm = np.conj(b_n) + b_m
    sign, logabs = np.linalg.slogdet(k_nm)
    if logabs < LOG_DET_FLOOR:
        raise NumericalError("det K_nm underflow; system too large or t pathological")
    quad = b_nm @ np.linalg.solve(k_nm, b_nm)
    n_modes = k_nm.shape[-1]
    log_gamma = (
        0.5 * n_modes * np.log(2.0)
        + np.conj(np.log(c_n))
        + np.log(c_m)
        + 0.5 * quad
        - 0.5 * (logabs + 1j * np.angle(sign))
    )
    return complex(np.exp(log_gamma))


@dataclass(frozen=True)
class ChannelMatrix:
    """Channel at one time: Gamma plus the per-state factors behind it."""

    t: float
    gamma: np.ndarray
    C: np.ndarray
    K: np.ndarray
    b: np.ndarray


def _wrap_phase(delta: np.ndarray) -> np.ndarray:
    return (delta + np.pi) % (2.0 * np.pi) - np.pi


class ChannelEvaluator:
    """Walks Gamma(t) along an increasing time grid from t = 0.

    Keeps cumulative phases of every mode gamma factor and of every
    pair determinant so sqrt branches stay on the analytic sheet. User
    grids are internally subdivided when mode frequencies would advance
    any tracked phase by more than ~half a radian per step.
    """

    def __init__(self, modes: DisentangledModes, *, pair_chunk: int = 200_000):
        self.modes = modes
        self.omega = modes.frequencies()
        self.pair_chunk = int(pair_chunk)
        # conservative bound on d(arg det K_nm)/dt used for subdivision
        self._phase_rate = 3.0 * float(
            np.max(np.sum(np.abs(self.omega) + 1.0, axis=1))
        )
        d = modes.n_states
        self._iu = np.triu_indices(d)

    def _substeps(self, dt: float) -> int:
        n = int(np.ceil(dt * self._phase_rate / 0.5))
        return max(1, min(n, 4096))

    def _factors(self, t: float, mode_phase_prev, mode_arg_prev):
        mc = mode_coefficients(self.omega, self.modes.forces, t)
        arg = np.angle(mc.gamma)
        phase = mode_phase_prev + _wrap_phase(arg - mode_arg_prev)
        log_gamma = np.log(np.abs(mc.gamma)) + 1j * phase
        log_c = np.sum(mc.alpha - 0.5 * log_gamma, axis=1)
        k = np.einsum("nli,nl,nlj->nij", self.modes.Q, mc.kbar, self.modes.Q,
                      optimize=True)
        b = np.einsum("nli,nl->ni", self.modes.Q, mc.bbar)
        return log_c, k, b, phase, arg

    def trajectory(self, times) -> list[ChannelMatrix]:
        """ChannelMatrix at every requested time.

        times must start at 0 and increase strictly (the branch
        tracking contract). Within one evaluator call, pairs advance in
        time order; distinct pairs are independent.
        """
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a nonempty 1-D array")
        if times[0] != 0.0:
            raise ValueError("time grid must start at 0 (branch tracking)")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time grid must be strictly increasing")

        modes = self.modes
        d = modes.n_states
        n_modes = modes.n_modes
        iu0, iu1 = self._iu

        # analytic t = 0 point: every packet is the initial Gaussian
        eye = np.broadcast_to(np.eye(n_modes), (d, n_modes, n_modes))
        out = [
            ChannelMatrix(
                t=0.0,
                gamma=np.ones((d, d), dtype=np.complex128),
                C=np.ones(d, dtype=np.complex128),
                K=eye.astype(np.complex128).copy(),
                b=np.zeros((d, n_modes), dtype=np.complex128),
            )
        ]

        mode_phase = np.zeros((d, n_modes))
        mode_arg = np.zeros((d, n_modes))
        pair_phase = np.zeros(iu0.size)
        pair_arg = np.zeros(iu0.size)

        t_prev = 0.0
        for t_user in times[1:]:
            n_sub = self._substeps(t_user - t_prev)
            grid = np.linspace(t_prev, t_user, n_sub + 1)[1:]
            for j, t in enumerate(grid):
                emit = j == n_sub - 1
                log_c, k, b, mode_phase, mode_arg = self._factors(
                    t, mode_phase, mode_arg
                )
                gamma = (
                    np.empty((d, d), dtype=np.complex128) if emit else None
                )
                for lo in range(0, iu0.size, self.pair_chunk):
                    hi = min(lo + self.pair_chunk, iu0.size)
                    n_idx, m_idx = iu0[lo:hi], iu1[lo:hi]
                    k_nm = np.conj(k[n_idx]) + k[m_idx]
                    sign, logabs = np.linalg.slogdet(k_nm)
                    if np.min(logabs) < LOG_DET_FLOOR:
                        raise NumericalError(
                            "det K_nm underflow; system too large or t pathological"
                        )
                    arg = np.angle(sign)
                    pair_phase[lo:hi] += _wrap_phase(arg - pair_arg[lo:hi])
                    pair_arg[lo:hi] = arg
                    if emit:
                        b_nm = np.conj(b[n_idx]) + b[m_idx]
                        sol = np.linalg.solve(k_nm, b_nm[..., None])[..., 0]
                        quad = np.sum(b_nm * sol, axis=-1)
                        log_gamma = (
                            0.5 * n_modes * np.log(2.0)
                            + np.conj(log_c[n_idx])
                            + log_c[m_idx]
                            + 0.5 * quad
                            - 0.5 * (logabs + 1j * pair_phase[lo:hi])
                        )
                        vals = np.exp(log_gamma)
                        gamma[n_idx, m_idx] = vals
                        gamma[m_idx, n_idx] = np.conj(vals)
                if emit:
                    out.append(
                        ChannelMatrix(
                            t=float(t), gamma=gamma, C=np.exp(log_c), K=k, b=b
                        )
                    )
            t_prev = float(t_user)
        return out


def build_channel(modes: DisentangledModes, t: float, **kwargs) -> ChannelMatrix:
    """Channel matrix at a single time, tracked from t = 0."""
    if t == 0.0:
        return ChannelEvaluator(modes, **kwargs).trajectory([0.0])[0]
    return ChannelEvaluator(modes, **kwargs).trajectory([0.0, t])[-1]


def chain_pipeline(chain: NormalizedChain, *, chunk_size: int = 256):
    """Stage-one precompute for a chain: eigensystem plus modes."""
    es = diagonalize(build_hamiltonian(chain))
    return es, chain_modes(es, chain, chunk_size=chunk_size)


def chain_trajectory(chain: NormalizedChain, times, *, chunk_size: int = 256):
    """(EigenSystem, [ChannelMatrix at each time]) for a chain."""
    es, modes = chain_pipeline(chain, chunk_size=chunk_size)
    return es, ChannelEvaluator(modes).trajectory(times)
