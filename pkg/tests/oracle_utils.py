"""Independent reference implementations used only by the test suite.

Nothing here shares code paths with src/rydmotion: the coefficient
oracle evaluates the unsimplified textbook expressions in 50-digit
arithmetic, and the mode solver integrates the one-dimensional
Schroedinger equation on a grid.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def mode_coefficients_reference(omega, force, t):
    """(kbar, bbar, alpha, gamma) from the raw formulas in mpmath."""
    w, F, t = mp.mpc(omega), mp.mpf(force), mp.mpf(t)
    s, c = mp.sin(w * t), mp.cos(w * t)
    gamma = c + 1j * s / w
    kbar = 1j * w / (gamma * s) - 1j * w * (c / s)
    bbar = 1j * (F / w) * ((1 + 1j * s / w) / (gamma * s) - c / s)
    alpha = (
        0.5j
        * (F**2 / w**3)
        * (w * t + c / s + 1j / w - (1 + 1j * s / w) ** 2 / (gamma * s))
    )
    return tuple(complex(x) for x in (kbar, bbar, alpha, gamma))


def split_operator_mode(omega_sq, force, times, *, n=4096, x_max=60.0, dt=2e-4):
    """Wavefunctions of i dpsi/dt = -psi''/2 - F s psi + omega^2 s^2 psi / 2.

    Starts from the unit-width Gaussian pi^(-1/4) exp(-s^2/2) and
    returns (x, dx, [psi at each requested time]). Strang splitting at
    fixed step; resolution chosen by the caller to suit the case.
    """
    x = np.linspace(-x_max, x_max, n, endpoint=False)
    dx = x[1] - x[0]
    k = 2 * np.pi * np.fft.fftfreq(n, dx)
    psi = np.pi**-0.25 * np.exp(-(x**2) / 2)
    v = -force * x + 0.5 * omega_sq * x**2
    out = []
    t_prev = 0.0
    for t in np.asarray(times, dtype=float):
        steps = max(1, int(np.ceil((t - t_prev) / dt))) if t > t_prev else 0
        h = (t - t_prev) / steps if steps else 0.0
        half = np.exp(-0.5j * h * v)
        kin = np.exp(-0.5j * h * k**2)
        for _ in range(steps):
            psi = half * psi
            psi = np.fft.ifft(kin * np.fft.fft(psi))
            psi = half * psi
        out.append(psi.copy())
        t_prev = t
    return x, dx, out


def overlap(x, dx, psi_a, psi_b):
    return np.sum(np.conj(psi_a) * psi_b) * dx
