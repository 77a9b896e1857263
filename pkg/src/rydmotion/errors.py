"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError
(and subclasses) -> 3, CapacityError -> 4.
"""


class RydmotionError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RydmotionError):
    """Invalid physical parameters or malformed configuration input."""


class CapacityError(RydmotionError):
    """Requested system size exceeds what the dense solvers support."""


class NumericalError(RydmotionError):
    """A numerical procedure left its domain of validity."""


class DegeneracyError(NumericalError):
    """Second-order coupling denominator vanished for a coupled eigenpair.

    Carries the offending pair so callers can report where the
    perturbative construction broke down.
    """

    def __init__(self, n: int, m: int, gap: float, coupling: float):
        self.pair = (n, m)
        self.gap = gap
        self.coupling = coupling
        super().__init__(
            f"eigenstates ({n}, {m}) are degenerate (gap {gap:.3e}) but carry "
            f"coupling {coupling:.3e}; the dephasing channel is invalid here"
        )


class GridError(NumericalError):
    """Wavepacket support reached the edge of the simulation grid."""
