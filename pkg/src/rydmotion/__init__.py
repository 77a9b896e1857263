"""Dephasing channel for spin-motion coupling in Rydberg atom chains."""

from .channel import (
    ChannelEvaluator,
    ChannelMatrix,
    ModeCoefficients,
    assemble_state_factors,
    build_channel,
    chain_pipeline,
    chain_trajectory,
    gamma_overlap,
    mode_coefficients,
)
from .config import (
    AMU,
    HBAR,
    NormalizedChain,
    PhysicalParams,
    free_spread_normalized,
    free_spread_physical,
    linearized_force,
    load_params,
    normalize,
    sigma_0,
    static_interaction,
    two_atom_params,
)
from .coupling import (
    CouplingData,
    DisentangledModes,
    chain_modes,
    disentangle,
    gram_schmidt,
    gram_schmidt_iterative,
    quadratic_data,
    spin_chain_coupling,
    telescoped_coupling,
)
from .errors import (
    CapacityError,
    ConfigError,
    DegeneracyError,
    GridError,
    NumericalError,
    RydmotionError,
)
from .spinmodel import (
    EigenSystem,
    build_hamiltonian,
    diagonalize,
    occupation_table,
    pair_elements,
)

__version__ = "0.1.0"
