"""Entropy and fidelity of many-body wave packets under static imperfections."""

__version__ = "0.1.0"

from .basis import (
    CouplingKind,
    FermionBasis,
    SpinBasis,
    directly_coupled,
    enumerate_fermion_basis,
    spin_basis,
)
from .errors import ConfigError, FitError, NumericalError, SizingError
from .harness import (
    EnsembleResult,
    ExperimentConfig,
    preset,
    read_csv,
    run_experiment,
    write_csv,
)
from .hamiltonian import (
    Provenance,
    SpinChainParams,
    SymmetricHamiltonian,
    TbriParams,
    add_perturbation,
    build_spin_chain,
    build_tbri,
    delta_e_squared_direct,
    delta_e_squared_tbri,
    single_particle_energies,
)
from .observables import (
    EntropyTrace,
    FirstMinimumReport,
    entropy_trace,
    first_minimum,
    participation_number,
    shannon_entropy,
    spectrum_center_state,
)
from .spectral import (
    PacketTrajectory,
    SpectralDecomposition,
    StrengthFunctionProfile,
    diagonalize,
    evolve_packet,
    level_spacing_statistics,
    overlap_fidelity,
    return_probability,
    strength_function,
)

