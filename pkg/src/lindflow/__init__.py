"""Open-quantum-system dynamics with non-Markovian harmonic baths and
Markovian pump/drain processes, decomposed into state-to-state transport."""

__version__ = "0.1.0"

from .core import (HBAR, KB, DensityMatrix, SuperOperator, ValidationError,
                   devectorize, left_right_superop, vectorize)
from .model import (JumpOperator, SystemModel, build_excitonic_nmer,
                    build_polaritonic_trimer, drain_operator, jump_matrix,
                    pump_operator, validate_jump)
from .bath import (BathCorrelation, EtaCoefficients, OhmicSpectralDensity,
                   TabulatedSpectralDensity, eta_coefficients)
from .pathint import (DynamicalMapSeries, bare_propagator, brute_force_maps,
                      nonhermitian_maps, tempo_maps)
from .dynamics import (NumericalFailure, RDMTrajectory, TransferTensors,
                       propagate_lindblad_reference, propagate_maps_directly,
                       propagate_with_memory, transfer_tensors)
from .flows import (FlowMatrix, SiteFlows, accumulate_flows, excitonic_current,
                    hamiltonian_flux, lindblad_flux, monomer_flows, site_loss,
                    steady_mean, total_excitation)
from .nonhermitian import (compare_methods, effective_hamiltonian,
                           lossy_first_excitation_model)

__all__ = [name for name in dir() if not name.startswith("_")]
