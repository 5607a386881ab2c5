"""Renormalization-group coarse graining and RBM-based deep networks for Ising models.

Subpackages by capability:

- ``spins``: lattices, arbitrary-order spin Hamiltonians, exact partition
  functions, transfer-matrix oracle.
- ``sampler``: Metropolis Monte Carlo dataset generation with reproducible
  seeding, plus a binary dataset format.
- ``rg``: coarse-graining operators (1D decimation, 2D block spin), the
  coupling recursion tanh(J') = tanh^2(J), renormalized Hamiltonians, and the
  exactness condition sum_h exp(T(v,h)) = 1.
- ``rbm``: restricted Boltzmann machines in the +E sign convention
  (p ∝ exp(-E) with E = b·h + v·w·h + c·v), contrastive-divergence training,
  and exact small-system marginals/KL.
- ``mapping``: the operator T(v,h) = -E(v,h) + H(v) induced by an RBM and a
  data Hamiltonian, with enumeration-based identity checks.
- ``dnn``: greedy stacked-RBM training, reconstruction, effective receptive
  fields, and the exact decimation network for 1D chains.
"""

from .errors import CapacityError, DomainError, ValidationError
from .spins import (
    Boundary,
    Hamiltonian,
    Lattice,
    LatticeKind,
    SpinDomain,
    all_configs,
    boltzmann_distribution,
    config_index,
    convert_domain,
    exact_free_energy,
    exact_log_partition,
    exact_partition,
    format_lattice,
    hamiltonian_from_energies,
    parse_lattice,
    transfer_matrix_log_partition_1d,
    transfer_matrix_partition_1d,
)

__all__ = [
    "Boundary",
    "CapacityError",
    "DomainError",
    "Hamiltonian",
    "Lattice",
    "LatticeKind",
    "SpinDomain",
    "ValidationError",
    "all_configs",
    "boltzmann_distribution",
    "config_index",
    "convert_domain",
    "exact_free_energy",
    "exact_log_partition",
    "exact_partition",
    "format_lattice",
    "hamiltonian_from_energies",
    "parse_lattice",
    "transfer_matrix_log_partition_1d",
    "transfer_matrix_partition_1d",
]

__version__ = "0.1.0"
