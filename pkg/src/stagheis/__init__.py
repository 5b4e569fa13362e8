"""Exact diagonalization and inequality verification for the staggered-field
Heisenberg antiferromagnet on periodic hypercubic lattices."""

from .lattice import (GeometryError, Lattice, LatticeSpec, MomentumGrid,
                      RampField, Region, StateSpaceError, build_lattice,
                      momentum_grid, ramp_field, region)
from .operators import (OperatorHandle, SectorBasis, SpinMatrices,
                        anticommutator, build_boundary_field,
                        build_field_hamiltonian, build_hamiltonian,
                        build_order_parameter, build_staggered_sy, commutator,
                        fourier_spin, operator_norm, sector_decomposition,
                        spin_matrices)
from .spectra import (CutoffFamily, EigenSystem, FilterParams, GroundSector,
                      cutoff_family, diagonalize, filter_params,
                      filtered_operator, ground_energy, ground_expectation,
                      ground_sector, kappa, sandwich, spectral_apply)
from .thermal import (GibbsState, duhamel_inner, free_energy_entropy,
                      gibbs_state, gibbs_variational_check,
                      magnetization_curve, plancherel_reconstruction,
                      structure_quantities, thermal_expectation,
                      zero_temperature_structure)

__version__ = "0.1.0"
