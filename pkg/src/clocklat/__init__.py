"""Lattice spin energies on eps-lattices, their interface-energy limits,
explicit transition constructions, and minimization engines."""

from .core import (CircleValue, Direction, bond_energy_sq, canonical_angle,
                   geodesic_distance_S1, geodesic_distance_SN,
                   geodesic_index_distance, norm_1, norm_21, prefactor,
                   sin_lemma_gap, step_angle)
from .lattice import (EnergyReport, LatticeDomain, SpinField, apply_jump_datum,
                      boundary_layer, discrete_energy, enumerate_bonds,
                      fill_jump_datum)
from .continuum import (GridPartitionField, GradientQuadrature, SingularSite,
                        SmoothFieldSpec, gradient_energy, jump_energy_direct,
                        jump_energy_sliced, jump_energy_window, limit_energy_E,
                        limit_energy_EN)
from .constructions import (StaircaseSpec, discretize_field,
                            interior_interface_area, pointwise_sample,
                            project_to_SN, sample_piecewise, staircase_recovery,
                            transition_slab)
from .solvers import (AnnealSchedule, CellProblemSpec, SearchSpaceError,
                      SolverResult, anneal_glauber, anneal_kawasaki,
                      bond_lower_bound_energy, cell_formula_estimate, chain_dp,
                      enumerate_min, enumerate_min_counts)
from .experiments import (ConvergenceTable, fit_rate, run_gamma_sandwich,
                          run_lemma_sweep, run_oblique_raster,
                          run_prefactor_limit)

__version__ = "0.1.0"
