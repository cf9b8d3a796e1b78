"""Entanglement-entropy dynamics of the two-particle Toda chain.

Quantum side: truncated-oscillator-basis diagonalization, coherent-state
propagation, and von Neumann entropy of the reduced state.  Classical
side: Gaussian Liouville ensembles evolved with RK4, projected onto one
particle's plane, and coarse-grained into cell (Shannon) entropy.  The
analysis layer extracts growth laws, saturation scalings, and the
quantum-classical distance as the two constructions approach each other.
"""

__version__ = "0.1.0"

from .analysis import (GrowthFit, SaturationEstimate, SweepCurves, SweepReport,
                       analyze_sweep, curve_distance, fit_growth, saturation_time,
                       saturation_value, scaling_regression)
from .cache import cache_get_or_build
from .config import ExperimentConfig, load_config, parse_config, preset_center, preset_model
from .curves import CurveTag, EntropyCurve
from .dynamics import (ModelParams, PhaseState, SectionSpec, Trajectory,
                       hamiltonian_flow, integrate_trajectory, poincare_section,
                       potential_energy, rk4_step, shell_state, total_energy)
from .ensemble import (CellPartition, Ensemble, cell_entropy, classical_entropy_curve,
                       evolve_ensemble, project, sample_initial_ensemble)
from .harness import RunResult, run_experiment
from .quantum import (BasisSpec, ReducedDensity, SpectralDecomposition, WaveVector,
                      build_hamiltonian, coherent_coefficients, entanglement_curve,
                      evolve, ho_exp_matrix, ho_p2_matrix, reduced_density,
                      spectral_decompose, von_neumann_entropy)

__all__ = [name for name in dir() if not name.startswith("_")]
