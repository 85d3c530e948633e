"""solidyn: pilot-wave and soliton co-evolution on periodic spectral grids.

A linear pilot wave (Schrodinger, or 1+1D Klein-Gordon) evolves alongside a
nonlinear u-field with logarithmic nonlinearity whose localized solution is
the Gausson.  Guidance trajectories integrate the wave's hydrodynamic
velocity field; in coupled mode the pilot's quantum potential drives the
soliton so that its center rides the guidance trajectory.  Diagnostics
verify the dynamical claims quantitatively: center tracking, mean-force
(Ehrenfest) balances, norm/energy conservation, Born-rule equivariance, and
two-particle nonlocal coupling.
"""

from .diagnostics import (ConservationReport, EhrenfestReport,
                          EquivarianceReport, cancellation_integrals,
                          conservation_report, ehrenfest_report, energy_nls,
                          equivariance_distance, norm_pt,
                          static_energy_identity_deviation)
from .errors import (BoundaryExitError, BoundaryMassError, ConfigError,
                     NodeEncounterError, NonFiniteFieldError,
                     PastOrientedCurrentError, SolidynError,
                     TachyonicRegionError)
from .grids import Field, Grid, VectorField, integrate, sample_density, \
    spectral_gradient, spectral_laplacian
from .kleingordon import (KGMadelung, KGRun, KGState,
                          current_conservation_residual,
                          discrete_mode_frequency, evolve_kg,
                          kg_bohm_trajectory, kg_madelung,
                          kg_newton_residual, lkg_step)
from .pair import (PairState, PairWave, conditional_q, ls2_step,
                   pair_continuity_residual, pair_step,
                   pair_tracking_residual, product_pair, run_pair,
                   symmetrized_pair)
from .potentials import PhysicalParams, Potentials
from .schrodinger import (MadelungBundle, SchrodingerRun,
                          continuity_residual, evolve_schrodinger,
                          integrate_bohm, integrate_bohm_ensemble, ls_step,
                          madelung_extract, newton_bohm_residual)
from .scenarios import (SCENARIO_KINDS, THRESHOLDS, ScenarioConfig,
                        parse_config, run_scenario)
from .snapshots import read_snapshot, write_snapshot
from .soliton import (GaussonParams, SolitonRun, SolitonState,
                      classical_trajectory, gausson_init, log_nonlinearity,
                      log_potential_density, nls_step,
                      phase_harmony_residual, run_classical, run_coupled,
                      second_central_moments, soliton_center)
from .trajectories import FlowHistory, TrajectoryRecord

__version__ = "0.1.0"
