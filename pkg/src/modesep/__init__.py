"""modesep: mode-separation measurement from samples plus a score function.

Simulates the target's canonical reversible diffusion and reads two
quantities off its lagged autocovariance: a scalar barrier-sensitivity score
(integrated squared trace-autocorrelation with a distribution-free stopping
rule) and metastability-ordered linear directions (eigenvectors of the
symmetrized lag autocovariance, certified against an exact random-matrix
null spectrum).
"""

from .autocov import AutocovSeries, LagGrid, estimate_autocov, rho_series, symmetrize
from .baselines import TicaConfig, gmm_mutual_information, knn_entropy, pca, tica
from .da import (AnalyticFloor, DaReport, McFloor, ProjectionTestConfig, auto_select,
                 count_above_floor, da_at_lag, select_lag_full, subspace_alignment)
from .dynamics import (NonFiniteStateError, SimConfig, TrajectoryEnsemble,
                       sample_ou_lag_pairs, simulate_canonical)
from .nullspec import (NullParams, NullSpectrumModel, c_pm, edge_small_gamma,
                       edge_tau_infinity, null_density, sample_simple_pair_spectrum,
                       sample_wishart_difference, stieltjes_cubic_coeffs, support_edges)
from .ssa import (SpectralProfile, SsaReport, ssa_estimate, ssa_monotonicity_check,
                  ssa_spectral, ssa_trajectory_bootstrap)
from .stattests import (TestResult, dip_pvalue, dip_statistic, empirical_pvalue,
                        matched_mc_null, silverman_test, trajectory_bootstrap)
from .targets import (GmmSpec, IsoGaussian, KdeModel, PlantedWellSpec, random_orthogonal,
                      spec_from_json, spec_to_json)

__version__ = "0.1.0"
