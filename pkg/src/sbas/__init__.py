"""Small-baseline subset (SBAS) InSAR time-series toolkit.

Simulate wrapped interferograms from a known deformation truth, build the
small-baseline network, unwrap, invert per-pixel displacement time series
and mean LOS velocity, and correlate displacement rate with well
production.
"""
from .correlate import (CorrelationReport, ProductionRecord, aggregate_production, lagged_correlation,
                        pearson)
from .invert import (DesignMatrix, SBASInversion, TimeSeriesSolution, build_design_matrix,
                     fit_mean_velocity, integrate_displacement, invert_stack, solve_pixel)
from .io import read_sgrid, render_quicklook, write_sgrid
from .network import (Acquisition, NetworkThresholds, PairSpec, build_network, connected_components,
                      load_pairs, save_pairs, temporal_baseline)
from .raster import Raster, SensorConstants
from .scene_sim import (SceneTruth, WrappedInterferogram, forward_interferogram, make_atmosphere, make_scene,
                        make_velocity_bowl, simulate_stack, wrap)
from .unwrap import (ItohUnwrapper, LeastSquaresUnwrapper, UnwrapError, compute_residues, reference_pixel,
                     unwrap_auto, unwrap_itoh, unwrap_ls)

__version__ = "0.1.0"
