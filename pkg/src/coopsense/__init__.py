"""Cooperative bistatic sensing with reused OFDM downlink signals.

Simulates NR-style frequency-domain symbol grids through multipath sensing
channels with synchronization errors, extracts bistatic ranges by 2D
delay-Doppler processing, and localizes multiple targets by joint data
association and nonlinear least squares.
"""

from .constants import SPEED_OF_LIGHT
from .numerology import (BandwidthConfig, CpMode, FrequencyRange, Numerology,
                         NumerologyError, cp_samples, max_subcarriers,
                         symbol_period)
from .scene import (AccessPoint, ApRole, PathKind, PathTruth, Scene, SyncError,
                    Target, bistatic_doppler, bistatic_geometry, path_amplitude,
                    range_resolution, sbz_contains)
from .airsim import (GridKind, SymbolGrid, channel_estimate, channel_matrix,
                     generate_symbols, receive)
from .estimator import (DelayDopplerSpectrum, PathEstimate, RangeSet,
                        compensate_and_range, delay_doppler_spectrum,
                        extract_paths, refine_peak)
from .locator import (Association, LocationEstimate, SolverConfig, fuse_multi_rap,
                      ghost_check, localize_all, prefilter_ranges,
                      reindex_hybrid, rough_estimate, accurate_estimate,
                      solve_single_target, sx_closed_form)
from .oracle import (IdealMeasurementModel, exhaustive_associate, grid_localize,
                     ideal_ranges)
from .presets import PRESETS, ScenePreset, build_scene, get_preset, sample_targets
from .harness import Experiment, run_experiment

__version__ = "0.1.0"
