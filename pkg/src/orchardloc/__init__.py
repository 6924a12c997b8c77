"""Monte Carlo localization for orchard-style landmark maps.

A desk-scale engine: synthetic orchard maps, four odometry motion models,
a particle filter weighted on trunk range/bearing/width observations and
vehicle heading, replayable sensor logs, and the evaluation protocols
(row convergence, turn tracking, fix-drift analysis).
"""

from .config import Params, fingerprint, load_params, params_from_dict, save_params
from .evaluate import (DriftStats, FilterReplay, SuiteSummary, TrialResult,
                       gnss_offset_series, run_row_trial, run_suite,
                       run_turn_trial, select_row_starts, smooth_positions,
                       summarize_tables)
from .geom import Pose2D, Vec2, angular_displacement, project_onto_heading, wrap_angle
from .motion import (MODES, MotionIncrement, MotionNoise, OdometryConfig,
                     OdometryTracker, default_noise, gnss_increment, propagate,
                     visual_increment, wheel_imu_increment, wheel_increment)
from .orchard import (Landmark, OrchardMap, RowSpec, generate_map,
                      inflate_widths, landmarks_in_fov, load_map, save_map)
from .particle_filter import (FilterParams, GroupReport, Particle, ParticleSet,
                              effective_sample_size, estimate, group_particles,
                              init_area, init_cluster, predict, resample,
                              systematic_resample, update_weights)
from .sensing import (GnssBiasState, SensorConfig, TrunkObservation,
                      initial_gnss_bias, observe_gnss, observe_orientation,
                      observe_trunks, orientation_likelihood, step_gnss_bias,
                      trunk_likelihood, zero_noise_config)
from .simulate import (Campaign, SensorRecord, SimLog, TrajectorySpec,
                       build_campaign, derive_seed, generate_trajectory,
                       load_campaign, read_log, simulate_log, to_records,
                       write_log)

__version__ = "0.1.0"
