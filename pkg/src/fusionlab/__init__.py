"""fusionlab: IMU+GPS sensor-fusion laboratory.

Simulates driving scenarios with noisy inertial and GPS sensors, estimates
the vehicle state with a sigma-point Kalman filter (plus EKF, dead-reckoning
and adaptive-noise baselines), tunes the filter's five parameter groups with
a bound-constrained particle swarm, and reproduces the multi-trial
evaluation protocol (RMSE, confidence intervals, convergence curves, and
per-update runtime checks).
"""

from .filters import (DivergenceError, FilterParams, SigmaSet, StateEstimate,
                      default_init, manual_default_params, merwe_sigma_points,
                      merwe_weights, process_jacobian, process_model,
                      run_adaptive_ukf, run_dead_reckoning, run_ekf,
                      run_filter, ukf_predict, ukf_update)
from .metrics import (AggregateStats, aggregate_stats, efficiency_improvement,
                      orientation_error_deg, position_rmse)
from .pso import (NoFeasibleParticleError, ParameterBounds, Particle,
                  PsoResult, Swarm, SwarmConfig, TuningResult, decode,
                  default_bounds, encode, fitness, init_swarm, minimize,
                  optimize, pso_step)
from .simulate import (Environment, GpsFix, GpsSeries, GroundTruth, ImuSample,
                       ImuSeries, Maneuver, NoiseProfile, ScenarioConfig,
                       SensorDataset, datasets_equal, default_profile,
                       export_csv, generate_ground_truth, import_csv,
                       partition, resolve_outage_windows, simulate_scenario,
                       synthesize_gps, synthesize_imu)
from .evaluate import (ALL_METHODS, Method, MethodStats, MultiTrialResult,
                       RuntimeBenchmark, SuiteConfig, TrialResult,
                       benchmark_runtime, emit_plot_data, multi_trial,
                       orientation_error, outage_drift, rmse, run_trial,
                       summary_table)

__version__ = "0.1.0"
