"""Protocol harness: multi-trial evaluation of all estimators over a scenario
suite, runtime benchmarking against the 10 ms real-time budget, and
plot-ready CSV emission (trajectory overlay, convergence curve, summary
table).

One trial = re-simulate every scenario with that trial's noise seed, tune
the filter on the temporal train split (unless fixed parameters are
supplied), then score every method on the held-out test window.  Statistics
across trials use the sample standard deviation and the 95% normal-
approximation confidence interval.
"""
from __future__ import annotations

import enum
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .filters import (DivergenceError, FilterParams, StateEstimate,
                      default_init, manual_default_params, run_adaptive_ukf,
                      run_dead_reckoning, run_ekf, run_filter)
from .metrics import (AggregateStats, aggregate_stats, orientation_error_deg,
                      outage_drift as _window_drift, position_rmse)
from .pso import SwarmConfig, TuningResult, optimize
from .simulate import (ScenarioConfig, SensorDataset, partition,
                       resolve_outage_windows, simulate_scenario)

REALTIME_THRESHOLD_MS = 10.0

# Baseline EKF reference noise: filter-library convention (identity Q and R),
# as commonly deployed; the manual UKF uses the textbook defaults instead.
EKF_DEFAULT_Q = 1.0
EKF_DEFAULT_R = 1.0


class Method(enum.Enum):
    DEAD_RECKONING = "dead_reckoning"
    EKF = "ekf"
    ADAPTIVE_UKF = "adaptive_ukf"
    MANUAL_UKF = "manual_ukf"
    PSO_UKF = "pso_ukf"


ALL_METHODS = tuple(Method)


# ---------------------------------------------------------------------------
# Estimate-sequence metrics (thin wrappers over the array metrics)
# ---------------------------------------------------------------------------

def _stack_estimates(estimates) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = np.array([e.t for e in estimates])
    mean = np.stack([e.mean for e in estimates])
    return t, mean[:, :2], mean[:, 4]


def _check_aligned(t_est, t_ref):
    if len(t_est) != len(t_ref) or not np.allclose(t_est, t_ref, atol=1e-9):
        raise ValueError("estimate and truth timestamps are not aligned")


def rmse(estimates, truth) -> float:
    """2-D positional RMSE of an estimate sequence against ground truth."""
    t, xy, _ = _stack_estimates(estimates)
    _check_aligned(t, truth.t)
    return position_rmse(xy, truth.positions())


def orientation_error(estimates, truth, mode: str = "mean") -> float:
    """Mean absolute wrap-aware heading error, in degrees."""
    t, _, heading = _stack_estimates(estimates)
    _check_aligned(t, truth.t)
    return orientation_error_deg(heading, truth.heading, mode=mode)


def outage_drift(estimates, truth, outage_windows) -> float:
    """Error growth per 5 s across GPS outage windows."""
    t, xy, _ = _stack_estimates(estimates)
    _check_aligned(t, truth.t)
    return _window_drift(t, xy, truth.positions(), outage_windows)


def efficiency_improvement(manual_rmse: float, tuned_rmse: float) -> float:
    from .metrics import efficiency_improvement as _impl
    return _impl(manual_rmse, tuned_rmse)


# ---------------------------------------------------------------------------
# Suite configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteConfig:
    """Everything needed to reproduce one multi-trial evaluation run."""

    scenarios: tuple[ScenarioConfig, ...]
    n_trials: int = 20
    train_fraction: float = 0.7
    methods: tuple[Method, ...] = ALL_METHODS
    swarm: SwarmConfig = field(default_factory=SwarmConfig)
    tuning_cells: tuple[int, ...] | None = None   # indices into scenarios
    pso_params: FilterParams | None = None        # fixed params: skip tuning
    manual_params: FilterParams = field(default_factory=manual_default_params)
    ekf_q: float = EKF_DEFAULT_Q
    ekf_r: float = EKF_DEFAULT_R
    adaptive_window: int = 10
    reference: str = "truth"
    overlay_cell: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.scenarios:
            raise ValueError("suite needs at least one scenario")
        if not self.methods:
            raise ValueError("suite needs at least one method")
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.tuning_cells is not None:
            cells = tuple(int(i) for i in self.tuning_cells)
            if any(i < 0 or i >= len(self.scenarios) for i in cells):
                raise ValueError("tuning_cells index out of range")
            object.__setattr__(self, "tuning_cells", cells)
        if not (0 <= self.overlay_cell < len(self.scenarios)):
            raise ValueError("overlay_cell index out of range")


def _run_method(method: Method, dataset: SensorDataset, init: StateEstimate,
                cfg: SuiteConfig, pso_params: FilterParams | None):
    if method is Method.DEAD_RECKONING:
        return run_dead_reckoning(dataset, init)
    if method is Method.EKF:
        return run_ekf(dataset, np.full(5, cfg.ekf_q), np.full(2, cfg.ekf_r), init)
    if method is Method.ADAPTIVE_UKF:
        return run_adaptive_ukf(dataset, init, base_params=cfg.manual_params,
                                window=cfg.adaptive_window)
    if method is Method.MANUAL_UKF:
        return run_filter(cfg.manual_params, dataset, init)
    if method is Method.PSO_UKF:
        if pso_params is None:
            raise ValueError("PSO-UKF requires tuned parameters")
        return run_filter(pso_params, dataset, init)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialResult:
    """Suite-aggregated metrics for one method in one trial."""

    method: Method
    rmse_m: float
    orientation_err_deg: float
    outage_drift_m: float | None
    runtime_per_update_ms: float | None
    seed: int
    diverged: bool = False


@dataclass
class TrialRecord:
    trial: int
    params: FilterParams | None
    history: np.ndarray | None
    init_fitness: float | None
    results: dict[Method, TrialResult]
    overlay: dict | None = None


def run_trial(cfg: SuiteConfig, trial: int) -> TrialRecord:
    """Simulate, (re-)tune, and score every method for one noise seed."""
    datasets = [simulate_scenario(replace(sc, seed=sc.seed + trial))
                for sc in cfg.scenarios]

    params, history, init_fitness = cfg.pso_params, None, None
    if params is None:
        cells = cfg.tuning_cells if cfg.tuning_cells is not None \
            else tuple(range(len(datasets)))
        trains = [partition(datasets[i], cfg.train_fraction)[0] for i in cells]
        tuning = optimize(trains,
                          config=replace(cfg.swarm, seed=cfg.swarm.seed + trial),
                          reference=cfg.reference)
        params, history = tuning.best_params, tuning.history
        init_fitness = tuning.init_fitness

    per_cell: dict[Method, dict[str, list]] = {
        m: {"rmse": [], "orient": [], "drift": [], "diverged": False}
        for m in cfg.methods}
    overlay = None
    for idx, dataset in enumerate(datasets):
        t0, t1 = dataset.span
        t_split = t0 + (t1 - t0) * cfg.train_fraction
        test_mask = dataset.truth.t >= t_split
        truth_xy = dataset.truth.positions()
        init = default_init(dataset)
        windows = [(max(s, t_split), e)
                   for s, e in resolve_outage_windows(dataset.config)
                   if e > t_split]
        record_overlay = trial == 0 and idx == cfg.overlay_cell
        if record_overlay:
            overlay = {"t": dataset.truth.t.copy(), "truth": truth_xy.copy(),
                       "methods": {}}
        for method in cfg.methods:
            try:
                estimates = _run_method(method, dataset, init, cfg, params)
            except DivergenceError:
                per_cell[method]["diverged"] = True
                continue
            t_est, xy, heading = _stack_estimates(estimates)
            per_cell[method]["rmse"].append(
                position_rmse(xy[test_mask], truth_xy[test_mask]))
            per_cell[method]["orient"].append(orientation_error_deg(
                heading[test_mask], dataset.truth.heading[test_mask]))
            if windows:
                per_cell[method]["drift"].append(
                    _window_drift(t_est, xy, truth_xy, windows))
            if record_overlay:
                overlay["methods"][method] = xy.copy()

    results = {}
    for method in cfg.methods:
        cell = per_cell[method]
        diverged = cell["diverged"] or not cell["rmse"]
        results[method] = TrialResult(
            method=method,
            rmse_m=float(np.mean(cell["rmse"])) if not diverged else float("nan"),
            orientation_err_deg=float(np.mean(cell["orient"])) if not diverged else float("nan"),
            outage_drift_m=float(np.mean(cell["drift"])) if cell["drift"] and not diverged else None,
            runtime_per_update_ms=None,
            seed=trial,
            diverged=diverged,
        )
    return TrialRecord(trial=trial, params=params, history=history,
                       init_fitness=init_fitness, results=results,
                       overlay=overlay)


@dataclass(frozen=True)
class MethodStats:
    rmse: AggregateStats
    orientation_deg: AggregateStats
    drift_m_per_5s: AggregateStats | None
    runtime_ms: float | None
    rmse_per_trial: np.ndarray
    diverged_trials: int


@dataclass
class MultiTrialResult:
    config: SuiteConfig
    method_stats: dict[Method, MethodStats]
    records: list[TrialRecord]

    @property
    def convergence_histories(self) -> list[np.ndarray]:
        return [r.history for r in self.records if r.history is not None]

    @property
    def tuned_params(self) -> list[FilterParams]:
        return [r.params for r in self.records if r.params is not None]

    @property
    def overlay(self) -> dict | None:
        for r in self.records:
            if r.overlay is not None:
                return r.overlay
        return None


def multi_trial(cfg: SuiteConfig, n_trials: int | None = None,
                benchmark: bool = True) -> MultiTrialResult:
    """Run the full protocol: n_trials seeded trials of every method.

    Trials are independent and may run in worker processes (cfg.n_jobs);
    results are reduced in trial order, so any schedule yields the output
    of a serial run.
    """
    n = cfg.n_trials if n_trials is None else int(n_trials)
    if n < 2:
        raise ValueError("multi-trial statistics need n_trials >= 2")
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            records = list(pool.map(_run_trial_star,
                                    [(cfg, k) for k in range(n)]))
    else:
        records = [run_trial(cfg, k) for k in range(n)]

    runtimes = {}
    if benchmark:
        bench_ds = simulate_scenario(cfg.scenarios[cfg.overlay_cell])
        bench_params = records[0].params
        for method in cfg.methods:
            runtimes[method] = benchmark_runtime(
                method, bench_ds, repetitions=3, cfg=cfg,
                pso_params=bench_params).ms_per_update

    method_stats = {}
    for method in cfg.methods:
        trials = [r.results[method] for r in records]
        ok = [t for t in trials if not t.diverged]
        if len(ok) < 2:
            raise RuntimeError(
                f"method {method.value}: fewer than 2 successful trials")
        rmse_values = np.array([t.rmse_m for t in ok])
        drifts = [t.outage_drift_m for t in ok if t.outage_drift_m is not None]
        method_stats[method] = MethodStats(
            rmse=aggregate_stats(rmse_values),
            orientation_deg=aggregate_stats([t.orientation_err_deg for t in ok]),
            drift_m_per_5s=aggregate_stats(drifts) if len(drifts) >= 2 else None,
            runtime_ms=runtimes.get(method),
            rmse_per_trial=rmse_values,
            diverged_trials=len(trials) - len(ok),
        )
    return MultiTrialResult(config=cfg, method_stats=method_stats, records=records)


def _run_trial_star(args):
    return run_trial(*args)


# ---------------------------------------------------------------------------
# Runtime benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuntimeBenchmark:
    method: Method
    ms_per_update: float
    per_repetition_ms: tuple[float, ...]
    cycles: int

    @property
    def passes_threshold(self) -> bool:
        return self.ms_per_update < REALTIME_THRESHOLD_MS


def benchmark_runtime(method: Method, dataset: SensorDataset,
                      repetitions: int = 5, cfg: SuiteConfig | None = None,
                      pso_params: FilterParams | None = None) -> RuntimeBenchmark:
    """Median wall-clock cost of one predict(+correct) cycle, in ms.

    A warm-up pass is excluded; the per-update figure is the median over
    repetitions of (run wall time / IMU update cycles).
    """
    if repetitions < 3:
        raise ValueError("benchmark needs at least 3 repetitions")
    if cfg is None:
        cfg = SuiteConfig(scenarios=(dataset.config,), methods=(method,))
    if pso_params is None:
        pso_params = cfg.manual_params
    init = default_init(dataset)
    cycles = len(dataset.imu) - 1
    _run_method(method, dataset, init, cfg, pso_params)  # warm-up
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        _run_method(method, dataset, init, cfg, pso_params)
        samples.append((time.perf_counter() - start) * 1000.0 / cycles)
    return RuntimeBenchmark(method=method,
                            ms_per_update=float(np.median(samples)),
                            per_repetition_ms=tuple(samples), cycles=cycles)


# ---------------------------------------------------------------------------
# Plot-ready output
# ---------------------------------------------------------------------------

def _g6(x) -> str:
    if x is None:
        return "nan"
    return format(float(x), ".6g")


def emit_plot_data(result: MultiTrialResult, out_dir: str) -> dict[str, str]:
    """Write summary.csv, trajectory_overlay.csv, convergence.csv."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    lines = ["method,rmse,std,ci_low,ci_high,orient_deg,drift_m5s,runtime_ms"]
    for method in result.config.methods:
        s = result.method_stats[method]
        drift = s.drift_m_per_5s.mean if s.drift_m_per_5s else None
        lines.append(",".join([method.value, _g6(s.rmse.mean), _g6(s.rmse.std_dev),
                               _g6(s.rmse.ci95_low), _g6(s.rmse.ci95_high),
                               _g6(s.orientation_deg.mean), _g6(drift),
                               _g6(s.runtime_ms)]))
    paths["summary"] = os.path.join(out_dir, "summary.csv")
    _write_lines(paths["summary"], lines)

    overlay = result.overlay
    if overlay is not None:
        methods = list(overlay["methods"])
        header = ["t", "truth_x", "truth_y"]
        for m in methods:
            header += [f"est_x_{m.value}", f"est_y_{m.value}"]
        lines = [",".join(header)]
        for i in range(len(overlay["t"])):
            row = [_g6(overlay["t"][i]), _g6(overlay["truth"][i, 0]),
                   _g6(overlay["truth"][i, 1])]
            for m in methods:
                row += [_g6(overlay["methods"][m][i, 0]),
                        _g6(overlay["methods"][m][i, 1])]
            lines.append(",".join(row))
        paths["trajectory_overlay"] = os.path.join(out_dir, "trajectory_overlay.csv")
        _write_lines(paths["trajectory_overlay"], lines)

    histories = result.convergence_histories
    if histories:
        lines = ["generation,best_rmse"]
        for g, value in enumerate(histories[0], start=1):
            lines.append(f"{g},{_g6(value)}")
        paths["convergence"] = os.path.join(out_dir, "convergence.csv")
        _write_lines(paths["convergence"], lines)
    return paths


def _write_lines(path, lines):
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_table(result: MultiTrialResult) -> str:
    """Human-readable table in the style of the multi-trial report."""
    rows = [f"{'Method':<16} {'RMSE (m)':>12} {'Std (m)':>9} "
            f"{'95% CI (m)':>20} {'Orient (deg)':>13} {'Drift (m/5s)':>13} "
            f"{'Runtime (ms)':>13}"]
    for method in result.config.methods:
        s = result.method_stats[method]
        ci = f"[{s.rmse.ci95_low:.3f}, {s.rmse.ci95_high:.3f}]"
        drift = f"{s.drift_m_per_5s.mean:.3f}" if s.drift_m_per_5s else "-"
        runtime = f"{s.runtime_ms:.3f}" if s.runtime_ms is not None else "-"
        rows.append(f"{method.value:<16} {s.rmse.mean:>12.3f} {s.rmse.std_dev:>9.3f} "
                    f"{ci:>20} {s.orientation_deg.mean:>13.3f} {drift:>13} "
                    f"{runtime:>13}")
    return "\n".join(rows)


def stabilization_generation(history, init_fitness: float,
                             threshold: float = 0.01) -> int:
    """Last generation whose relative improvement was >= threshold (0 if none).

    Convergence is declared at this generation: every later one improves by
    less than the threshold.
    """
    values = np.concatenate([[init_fitness], np.asarray(history, float)])
    last = 0
    for g in range(1, len(values)):
        prev = values[g - 1]
        if prev > 0 and (prev - values[g]) / prev >= threshold:
            last = g
    return last
