"""Evaluation metrics: positional RMSE, efficiency gain, orientation error,
outage drift, and multi-trial aggregate statistics with 95% confidence
intervals (normal approximation, mean +/- 1.96 s / sqrt(n))."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import wrap_angle

Z_95 = 1.96


def position_rmse(est_xy: np.ndarray, ref_xy: np.ndarray) -> float:
    """Root mean square of per-sample Euclidean position error."""
    est_xy = np.asarray(est_xy, float)
    ref_xy = np.asarray(ref_xy, float)
    if est_xy.shape != ref_xy.shape or est_xy.ndim != 2 or est_xy.shape[1] != 2:
        raise ValueError("positions must be matching (N, 2) arrays")
    if len(est_xy) == 0:
        raise ValueError("cannot compute RMSE of an empty trajectory")
    err = est_xy - ref_xy
    return float(np.sqrt(np.mean(err[:, 0] ** 2 + err[:, 1] ** 2)))


def efficiency_improvement(manual_rmse: float, tuned_rmse: float) -> float:
    """Relative RMSE reduction of the tuned filter, in percent."""
    if manual_rmse <= 0:
        raise ValueError("manual RMSE must be > 0")
    return 100.0 * (manual_rmse - tuned_rmse) / manual_rmse


def orientation_error_deg(est_heading: np.ndarray, true_heading: np.ndarray,
                          mode: str = "mean") -> float:
    """Average absolute heading error in degrees, wrap-aware.

    mode 'mean' is the mean absolute error; 'rms' the root mean square.
    """
    est_heading = np.asarray(est_heading, float)
    true_heading = np.asarray(true_heading, float)
    if est_heading.shape != true_heading.shape:
        raise ValueError("heading arrays must have matching shapes")
    err = np.abs(wrap_angle(est_heading - true_heading))
    if mode == "mean":
        value = np.mean(err)
    elif mode == "rms":
        value = np.sqrt(np.mean(err ** 2))
    else:
        raise ValueError("mode must be 'mean' or 'rms'")
    return float(np.degrees(value))


def outage_drift(t: np.ndarray, est_xy: np.ndarray, ref_xy: np.ndarray,
                 outage_windows) -> float:
    """Mean growth of position error across outage windows, per 5 seconds.

    For each window the error growth is ||err(end)|| - ||err(start)||
    scaled by 5 / window_length; the mean over windows is floored at 0.
    """
    windows = list(outage_windows)
    if not windows:
        raise ValueError("no outage windows")
    t = np.asarray(t, float)
    err = np.linalg.norm(np.asarray(est_xy, float) - np.asarray(ref_xy, float), axis=1)
    growths = []
    for start, end in windows:
        inside = np.flatnonzero((t >= start) & (t <= end))
        if len(inside) < 2:
            continue
        growth = err[inside[-1]] - err[inside[0]]
        growths.append(growth * 5.0 / (end - start))
    if not growths:
        raise ValueError("no outage window overlaps the evaluated samples")
    return max(float(np.mean(growths)), 0.0)


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    std_dev: float
    ci95_low: float
    ci95_high: float
    n_trials: int


def aggregate_stats(samples) -> AggregateStats:
    """Sample mean, n-1 standard deviation, and the 95% normal CI."""
    values = np.asarray(list(samples), float)
    n = len(values)
    if n < 2:
        raise ValueError("need at least 2 samples for aggregate statistics")
    if not np.all(np.isfinite(values)):
        raise ValueError("aggregate statistics require finite samples")
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1))
    half = Z_95 * std / np.sqrt(n)
    return AggregateStats(mean=mean, std_dev=std,
                          ci95_low=mean - half, ci95_high=mean + half,
                          n_trials=n)
