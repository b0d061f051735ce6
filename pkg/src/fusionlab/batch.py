"""Vectorized UKF evaluation of many parameter sets over one dataset.

The swarm optimizer evaluates ~1500 candidate parameter sets per tuning run;
running them one by one through ``run_filter`` is dominated by Python
overhead.  This module advances all B candidate filters in lock step with
stacked (B, ...) arrays, so each IMU interval costs a handful of numpy calls
regardless of B.  Per-candidate results match ``run_filter`` to numerical
round-off (covered by tests); candidates whose covariance cannot be kept
positive definite are flagged diverged and report infinite error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import (DivergenceError, FilterParams, N_MEAS, N_STATE,
                      StateEstimate, conditioned_cholesky, default_init)
from .simulate import SensorDataset
from .util import wrap_angle

_TIME_TOL = 1e-9
_DIAG = np.arange(N_STATE)


def _stack_params(param_sets: list[FilterParams]):
    alpha = np.array([p.alpha for p in param_sets])
    kappa = np.array([p.kappa for p in param_sets])
    beta = np.array([p.beta for p in param_sets])
    q = np.stack([p.q_diag for p in param_sets])
    r = np.stack([p.r_diag for p in param_sets])
    c = alpha * alpha * (N_STATE + kappa)  # n + lambda, > 0 for valid params
    if np.any(c <= 0):
        raise ValueError("alpha^2 * (n + kappa) must be > 0 for every candidate")
    lam = c - N_STATE
    n_pts = 2 * N_STATE + 1
    w_mean = np.broadcast_to(1.0 / (2.0 * c)[:, None], (len(c), n_pts)).copy()
    w_cov = w_mean.copy()
    w_mean[:, 0] = lam / c
    w_cov[:, 0] = lam / c + (1.0 - alpha * alpha + beta)
    scale = alpha * np.sqrt(N_STATE + kappa)
    return q, r, w_mean, w_cov, scale


def _batch_cholesky(covs, diverged):
    """Stacked Cholesky with per-element jitter fallback."""
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    bad = ~np.isfinite(covs).all(axis=(1, 2))
    if bad.any():
        diverged |= bad
        covs[bad] = np.eye(N_STATE)
    try:
        return np.linalg.cholesky(covs), covs, diverged
    except np.linalg.LinAlgError:
        pass
    L = np.empty_like(covs)
    for b in range(len(covs)):
        if diverged[b]:
            covs[b] = np.eye(N_STATE)
            L[b] = np.eye(N_STATE)
            continue
        try:
            L[b], covs[b] = conditioned_cholesky(covs[b])
        except DivergenceError:
            diverged[b] = True
            covs[b] = np.eye(N_STATE)
            L[b] = np.eye(N_STATE)
    return L, covs, diverged


def _sigma_points(means, covs, scale, diverged):
    L, covs, diverged = _batch_cholesky(covs, diverged)
    spread = scale[:, None, None] * np.swapaxes(L, 1, 2)
    pts = np.empty((len(means), 2 * N_STATE + 1, N_STATE))
    pts[:, 0] = means
    pts[:, 1:N_STATE + 1] = means[:, None, :] + spread
    pts[:, N_STATE + 1:] = means[:, None, :] - spread
    return pts, covs, diverged


@dataclass(frozen=True)
class BatchResult:
    rmse: np.ndarray       # (B,), +inf where diverged
    diverged: np.ndarray   # (B,) bool
    n_scored: int          # samples behind each RMSE


def run_ukf_batch(param_sets: list[FilterParams], dataset: SensorDataset,
                  init: StateEstimate | None = None,
                  reference: str = "truth") -> BatchResult:
    """Position RMSE of every candidate parameter set over one dataset.

    reference selects the error target: exact simulator truth at every IMU
    timestamp ('truth') or the raw GPS fixes at their own timestamps
    ('gps', invalid fixes excluded).  Diverged candidates score +inf.
    """
    if reference not in ("truth", "gps"):
        raise ValueError("reference must be 'truth' or 'gps'")
    B = len(param_sets)
    if B == 0:
        raise ValueError("no parameter sets to evaluate")
    q, r, w_mean, w_cov, scale = _stack_params(param_sets)
    state0 = default_init(dataset) if init is None else init

    imu = dataset.imu
    gps = dataset.gps
    n = len(imu)
    t_grid = imu.t
    means = np.broadcast_to(state0.mean, (B, N_STATE)).copy()
    covs = np.broadcast_to(state0.cov, (B, N_STATE, N_STATE)).copy()
    diverged = np.zeros(B, dtype=bool)

    if reference == "truth":
        ref_xy = dataset.truth.positions()
        score_at = np.ones(n, dtype=bool)
    else:
        ref_xy = np.full((n, 2), np.nan)
        score_at = np.zeros(n, dtype=bool)

    # Map GPS fixes onto the IMU grid once.
    fix_of_step = np.full(n, -1)
    j = 0
    for k in range(n):
        while j < len(gps) and gps.t[j] < t_grid[k] - _TIME_TOL:
            j += 1
        if j < len(gps) and abs(gps.t[j] - t_grid[k]) <= _TIME_TOL:
            fix_of_step[k] = j
            if reference == "gps" and gps.valid[j]:
                ref_xy[k] = (gps.x[j], gps.y[j])
                score_at[k] = True
            j += 1

    sq_sum = np.zeros(B)
    n_scored = int(score_at.sum())
    t_prev = state0.t
    for k in range(n):
        t_k = float(t_grid[k])
        dt = t_k - t_prev
        if dt > _TIME_TOL:
            kk = max(k - 1, 0)
            ax, ay = float(imu.ax[kk]), float(imu.ay[kk])
            gz = float(imu.yaw_rate[kk])
            pts, covs, diverged = _sigma_points(means, covs, scale, diverged)
            heading = pts[..., 4]
            c, sn = np.cos(heading), np.sin(heading)
            awx = c * ax - sn * ay
            awy = sn * ax + c * ay
            prop = np.empty_like(pts)
            prop[..., 0] = pts[..., 0] + pts[..., 2] * dt + 0.5 * awx * dt * dt
            prop[..., 1] = pts[..., 1] + pts[..., 3] * dt + 0.5 * awy * dt * dt
            prop[..., 2] = pts[..., 2] + awx * dt
            prop[..., 3] = pts[..., 3] + awy * dt
            prop[..., 4] = heading + gz * dt
            means = np.einsum("bj,bjd->bd", w_mean, prop)
            diff = prop - means[:, None, :]
            covs = np.einsum("bj,bji,bjd->bid", w_cov, diff, diff)
            covs[:, _DIAG, _DIAG] += q * dt
            means[:, 4] = wrap_angle(means[:, 4])
            t_prev = t_k
        jfix = fix_of_step[k]
        if jfix >= 0 and gps.valid[jfix]:
            z = np.array([gps.x[jfix], gps.y[jfix]])
            pts, covs, diverged = _sigma_points(means, covs, scale, diverged)
            Z = pts[..., :N_MEAS]
            z_pred = np.einsum("bj,bjd->bd", w_mean, Z)
            dz = Z - z_pred[:, None, :]
            P_zz = np.einsum("bj,bji,bjd->bid", w_cov, dz, dz)
            S = P_zz.copy()
            S[:, 0, 0] += r[:, 0]
            S[:, 1, 1] += r[:, 1]
            det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
            ok = np.isfinite(det) & (np.abs(det) > 1e-300)
            diverged |= ~ok
            det = np.where(ok, det, 1.0)
            S_inv = np.empty_like(S)
            S_inv[:, 0, 0] = S[:, 1, 1] / det
            S_inv[:, 1, 1] = S[:, 0, 0] / det
            S_inv[:, 0, 1] = -S[:, 0, 1] / det
            S_inv[:, 1, 0] = -S[:, 1, 0] / det
            dx = pts - means[:, None, :]
            P_xz = np.einsum("bj,bji,bjd->bid", w_cov, dx, dz)
            K = P_xz @ S_inv
            innov = z[None, :] - z_pred
            means = means + np.einsum("bij,bj->bi", K, innov)
            means[:, 4] = wrap_angle(means[:, 4])
            covs = covs - K @ S @ np.swapaxes(K, 1, 2)
        if score_at[k]:
            err = means[:, :2] - ref_xy[k]
            sq_sum += np.where(diverged, 0.0, err[:, 0] ** 2 + err[:, 1] ** 2)
        bad = ~np.isfinite(means).all(axis=1)
        if bad.any():
            diverged |= bad
            means[bad] = 0.0
            covs[bad] = np.eye(N_STATE)

    if n_scored == 0:
        raise ValueError("no reference samples to score against")
    rmse = np.sqrt(sq_sum / n_scored)
    rmse[diverged] = np.inf
    return BatchResult(rmse=rmse, diverged=diverged, n_scored=n_scored)
