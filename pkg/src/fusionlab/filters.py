"""State estimators over the planar vehicle model.

State vector (5): position x, y [m]; velocity vx, vy [m/s]; heading [rad].
Process model (zero-order hold over one IMU interval dt, body-frame inputs
ax, ay and yaw rate from the gyro):

    heading' = heading + yaw_rate * dt
    a_world  = R(heading) @ (ax, ay)
    v'       = v + a_world * dt
    p'       = p + v * dt + 0.5 * a_world * dt**2

Measurement model: GPS observes position (x, y) only.

Implemented estimators: a Merwe-scaled sigma-point UKF, an EKF with analytic
Jacobians of the same models, IMU-only dead reckoning (strapdown), and a UKF
with innovation-based measurement-noise adaptation.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .simulate import GpsFix, ImuSample, SensorDataset
from .util import wrap_angle

N_STATE = 5
N_MEAS = 2

# Tuning search space (shared with the swarm optimizer).
ALPHA_BOUNDS = (1e-3, 1.0)
BETA_BOUNDS = (0.0, 3.0)
KAPPA_BOUNDS = (0.0, 5.0)
NOISE_BOUNDS = (1e-5, 10.0)

# Covariance conditioning: jitter ladder added to the diagonal on
# square-root failure before declaring divergence.
_JITTER_START = 1e-9
_JITTER_MAX = 1e-3

# Loose priors used when initializing from the first GPS fixes.
INIT_COV_DIAG = (10.0, 10.0, 4.0, 4.0, 0.5)

_TIME_TOL = 1e-9


class DivergenceError(RuntimeError):
    """Filter covariance could not be kept positive definite."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t={t:.3f} s)")
        self.t = t


@dataclass(frozen=True)
class FilterParams:
    """The tunable quintuple: sigma-point scaling plus diagonal Q and R.

    Values outside the tuning search space are accepted (manual
    experiments) and reported by ``in_search_bounds``.
    """

    alpha: float
    beta: float
    kappa: float
    q_diag: np.ndarray = field(default_factory=lambda: np.full(N_STATE, 0.1))
    r_diag: np.ndarray = field(default_factory=lambda: np.ones(N_MEAS))

    def __post_init__(self):
        object.__setattr__(self, "q_diag", np.asarray(self.q_diag, float).copy())
        object.__setattr__(self, "r_diag", np.asarray(self.r_diag, float).copy())
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError("alpha must be finite and > 0")
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if not np.isfinite(self.kappa):
            raise ValueError("kappa must be finite")
        if self.q_diag.ndim != 1 or np.any(self.q_diag <= 0) or not np.all(np.isfinite(self.q_diag)):
            raise ValueError("q_diag entries must be finite and > 0")
        if self.r_diag.ndim != 1 or np.any(self.r_diag <= 0) or not np.all(np.isfinite(self.r_diag)):
            raise ValueError("r_diag entries must be finite and > 0")

    @classmethod
    def isotropic(cls, alpha: float, beta: float, kappa: float,
                  q: float, r: float) -> "FilterParams":
        """Scalar Q/R convenience: Q = q*I, R = r*I."""
        return cls(alpha, beta, kappa, np.full(N_STATE, float(q)), np.full(N_MEAS, float(r)))

    @property
    def in_search_bounds(self) -> bool:
        lo, hi = NOISE_BOUNDS
        return (ALPHA_BOUNDS[0] <= self.alpha <= ALPHA_BOUNDS[1]
                and BETA_BOUNDS[0] <= self.beta <= BETA_BOUNDS[1]
                and KAPPA_BOUNDS[0] <= self.kappa <= KAPPA_BOUNDS[1]
                and bool(np.all((self.q_diag >= lo) & (self.q_diag <= hi)))
                and bool(np.all((self.r_diag >= lo) & (self.r_diag <= hi))))


# Textbook reference configuration for the untuned ("manual") UKF.
def manual_default_params() -> FilterParams:
    return FilterParams.isotropic(alpha=1e-3, beta=2.0, kappa=0.0, q=0.1, r=1.0)


@dataclass(frozen=True)
class StateEstimate:
    t: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float).copy())
        object.__setattr__(self, "cov", np.asarray(self.cov, float).copy())

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def heading(self) -> float:
        return float(self.mean[4])


@dataclass(frozen=True)
class SigmaSet:
    points: np.ndarray   # (2n+1, n)
    w_mean: np.ndarray   # (2n+1,)
    w_cov: np.ndarray    # (2n+1,)


def merwe_weights(alpha: float, beta: float, kappa: float, n: int
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance recombination weights of the scaled transform."""
    c = alpha * alpha * (n + kappa)   # n + lambda
    if c <= 0:
        raise ValueError("alpha^2 * (n + kappa) must be > 0")
    lam = c - n
    w_mean = np.full(2 * n + 1, 1.0 / (2.0 * c))
    w_cov = w_mean.copy()
    w_mean[0] = lam / c
    w_cov[0] = lam / c + (1.0 - alpha * alpha + beta)
    return w_mean, w_cov


def conditioned_cholesky(cov: np.ndarray, t: float | None = None
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factor, adding escalating diagonal jitter if needed.

    Returns (L, conditioned_cov).  Raises DivergenceError once the jitter
    ladder is exhausted.
    """
    sym = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(sym)):
        raise DivergenceError("covariance contains non-finite entries", t)
    try:
        return np.linalg.cholesky(sym), sym
    except np.linalg.LinAlgError:
        pass
    jitter = _JITTER_START
    eye = np.eye(len(sym))
    while jitter <= _JITTER_MAX:
        try:
            bumped = sym + jitter * eye
            return np.linalg.cholesky(bumped), bumped
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise DivergenceError("covariance not positive definite after max jitter", t)


def merwe_sigma_points(mean: np.ndarray, cov: np.ndarray,
                       params: FilterParams) -> SigmaSet:
    """2n+1 Merwe-scaled sigma points: mean +/- columns of sqrt((n+lambda) cov)."""
    mean = np.asarray(mean, float)
    n = len(mean)
    w_mean, w_cov = merwe_weights(params.alpha, params.beta, params.kappa, n)
    scale = params.alpha * np.sqrt(n + params.kappa)
    L, _ = conditioned_cholesky(np.asarray(cov, float))
    spread = scale * L.T  # row i = scaled column i of L
    points = np.empty((2 * n + 1, n))
    points[0] = mean
    points[1:n + 1] = mean + spread
    points[n + 1:] = mean - spread
    return SigmaSet(points=points, w_mean=w_mean, w_cov=w_cov)


# ---------------------------------------------------------------------------
# Process / measurement models
# ---------------------------------------------------------------------------

def process_model(states: np.ndarray, ax: float, ay: float,
                  yaw_rate: float, dt: float) -> np.ndarray:
    """Propagate state vectors (shape (..., 5)) one IMU interval."""
    s = np.asarray(states, float)
    out = np.empty_like(s)
    heading = s[..., 4]
    c, sn = np.cos(heading), np.sin(heading)
    awx = c * ax - sn * ay
    awy = sn * ax + c * ay
    out[..., 0] = s[..., 0] + s[..., 2] * dt + 0.5 * awx * dt * dt
    out[..., 1] = s[..., 1] + s[..., 3] * dt + 0.5 * awy * dt * dt
    out[..., 2] = s[..., 2] + awx * dt
    out[..., 3] = s[..., 3] + awy * dt
    out[..., 4] = heading + yaw_rate * dt
    return out


def process_jacobian(state: np.ndarray, ax: float, ay: float,
                     yaw_rate: float, dt: float) -> np.ndarray:
    """Analytic d(process_model)/d(state) at one state."""
    heading = float(state[4])
    c, sn = np.cos(heading), np.sin(heading)
    awx = c * ax - sn * ay
    awy = sn * ax + c * ay
    # d(a_world)/d(heading)
    dax, day = -awy, awx
    F = np.eye(N_STATE)
    F[0, 2] = dt
    F[1, 3] = dt
    F[0, 4] = 0.5 * dt * dt * dax
    F[1, 4] = 0.5 * dt * dt * day
    F[2, 4] = dt * dax
    F[3, 4] = dt * day
    return F


# ---------------------------------------------------------------------------
# UKF steps
# ---------------------------------------------------------------------------

def ukf_predict(state: StateEstimate, imu: ImuSample, dt: float,
                params: FilterParams) -> StateEstimate:
    """Propagate sigma points through the process model and recombine."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if len(params.q_diag) != N_STATE:
        raise ValueError(f"q_diag must have length {N_STATE}")
    sig = merwe_sigma_points(state.mean, state.cov, params)
    prop = process_model(sig.points, imu.ax, imu.ay, imu.yaw_rate, dt)
    mean = sig.w_mean @ prop
    diff = prop - mean
    cov = np.einsum("j,ji,jk->ik", sig.w_cov, diff, diff)
    cov[np.diag_indices_from(cov)] += params.q_diag * dt
    cov = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(cov)):
        raise DivergenceError("predicted covariance diverged", state.t)
    mean[4] = wrap_angle(mean[4])
    return StateEstimate(t=state.t + dt, mean=mean, cov=cov)


def _unscented_position_update(mean, cov, z, params, r_diag, t=None):
    """Shared unscented update against the position-only measurement.

    Returns (mean', cov', innovation, pre-noise measurement variance diag).
    """
    sig = merwe_sigma_points(mean, cov, params)
    Z = sig.points[:, :N_MEAS]
    z_pred = sig.w_mean @ Z
    dz = Z - z_pred
    P_zz = np.einsum("j,ji,jk->ik", sig.w_cov, dz, dz)
    S = P_zz + np.diag(r_diag)
    dx = sig.points - mean
    P_xz = np.einsum("j,ji,jk->ik", sig.w_cov, dx, dz)
    try:
        K = np.linalg.solve(S.T, P_xz.T).T
    except np.linalg.LinAlgError:
        raise DivergenceError("innovation covariance is singular", t) from None
    innov = z - z_pred
    new_mean = mean + K @ innov
    new_mean[4] = wrap_angle(new_mean[4])
    new_cov = cov - K @ S @ K.T
    new_cov = 0.5 * (new_cov + new_cov.T)
    return new_mean, new_cov, innov, np.diag(P_zz).copy()


def ukf_update(state: StateEstimate, fix: GpsFix,
               params: FilterParams) -> StateEstimate:
    """Condition the state on one valid GPS position fix."""
    if not fix.valid:
        raise ValueError("cannot update on an invalid GPS fix")
    if len(params.r_diag) != N_MEAS:
        raise ValueError(f"r_diag must have length {N_MEAS}")
    z = np.array([fix.x, fix.y])
    mean, cov, _, _ = _unscented_position_update(
        state.mean, state.cov, z, params, params.r_diag, t=state.t)
    return StateEstimate(t=state.t, mean=mean, cov=cov)


# ---------------------------------------------------------------------------
# Whole-dataset runs
# ---------------------------------------------------------------------------

def default_init(dataset: SensorDataset,
                 heading_baseline_s: float = 2.0) -> StateEstimate:
    """Initialize at the first valid GPS fix with zero velocity and loose
    diagonal covariance priors.

    The initial heading is the course between the first valid fix and the
    first valid fix at least ``heading_baseline_s`` later (the last one if
    none is that late): adjacent 5 Hz fixes are separated by well under the
    per-fix noise, so a course over a short baseline is essentially random.
    """
    gps = dataset.gps
    valid_idx = np.flatnonzero(gps.valid)
    if len(valid_idx) < 2:
        raise ValueError("need at least two valid GPS fixes to initialize")
    i0 = valid_idx[0]
    later = valid_idx[gps.t[valid_idx] >= gps.t[i0] + heading_baseline_s]
    i1 = later[0] if len(later) else valid_idx[-1]
    heading = np.arctan2(gps.y[i1] - gps.y[i0], gps.x[i1] - gps.x[i0])
    mean = np.array([gps.x[i0], gps.y[i0], 0.0, 0.0, heading])
    return StateEstimate(t=float(gps.t[i0]), mean=mean, cov=np.diag(INIT_COV_DIAG))


class _FixCursor:
    """Walk the GPS stream in step with the IMU grid."""

    def __init__(self, gps):
        self.gps = gps
        self.j = 0

    def fix_at(self, t_k):
        """Fix matching t_k (within tolerance), or None."""
        gps = self.gps
        while self.j < len(gps) and gps.t[self.j] < t_k - _TIME_TOL:
            self.j += 1
        if self.j < len(gps) and abs(gps.t[self.j] - t_k) <= _TIME_TOL:
            fix = gps.sample(self.j)
            self.j += 1
            return fix
        return None


def run_filter(params: FilterParams, dataset: SensorDataset,
               init: StateEstimate | None = None,
               stats: dict | None = None) -> list[StateEstimate]:
    """UKF pass over the dataset: predict on each IMU interval, update on
    every valid matching GPS fix, pure prediction through outages.

    Emits one estimate per IMU timestamp.  Divergence raises with the
    failure timestamp.
    """
    imu, n = dataset.imu, len(dataset.imu)
    if n == 0:
        raise ValueError("dataset has no IMU samples")
    state = default_init(dataset) if init is None else init
    cursor = _FixCursor(dataset.gps)
    counters = {"predicts": 0, "updates": 0, "skipped_fixes": 0}
    out = []
    for k in range(n):
        t_k = float(imu.t[k])
        dt = t_k - state.t
        if dt > _TIME_TOL:
            state = ukf_predict(state, imu.sample(max(k - 1, 0)), dt, params)
            counters["predicts"] += 1
        fix = cursor.fix_at(t_k)
        if fix is not None:
            if fix.valid:
                state = ukf_update(state, fix, params)
                counters["updates"] += 1
            else:
                counters["skipped_fixes"] += 1
        out.append(StateEstimate(t=t_k, mean=state.mean, cov=state.cov))
    if stats is not None:
        stats.update(counters)
    return out


def run_dead_reckoning(dataset: SensorDataset,
                       init: StateEstimate | None = None) -> list[StateEstimate]:
    """Strapdown integration of the IMU stream alone (no GPS corrections)."""
    imu, n = dataset.imu, len(dataset.imu)
    if n == 0:
        raise ValueError("dataset has no IMU samples")
    state = default_init(dataset) if init is None else init
    mean = state.mean.copy()
    t = state.t
    zero_cov = np.zeros((N_STATE, N_STATE))
    out = []
    for k in range(n):
        t_k = float(imu.t[k])
        dt = t_k - t
        if dt > _TIME_TOL:
            j = max(k - 1, 0)
            mean = process_model(mean, float(imu.ax[j]), float(imu.ay[j]),
                                 float(imu.yaw_rate[j]), dt)
            mean[4] = wrap_angle(mean[4])
            t = t_k
        out.append(StateEstimate(t=t_k, mean=mean, cov=zero_cov))
    return out


def run_ekf(dataset: SensorDataset, q_diag, r_diag,
            init: StateEstimate | None = None,
            stats: dict | None = None) -> list[StateEstimate]:
    """EKF with analytic Jacobians of the same process/measurement models."""
    q_diag = np.asarray(q_diag, float)
    r_diag = np.asarray(r_diag, float)
    if len(q_diag) != N_STATE or len(r_diag) != N_MEAS:
        raise ValueError("q_diag/r_diag length mismatch")
    imu, n = dataset.imu, len(dataset.imu)
    if n == 0:
        raise ValueError("dataset has no IMU samples")
    state = default_init(dataset) if init is None else init
    mean, cov, t = state.mean.copy(), state.cov.copy(), state.t
    H = np.zeros((N_MEAS, N_STATE))
    H[0, 0] = H[1, 1] = 1.0
    R = np.diag(r_diag)
    cursor = _FixCursor(dataset.gps)
    counters = {"predicts": 0, "updates": 0, "skipped_fixes": 0}
    out = []
    for k in range(n):
        t_k = float(imu.t[k])
        dt = t_k - t
        if dt > _TIME_TOL:
            j = max(k - 1, 0)
            ax, ay = float(imu.ax[j]), float(imu.ay[j])
            gz = float(imu.yaw_rate[j])
            F = process_jacobian(mean, ax, ay, gz, dt)
            mean = process_model(mean, ax, ay, gz, dt)
            mean[4] = wrap_angle(mean[4])
            cov = F @ cov @ F.T
            cov[np.diag_indices_from(cov)] += q_diag * dt
            cov = 0.5 * (cov + cov.T)
            if not np.all(np.isfinite(cov)):
                raise DivergenceError("EKF covariance diverged", t_k)
            t = t_k
            counters["predicts"] += 1
        fix = cursor.fix_at(t_k)
        if fix is not None:
            if fix.valid:
                z = np.array([fix.x, fix.y])
                S = H @ cov @ H.T + R
                try:
                    K = np.linalg.solve(S.T, (cov @ H.T).T).T
                except np.linalg.LinAlgError:
                    raise DivergenceError("EKF innovation covariance singular",
                                          t_k) from None
                mean = mean + K @ (z - H @ mean)
                mean[4] = wrap_angle(mean[4])
                cov = cov - K @ S @ K.T
                cov = 0.5 * (cov + cov.T)
                conditioned_cholesky(cov, t_k)  # health check
                counters["updates"] += 1
            else:
                counters["skipped_fixes"] += 1
        out.append(StateEstimate(t=t_k, mean=mean, cov=cov))
    if stats is not None:
        stats.update(counters)
    return out


def run_adaptive_ukf(dataset: SensorDataset,
                     init: StateEstimate | None = None,
                     base_params: FilterParams | None = None,
                     window: int = 10,
                     r_floor: float = 1e-5,
                     r_cap: float = NOISE_BOUNDS[1],
                     r_trace: list | None = None) -> list[StateEstimate]:
    """UKF whose measurement noise tracks recent innovation magnitudes.

    After each update the diagonal of R is re-estimated as the moving
    average (over the last ``window`` updates) of innovation**2 minus the
    predicted measurement variance, floored at ``r_floor``.  The estimate
    is also capped at ``r_cap`` (the search-space ceiling): without a cap
    the estimator can talk itself out of using GPS at all, since inflated
    R keeps innovations large, which inflates R further.
    """
    params = manual_default_params() if base_params is None else base_params
    imu, n = dataset.imu, len(dataset.imu)
    if n == 0:
        raise ValueError("dataset has no IMU samples")
    state = default_init(dataset) if init is None else init
    cursor = _FixCursor(dataset.gps)
    r_diag = params.r_diag.copy()
    history: deque = deque(maxlen=window)
    out = []
    for k in range(n):
        t_k = float(imu.t[k])
        dt = t_k - state.t
        if dt > _TIME_TOL:
            state = ukf_predict(state, imu.sample(max(k - 1, 0)), dt, params)
        fix = cursor.fix_at(t_k)
        if fix is not None and fix.valid:
            z = np.array([fix.x, fix.y])
            mean, cov, innov, pzz = _unscented_position_update(
                state.mean, state.cov, z, params, r_diag, t=t_k)
            state = StateEstimate(t=t_k, mean=mean, cov=cov)
            history.append(innov * innov - pzz)
            r_diag = np.clip(np.mean(history, axis=0), r_floor, r_cap)
            if r_trace is not None:
                r_trace.append(r_diag.copy())
        out.append(StateEstimate(t=t_k, mean=state.mean, cov=state.cov))
    return out
