"""Synthetic driving scenarios: ground-truth kinematics plus noisy IMU/GPS streams.

Five maneuvers (straight cruise over 500 m, sharp 90-degree turn, rapid
acceleration to 60 km/h in 5 s, abrupt braking from 50 km/h in 2 s, and an
urban loop with GPS outages) are built from piecewise closed-form segments
(constant-acceleration straights and constant-rate circular arcs), so
positions, velocities, headings and body-frame accelerations are mutually
consistent to floating-point accuracy.  Sensor synthesis adds Gaussian white
noise and integrated bias random walks on top of the exact kinematics.

Everything is a pure function of (config, noise profile, seed): same inputs,
same output bytes.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .util import child_seed, fmt_float, wrap_angle

KMH = 1.0 / 3.6  # km/h in m/s

# Per-maneuver profile constants.
CRUISE_DISTANCE_M = 500.0
TURN_RADIUS_M = 16.0
TURN_DEFAULT_SPEED = 8.0
ACCEL_TARGET_SPEED = 60.0 * KMH
ACCEL_RAMP_S = 5.0
BRAKE_ENTRY_SPEED = 50.0 * KMH
BRAKE_RAMP_S = 2.0
BRAKE_TAIL_S = 2.0
OUTAGE_DEFAULT_SPEED = 12.0
OUTAGE_TURN_RATE = 0.3  # rad/s for the urban-loop weave

# Independent noise stream indices (see util.child_seed).
_STREAM_IMU = 0
_STREAM_GPS = 1
_STREAM_OUTAGE = 2


class Maneuver(enum.Enum):
    STRAIGHT_CRUISE_500M = "straight_cruise_500m"
    SHARP_TURN_90 = "sharp_turn_90"
    RAPID_ACCEL_0_60 = "rapid_accel_0_60"
    ABRUPT_BRAKE_50_0 = "abrupt_brake_50_0"
    GPS_OUTAGE = "gps_outage"


class Environment(enum.Enum):
    CLEAR = "clear"
    NIGHT = "night"
    RAIN = "rain"
    FOG = "fog"
    SLIPPERY = "slippery"


@dataclass(frozen=True)
class NoiseProfile:
    """Sensor noise magnitudes for one environment.

    gps_sigma is per-axis position noise in meters; accel/gyro sigmas are
    white measurement noise; the bias walks are random-walk intensities
    (standard deviation growth per sqrt-second).  lateral_accel_scale
    multiplies body-y accelerometer noise (slippery-road disturbance).
    """

    gps_sigma: float = 1.5
    accel_sigma: float = 0.05
    gyro_sigma: float = 0.005
    accel_bias_walk: float = 0.001
    gyro_bias_walk: float = 0.0001
    lateral_accel_scale: float = 1.0

    def __post_init__(self):
        for name in ("gps_sigma", "accel_sigma", "gyro_sigma",
                     "accel_bias_walk", "gyro_bias_walk", "lateral_accel_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"NoiseProfile.{name} must be >= 0")

    def scaled(self, gps=1.0, imu=1.0, lateral=1.0) -> "NoiseProfile":
        return NoiseProfile(
            gps_sigma=self.gps_sigma * gps,
            accel_sigma=self.accel_sigma * imu,
            gyro_sigma=self.gyro_sigma * imu,
            accel_bias_walk=self.accel_bias_walk * imu,
            gyro_bias_walk=self.gyro_bias_walk * imu,
            lateral_accel_scale=self.lateral_accel_scale * lateral,
        )


_CLEAR = NoiseProfile()
ENVIRONMENT_PROFILES: dict[Environment, NoiseProfile] = {
    Environment.CLEAR: _CLEAR,
    Environment.NIGHT: _CLEAR.scaled(gps=1.2),
    Environment.RAIN: _CLEAR.scaled(gps=2.0, imu=1.5),
    Environment.FOG: _CLEAR.scaled(gps=3.0),
    Environment.SLIPPERY: _CLEAR.scaled(lateral=2.0),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One maneuver x environment x seed experiment."""

    maneuver: Maneuver
    environment: Environment = Environment.CLEAR
    duration_s: float = 30.0
    imu_rate_hz: float = 100.0
    gps_rate_hz: float = 5.0
    seed: int = 0
    outage_windows: tuple[tuple[float, float], ...] = ()
    speed_mps: float | None = None  # None -> maneuver default

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be > 0")
        if self.imu_rate_hz <= 0 or self.gps_rate_hz <= 0:
            raise ValueError("sensor rates must be > 0")
        ratio = self.imu_rate_hz / self.gps_rate_hz
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("imu_rate_hz must be an integer multiple of gps_rate_hz")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.speed_mps is not None and self.speed_mps <= 0:
            raise ValueError("speed_mps must be > 0")
        object.__setattr__(self, "outage_windows",
                           tuple((float(a), float(b)) for a, b in self.outage_windows))
        _validate_windows(self.outage_windows, self.duration_s,
                          require_3_to_5=self.maneuver is Maneuver.GPS_OUTAGE)

    @property
    def decimation(self) -> int:
        return int(round(self.imu_rate_hz / self.gps_rate_hz))


def _validate_windows(windows, duration, require_3_to_5):
    prev_end = -math.inf
    for start, end in sorted(windows):
        if not (0.0 <= start < end <= duration):
            raise ValueError(f"outage window ({start}, {end}) outside [0, {duration}]")
        if start < prev_end:
            raise ValueError("outage windows must be disjoint")
        if require_3_to_5 and not (3.0 <= end - start <= 5.0):
            raise ValueError("GPS-outage windows must last between 3 and 5 seconds")
        prev_end = end


def resolve_outage_windows(config: ScenarioConfig) -> tuple[tuple[float, float], ...]:
    """Outage windows for a scenario; drawn from the seed when not explicit.

    For the GPS-outage maneuver with no explicit windows, window lengths are
    uniform in [3, 5] s and start times uniform over the feasible span,
    re-drawn until disjoint.  Other maneuvers default to no outage.
    """
    if config.outage_windows:
        return config.outage_windows
    if config.maneuver is not Maneuver.GPS_OUTAGE:
        return ()
    rng = np.random.default_rng(child_seed(config.seed, _STREAM_OUTAGE))
    n_windows = max(1, int(config.duration_s // 30.0))
    margin = 1.0
    for _ in range(1000):
        lengths = rng.uniform(3.0, 5.0, size=n_windows)
        starts = rng.uniform(margin, config.duration_s - margin - lengths)
        order = np.argsort(starts)
        starts, lengths = starts[order], lengths[order]
        ends = starts + lengths
        if np.all(starts[1:] >= ends[:-1] + 1.0):
            return tuple((float(s), float(e)) for s, e in zip(starts, ends))
    raise RuntimeError("could not place disjoint outage windows")


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Segment:
    """One closed-form motion phase.  kind is 'straight' or 'arc'."""

    kind: str
    t0: float
    length_s: float
    x0: float
    y0: float
    heading0: float
    v0: float
    accel: float = 0.0   # straight only
    omega: float = 0.0   # arc only

    @property
    def t1(self) -> float:
        return self.t0 + self.length_s

    def end_state(self):
        tau = self.length_s
        if self.kind == "straight":
            s = self.v0 * tau + 0.5 * self.accel * tau * tau
            return (self.x0 + s * math.cos(self.heading0),
                    self.y0 + s * math.sin(self.heading0),
                    self.heading0, self.v0 + self.accel * tau)
        theta = self.heading0 + self.omega * tau
        r = self.v0 / self.omega
        return (self.x0 + r * (math.sin(theta) - math.sin(self.heading0)),
                self.y0 - r * (math.cos(theta) - math.cos(self.heading0)),
                theta, self.v0)

    def eval(self, tau, out, sl):
        """Fill out-arrays at local times tau (vectorized)."""
        if self.kind == "straight":
            c, s = math.cos(self.heading0), math.sin(self.heading0)
            dist = self.v0 * tau + 0.5 * self.accel * tau * tau
            speed = self.v0 + self.accel * tau
            out["x"][sl] = self.x0 + dist * c
            out["y"][sl] = self.y0 + dist * s
            out["vx"][sl] = speed * c
            out["vy"][sl] = speed * s
            out["heading"][sl] = self.heading0
            out["ax_body"][sl] = self.accel
            out["ay_body"][sl] = 0.0
            out["yaw_rate"][sl] = 0.0
        else:
            theta = self.heading0 + self.omega * tau
            r = self.v0 / self.omega
            out["x"][sl] = self.x0 + r * (np.sin(theta) - math.sin(self.heading0))
            out["y"][sl] = self.y0 - r * (np.cos(theta) - math.cos(self.heading0))
            out["vx"][sl] = self.v0 * np.cos(theta)
            out["vy"][sl] = self.v0 * np.sin(theta)
            out["heading"][sl] = theta
            out["ax_body"][sl] = 0.0
            out["ay_body"][sl] = self.v0 * self.omega
            out["yaw_rate"][sl] = self.omega


def _chain(kinds, t_total):
    """Build a connected segment list from (kind, length, v0, accel, omega) specs."""
    segments = []
    t = 0.0
    x, y, heading = 0.0, 0.0, 0.0
    for kind, length, v0, accel, omega in kinds:
        if length <= 0:
            continue
        seg = _Segment(kind, t, length, x, y, heading, v0, accel, omega)
        segments.append(seg)
        x, y, heading, _ = seg.end_state()
        t += length
    if not segments or t < t_total - 1e-9:
        raise ValueError("maneuver profile does not cover the requested duration")
    return segments


def _maneuver_segments(config: ScenarioConfig) -> list[_Segment]:
    T = config.duration_s
    m = config.maneuver
    if m is Maneuver.STRAIGHT_CRUISE_500M:
        # Speed chosen so the scenario covers exactly 500 m of arc length.
        return _chain([("straight", T, CRUISE_DISTANCE_M / T, 0.0, 0.0)], T)
    if m is Maneuver.SHARP_TURN_90:
        v = config.speed_mps if config.speed_mps is not None else TURN_DEFAULT_SPEED
        omega = v / TURN_RADIUS_M
        turn_s = (math.pi / 2.0) / omega
        if T < turn_s:
            raise ValueError(
                f"duration {T} s too short for a 90-degree turn taking {turn_s:.2f} s")
        leg = (T - turn_s) / 2.0
        return _chain([("straight", leg, v, 0.0, 0.0),
                       ("arc", turn_s, v, 0.0, omega),
                       ("straight", leg + 1.0, v, 0.0, 0.0)], T)
    if m is Maneuver.RAPID_ACCEL_0_60:
        if T < ACCEL_RAMP_S:
            raise ValueError(f"duration {T} s too short: acceleration ramp lasts 5 s")
        a = ACCEL_TARGET_SPEED / ACCEL_RAMP_S
        return _chain([("straight", ACCEL_RAMP_S, 0.0, a, 0.0),
                       ("straight", T - ACCEL_RAMP_S + 1.0, ACCEL_TARGET_SPEED, 0.0, 0.0)], T)
    if m is Maneuver.ABRUPT_BRAKE_50_0:
        cruise_s = T - BRAKE_RAMP_S - BRAKE_TAIL_S
        if cruise_s <= 0:
            raise ValueError(
                f"duration {T} s too short: braking profile needs more than "
                f"{BRAKE_RAMP_S + BRAKE_TAIL_S} s")
        a = -BRAKE_ENTRY_SPEED / BRAKE_RAMP_S
        return _chain([("straight", cruise_s, BRAKE_ENTRY_SPEED, 0.0, 0.0),
                       ("straight", BRAKE_RAMP_S, BRAKE_ENTRY_SPEED, a, 0.0),
                       ("straight", BRAKE_TAIL_S + 1.0, 0.0, 0.0, 0.0)], T)
    if m is Maneuver.GPS_OUTAGE:
        # Urban weave: straights joined by alternating gentle arcs.
        v = config.speed_mps if config.speed_mps is not None else OUTAGE_DEFAULT_SPEED
        pattern = [("straight", 6.0, v, 0.0, 0.0),
                   ("arc", 3.0, v, 0.0, OUTAGE_TURN_RATE),
                   ("straight", 6.0, v, 0.0, 0.0),
                   ("arc", 3.0, v, 0.0, -OUTAGE_TURN_RATE)]
        kinds, covered, i = [], 0.0, 0
        while covered < T + 1.0:
            kinds.append(pattern[i % len(pattern)])
            covered += pattern[i % len(pattern)][1]
            i += 1
        return _chain(kinds, T)
    raise ValueError(f"unknown maneuver {m!r}")


def segment_boundaries(config: ScenarioConfig) -> list[float]:
    """Interior phase-transition times of the maneuver (for smoothness-aware checks)."""
    segs = _maneuver_segments(config)
    return [seg.t0 for seg in segs[1:] if seg.t0 < config.duration_s]


@dataclass
class GroundTruth:
    """Exact vehicle kinematics sampled on the IMU time grid (column arrays)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    heading: np.ndarray
    ax_body: np.ndarray
    ay_body: np.ndarray
    yaw_rate: np.ndarray

    def __len__(self):
        return len(self.t)

    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def speed(self) -> np.ndarray:
        return np.hypot(self.vx, self.vy)


def generate_ground_truth(config: ScenarioConfig) -> GroundTruth:
    """Evaluate the maneuver's closed-form kinematics on the IMU time grid.

    Body-frame acceleration is right-continuous at phase boundaries: the
    sample at time t carries the acceleration applied over [t, t + dt),
    so zero-order-hold integration of straight phases is exact.
    """
    segs = _maneuver_segments(config)
    n = int(round(config.duration_s * config.imu_rate_hz)) + 1
    t = np.arange(n) / config.imu_rate_hz
    out = {name: np.empty(n) for name in
           ("x", "y", "vx", "vy", "heading", "ax_body", "ay_body", "yaw_rate")}
    starts = np.array([seg.t0 for seg in segs])
    idx = np.searchsorted(starts, t, side="right") - 1
    for k, seg in enumerate(segs):
        sl = idx == k
        if np.any(sl):
            seg.eval(t[sl] - seg.t0, out, sl)
    out["heading"] = wrap_angle(out["heading"])
    return GroundTruth(t=t, **out)


# ---------------------------------------------------------------------------
# Sensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImuSample:
    t: float
    ax: float
    ay: float
    yaw_rate: float
    bias_ax: float = 0.0
    bias_ay: float = 0.0
    bias_gz: float = 0.0


@dataclass(frozen=True)
class GpsFix:
    t: float
    x: float
    y: float
    valid: bool = True


@dataclass
class ImuSeries:
    """Noisy IMU stream aligned one-to-one with the ground-truth grid."""

    t: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    yaw_rate: np.ndarray
    bias_ax: np.ndarray
    bias_ay: np.ndarray
    bias_gz: np.ndarray

    def __len__(self):
        return len(self.t)

    def sample(self, i: int) -> ImuSample:
        return ImuSample(float(self.t[i]), float(self.ax[i]), float(self.ay[i]),
                         float(self.yaw_rate[i]), float(self.bias_ax[i]),
                         float(self.bias_ay[i]), float(self.bias_gz[i]))


@dataclass
class GpsSeries:
    """GPS fixes at the decimated rate; valid=False inside outage windows."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray

    def __len__(self):
        return len(self.t)

    def sample(self, i: int) -> GpsFix:
        return GpsFix(float(self.t[i]), float(self.x[i]), float(self.y[i]),
                      bool(self.valid[i]))


def synthesize_imu(truth: GroundTruth, profile: NoiseProfile, seed) -> ImuSeries:
    """True body-frame accel/yaw-rate plus white noise and bias random walks."""
    n = len(truth)
    if n == 0:
        raise ValueError("empty ground truth")
    rng = np.random.default_rng(seed)
    dt = np.empty(n)
    dt[0] = 0.0
    dt[1:] = np.diff(truth.t)
    walk_scale = np.sqrt(dt)[:, None] * np.array(
        [profile.accel_bias_walk, profile.accel_bias_walk, profile.gyro_bias_walk])
    bias = np.cumsum(rng.standard_normal((n, 3)) * walk_scale, axis=0)
    noise = rng.standard_normal((n, 3)) * np.array(
        [profile.accel_sigma,
         profile.accel_sigma * profile.lateral_accel_scale,
         profile.gyro_sigma])
    return ImuSeries(
        t=truth.t.copy(),
        ax=truth.ax_body + bias[:, 0] + noise[:, 0],
        ay=truth.ay_body + bias[:, 1] + noise[:, 1],
        yaw_rate=truth.yaw_rate + bias[:, 2] + noise[:, 2],
        bias_ax=bias[:, 0], bias_ay=bias[:, 1], bias_gz=bias[:, 2],
    )


def synthesize_gps(truth: GroundTruth, profile: NoiseProfile,
                   config: ScenarioConfig, seed) -> GpsSeries:
    """Decimated, noise-perturbed position fixes; invalid inside outage windows.

    A fix at time t is invalid iff start <= t < end for some outage window.
    """
    if len(truth) == 0:
        raise ValueError("empty ground truth")
    rng = np.random.default_rng(seed)
    idx = np.arange(0, len(truth), config.decimation)
    t = truth.t[idx]
    noise = rng.standard_normal((len(idx), 2)) * profile.gps_sigma
    valid = np.ones(len(idx), dtype=bool)
    for start, end in resolve_outage_windows(config):
        valid &= ~((t >= start) & (t < end))
    return GpsSeries(t=t, x=truth.x[idx] + noise[:, 0],
                     y=truth.y[idx] + noise[:, 1], valid=valid)


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

@dataclass
class SensorDataset:
    config: ScenarioConfig
    truth: GroundTruth
    imu: ImuSeries
    gps: GpsSeries

    @property
    def span(self) -> tuple[float, float]:
        return float(self.truth.t[0]), float(self.truth.t[-1])


def default_profile(environment: Environment) -> NoiseProfile:
    return ENVIRONMENT_PROFILES[environment]


def simulate_scenario(config: ScenarioConfig,
                      profile: NoiseProfile | None = None) -> SensorDataset:
    """Generate truth and both sensor streams for one scenario."""
    if profile is None:
        profile = default_profile(config.environment)
    truth = generate_ground_truth(config)
    imu = synthesize_imu(truth, profile, child_seed(config.seed, _STREAM_IMU))
    gps = synthesize_gps(truth, profile, config, child_seed(config.seed, _STREAM_GPS))
    return SensorDataset(config=config, truth=truth, imu=imu, gps=gps)


def partition(dataset: SensorDataset, train_fraction: float
              ) -> tuple[SensorDataset, SensorDataset]:
    """Temporal prefix/suffix split: train covers [t0, t_split), test the rest.

    Time series are never shuffled; the split point is t0 + fraction * span.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    t0, t1 = dataset.span
    t_split = t0 + (t1 - t0) * train_fraction
    halves = []
    for keep in ((lambda t: t < t_split), (lambda t: t >= t_split)):
        truth_m = keep(dataset.truth.t)
        imu_m = keep(dataset.imu.t)
        gps_m = keep(dataset.gps.t)
        if not truth_m.any():
            raise ValueError("partition produced an empty half")
        halves.append(SensorDataset(
            config=dataset.config,
            truth=_mask_columns(dataset.truth, truth_m),
            imu=_mask_columns(dataset.imu, imu_m),
            gps=_mask_columns(dataset.gps, gps_m),
        ))
    return halves[0], halves[1]


def _mask_columns(obj, mask):
    cls = type(obj)
    return cls(**{name: getattr(obj, name)[mask] for name in obj.__dataclass_fields__})


def datasets_equal(a: SensorDataset, b: SensorDataset) -> bool:
    """Field-for-field exact equality of two datasets (configs included)."""
    if a.config != b.config:
        return False
    for name in ("truth", "imu", "gps"):
        ca, cb = getattr(a, name), getattr(b, name)
        for col in ca.__dataclass_fields__:
            if not np.array_equal(getattr(ca, col), getattr(cb, col)):
                return False
    return True


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

TRUTH_COLUMNS = ("t", "x", "y", "vx", "vy", "heading", "ax_body", "ay_body", "yaw_rate")
IMU_COLUMNS = ("t", "ax", "ay", "yaw_rate")
IMU_BIAS_COLUMNS = ("t", "bias_ax", "bias_ay", "bias_gz")
GPS_COLUMNS = ("t", "x", "y", "valid")


class CsvFormatError(ValueError):
    """Raised when an interchange CSV violates the fixed schema."""


def _write_csv(path, columns, arrays):
    rows = [",".join(columns)]
    for i in range(len(arrays[0])):
        rows.append(",".join(fmt_float(col[i]) if col.dtype.kind == "f"
                             else str(int(col[i])) for col in arrays))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def _read_csv(path, columns):
    with open(path, "r", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(f"{os.path.basename(path)}: empty file")
    header = tuple(lines[0].split(","))
    if header != tuple(columns):
        raise CsvFormatError(
            f"{os.path.basename(path)}: expected columns {','.join(columns)}, "
            f"got {','.join(header)}")
    if len(lines) == 1:
        raise CsvFormatError(f"{os.path.basename(path)}: empty sensor stream")
    try:
        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    except ValueError as exc:
        raise CsvFormatError(f"{os.path.basename(path)}: {exc}") from exc
    if data.shape[1] != len(columns):
        raise CsvFormatError(f"{os.path.basename(path)}: ragged rows")
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        raise CsvFormatError(f"{os.path.basename(path)}: timestamps not strictly increasing")
    return data


def export_csv(dataset: SensorDataset, out_dir: str) -> dict[str, str]:
    """Write truth/imu/gps CSVs (plus a bias audit sidecar) into out_dir.

    The wire schemas are fixed; floats are serialized so that re-parsing
    recovers identical bits.  Returns {name: path}.
    """
    os.makedirs(out_dir, exist_ok=True)
    truth, imu, gps = dataset.truth, dataset.imu, dataset.gps
    paths = {
        "truth": os.path.join(out_dir, "truth.csv"),
        "imu": os.path.join(out_dir, "imu.csv"),
        "imu_bias": os.path.join(out_dir, "imu_bias.csv"),
        "gps": os.path.join(out_dir, "gps.csv"),
    }
    _write_csv(paths["truth"], TRUTH_COLUMNS, [getattr(truth, c) for c in TRUTH_COLUMNS])
    _write_csv(paths["imu"], IMU_COLUMNS, [getattr(imu, c) for c in IMU_COLUMNS])
    _write_csv(paths["imu_bias"], IMU_BIAS_COLUMNS,
               [imu.t, imu.bias_ax, imu.bias_ay, imu.bias_gz])
    _write_csv(paths["gps"], GPS_COLUMNS,
               [gps.t, gps.x, gps.y, gps.valid.astype(np.int64)])
    return paths


def import_csv(directory: str, config: ScenarioConfig) -> SensorDataset:
    """Load a dataset previously written by export_csv.

    The bias sidecar is optional (externally produced data has no audit
    trail); missing biases import as zero.
    """
    truth = _read_csv(os.path.join(directory, "truth.csv"), TRUTH_COLUMNS)
    imu = _read_csv(os.path.join(directory, "imu.csv"), IMU_COLUMNS)
    gps = _read_csv(os.path.join(directory, "gps.csv"), GPS_COLUMNS)
    bias_path = os.path.join(directory, "imu_bias.csv")
    if os.path.exists(bias_path):
        bias = _read_csv(bias_path, IMU_BIAS_COLUMNS)[:, 1:]
    else:
        bias = np.zeros((len(imu), 3))
    if len(imu) != len(truth):
        raise CsvFormatError("imu.csv and truth.csv row counts differ")
    valid = gps[:, 3]
    if not np.all((valid == 0) | (valid == 1)):
        raise CsvFormatError("gps.csv: valid column must be 0 or 1")
    return SensorDataset(
        config=config,
        truth=GroundTruth(*(truth[:, i].copy() for i in range(len(TRUTH_COLUMNS)))),
        imu=ImuSeries(t=imu[:, 0], ax=imu[:, 1], ay=imu[:, 2], yaw_rate=imu[:, 3],
                      bias_ax=bias[:, 0], bias_ay=bias[:, 1], bias_gz=bias[:, 2]),
        gps=GpsSeries(t=gps[:, 0], x=gps[:, 1], y=gps[:, 2],
                      valid=valid.astype(bool)),
    )
