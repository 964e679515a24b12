"""Covariance simulation of an aided-inertial SLAM filter.

Runs the Riccati recursion (propagate + measurement update of the error
covariance) over a piece-wise constant acceleration trajectory, so the
predicted estimator performance can be compared against the rank-based
observability verdicts: observable functionals should see their standard
deviations collapse, unobservable ones should stay at prior level or grow.

State order matches the analysis modules: (dp, dv, psi, dm_1, ..., dm_L)
in the North / East / Up navigation frame.  Feature covariance blocks are
carried from the start at a large prior so the state dimension never
changes; a feature is "initialized" the first time it is detected, which
stamps its prior block and zeroes its cross-covariances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import model
from .model import AXES, DetectionSchedule, VEHICLE_DIM, feature_obs_row
from .pwcs import _as_finite_array, state_transition

GRAVITY = 9.81
FEATURE_PRIOR_DEFAULT = 1.0e9
#: Default initial vehicle error variances: 1 m^2 / (m/s)^2 on position and
#: velocity, 0.0873 rad^2 on attitude, read literally as variances.
DEFAULT_VEHICLE_VARIANCES = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0873, 0.0873, 0.0873)

_R_FLOOR = 1e-12


@dataclass(eq=False)
class TrajectoryConfig:
    """Piece-wise constant acceleration trajectory.

    Each segment is (duration_s, specific_force) with the specific force in
    m/s^2 navigation-frame components (N, E, U).  The net inertial
    acceleration in a segment is the specific force minus gravity along Up,
    so a vertical specific force equal to gravity is level unaccelerated
    flight.
    """

    p0: np.ndarray
    v0: np.ndarray
    segments: list
    gravity: float = GRAVITY

    def __post_init__(self):
        self.p0 = _as_finite_array(self.p0, "p0", (3,))
        self.v0 = _as_finite_array(self.v0, "v0", (3,))
        self.gravity = float(self.gravity)
        norm = []
        for j, seg in enumerate(self.segments):
            duration, force = seg
            duration = float(duration)
            if not duration > 0:
                raise ValueError(f"segment {j}: duration must be positive")
            norm.append((duration, _as_finite_array(force, f"segment {j} force", (3,))))
        if not norm:
            raise ValueError("at least one trajectory segment is required")
        self.segments = norm

    @property
    def total_duration(self) -> float:
        return float(sum(d for d, _ in self.segments))

    def segment_index(self, t: float) -> int:
        """Segment active at time t (the last one at and beyond the end)."""
        acc = 0.0
        for j, (duration, _) in enumerate(self.segments):
            acc += duration
            if t < acc - 1e-12:
                return j
        return len(self.segments) - 1

    def state_at(self, t: float):
        """(position, velocity, specific_force) at time t."""
        g_vec = np.array([0.0, 0.0, self.gravity])
        p = self.p0.copy()
        v = self.v0.copy()
        remaining = float(t)
        for duration, force in self.segments:
            accel = force - g_vec
            step = min(remaining, duration)
            if remaining <= duration + 1e-12:
                return p + v * step + 0.5 * accel * step * step, v + accel * step, force
            p = p + v * duration + 0.5 * accel * duration * duration
            v = v + accel * duration
            remaining -= duration
        return p, v, self.segments[-1][1]


@dataclass(frozen=True)
class SensorConfig:
    """IMU and vision sensor noise model.

    Rates in Hz, angular noises in degrees (per second for the gyro),
    accelerometer noise in m/s^2, range error in metres; all 1-sigma.
    The vision boresight is a unit vector in the navigation frame, pointing
    straight down by default.
    """

    imu_rate_hz: float = 100.0
    accel_noise: float = 0.01
    gyro_noise_deg: float = 0.1
    frame_rate_hz: float = 25.0
    fov_deg: float = 15.0
    range_error_m: float = 5.0
    bearing_noise_deg: float = 0.1
    elevation_noise_deg: float = 0.1
    boresight: tuple = (0.0, 0.0, -1.0)

    def __post_init__(self):
        for name in ("imu_rate_hz", "frame_rate_hz", "fov_deg"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        # noise magnitudes may be zero to exercise degenerate limits
        for name in (
            "accel_noise",
            "gyro_noise_deg",
            "range_error_m",
            "bearing_noise_deg",
            "elevation_noise_deg",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.imu_rate_hz < self.frame_rate_hz:
            raise ValueError("imu_rate_hz must be at least frame_rate_hz")
        bs = np.asarray(self.boresight, dtype=float)
        if bs.shape != (3,) or not np.all(np.isfinite(bs)) or not np.linalg.norm(bs) > 0:
            raise ValueError("boresight must be a nonzero 3-vector")
        object.__setattr__(self, "boresight", tuple(bs / np.linalg.norm(bs)))

    @property
    def gyro_noise_rad(self) -> float:
        return float(np.deg2rad(self.gyro_noise_deg))

    @property
    def bearing_noise_rad(self) -> float:
        return float(np.deg2rad(self.bearing_noise_deg))

    @property
    def elevation_noise_rad(self) -> float:
        return float(np.deg2rad(self.elevation_noise_deg))


def generate_trajectory(config: TrajectoryConfig, rate_hz: float = 100.0, duration: float = None):
    """Sample the trajectory at a fixed rate.

    Returns (times, positions, velocities, specific_forces) as arrays with
    one row per sample, covering [0, duration] inclusive.
    """
    if not rate_hz > 0:
        raise ValueError("rate_hz must be positive")
    total = config.total_duration if duration is None else float(duration)
    if total < 0:
        raise ValueError("duration must be non-negative")
    count = int(round(total * rate_hz))
    times = np.arange(count + 1) / rate_hz
    positions = np.empty((times.size, 3))
    velocities = np.empty((times.size, 3))
    forces = np.empty((times.size, 3))
    for k, t in enumerate(times):
        positions[k], velocities[k], forces[k] = config.state_at(t)
    return times, positions, velocities, forces


@dataclass(eq=False)
class AugmentedCovariance:
    """Vehicle-plus-feature error covariance with feature bookkeeping."""

    P: np.ndarray
    feature_initialized: list

    def __post_init__(self):
        self.P = _as_finite_array(self.P, "P")
        n = self.P.shape[0]
        if self.P.ndim != 2 or self.P.shape != (n, n):
            raise ValueError("P must be square")
        if (n - VEHICLE_DIM) % 3 != 0 or n < VEHICLE_DIM:
            raise ValueError("P must cover 9 vehicle states plus 3 per feature")
        self.feature_initialized = list(self.feature_initialized)
        if len(self.feature_initialized) != (n - VEHICLE_DIM) // 3:
            raise ValueError("one initialization flag per feature is required")

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def n_features(self) -> int:
        return (self.n - VEHICLE_DIM) // 3

    @classmethod
    def initial(
        cls,
        vehicle_variances=DEFAULT_VEHICLE_VARIANCES,
        n_features: int = 0,
        feature_prior: float = FEATURE_PRIOR_DEFAULT,
    ) -> "AugmentedCovariance":
        """Diagonal prior: given vehicle variances, a large prior per feature."""
        variances = _as_finite_array(vehicle_variances, "vehicle_variances", (9,))
        if np.any(variances < 0):
            raise ValueError("vehicle variances must be non-negative")
        if feature_prior < 0:
            raise ValueError("feature_prior must be non-negative")
        n = VEHICLE_DIM + 3 * int(n_features)
        P = np.zeros((n, n))
        P[:VEHICLE_DIM, :VEHICLE_DIM] = np.diag(variances)
        for c in range(int(n_features)):
            block = slice(VEHICLE_DIM + 3 * c, VEHICLE_DIM + 3 * c + 3)
            P[block, block] = feature_prior * np.eye(3)
        return cls(P=P, feature_initialized=[False] * int(n_features))

    def stds(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.P), 0.0, None))

    def functional_std(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(np.sqrt(max(w @ self.P @ w, 0.0)))


def process_noise_intensity(sensor: SensorConfig, n: int) -> np.ndarray:
    """Continuous-time process noise intensity for the augmented state.

    Accelerometer noise drives the velocity error, gyro noise the attitude
    error; position and feature states carry no process noise.
    """
    if n < VEHICLE_DIM:
        raise ValueError("state dimension too small")
    q = np.zeros((n, n))
    q[3:6, 3:6] = sensor.accel_noise**2 * np.eye(3)
    q[6:9, 6:9] = sensor.gyro_noise_rad**2 * np.eye(3)
    return q


def propagate(cov: AugmentedCovariance, F, q_intensity, dt: float) -> AugmentedCovariance:
    """One covariance prediction step of length dt.

    Uses the exact segment transition of F and injects q_intensity * dt of
    process noise (first-order discretization of the continuous intensity).
    The result is re-symmetrized.
    """
    F = _as_finite_array(F, "F")
    if F.shape != (cov.n, cov.n):
        raise ValueError(f"F must have shape {(cov.n, cov.n)}, got {F.shape}")
    q = _as_finite_array(q_intensity, "q_intensity")
    if q.shape != (cov.n, cov.n):
        raise ValueError(f"q_intensity must have shape {(cov.n, cov.n)}, got {q.shape}")
    phi = state_transition(F, dt, "exact")
    P = phi @ cov.P @ phi.T + q * dt
    P = 0.5 * (P + P.T)
    return AugmentedCovariance(P=P, feature_initialized=list(cov.feature_initialized))


def update(cov: AugmentedCovariance, H, R) -> AugmentedCovariance:
    """Joseph-form measurement update.

    Raises numpy.linalg.LinAlgError when the innovation covariance is not
    positive definite, which signals a degenerate R or P.
    """
    H = _as_finite_array(H, "H")
    if H.ndim != 2 or H.shape[1] != cov.n:
        raise ValueError(f"H must have {cov.n} columns, got shape {H.shape}")
    m = H.shape[0]
    R = _as_finite_array(R, "R")
    if R.shape != (m, m):
        raise ValueError(f"R must have shape {(m, m)}, got {R.shape}")
    P = cov.P
    S = H @ P @ H.T + R
    try:
        chol = scipy.linalg.cho_factor(S)
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"innovation covariance is singular or indefinite: {exc}"
        ) from exc
    K = scipy.linalg.cho_solve(chol, H @ P).T
    ikh = np.eye(cov.n) - K @ H
    P_new = ikh @ P @ ikh.T + K @ R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return AugmentedCovariance(P=P_new, feature_initialized=list(cov.feature_initialized))


def initialize_feature(
    cov: AugmentedCovariance, feature_index: int, u_m_value: float = FEATURE_PRIOR_DEFAULT
) -> AugmentedCovariance:
    """Stamp a feature's prior block and zero its cross-covariances.

    The feature block becomes u_m_value * I3; a second initialization of the
    same feature is an error.
    """
    c = int(feature_index)
    if not 0 <= c < cov.n_features:
        raise IndexError(f"feature index {feature_index} out of range")
    if cov.feature_initialized[c]:
        raise ValueError(f"feature {c} is already initialized")
    if u_m_value < 0:
        raise ValueError("u_m_value must be non-negative")
    P = cov.P.copy()
    block = slice(VEHICLE_DIM + 3 * c, VEHICLE_DIM + 3 * c + 3)
    P[block, :] = 0.0
    P[:, block] = 0.0
    P[block, block] = u_m_value * np.eye(3)
    flags = list(cov.feature_initialized)
    flags[c] = True
    return AugmentedCovariance(P=P, feature_initialized=flags)


def measurement_noise_cartesian(rel_pos, sensor: SensorConfig) -> np.ndarray:
    """3x3 Cartesian noise covariance of a range/bearing/elevation fix.

    ``rel_pos`` is the feature-relative-to-vehicle vector (or a bare positive
    range, taken along North).  The range error acts along the line of sight,
    the two angular errors act tangentially with lever arm equal to the
    range, so R = J diag(sig_r^2, sig_b^2, sig_e^2) J^T with J the Jacobian
    of the polar-to-Cartesian map at the current geometry.  If any noise
    term is exactly zero the result is rank deficient; it is then floored to
    stay invertible and a warning is emitted.
    """
    rel = np.asarray(rel_pos, dtype=float)
    if rel.ndim == 0:
        rel = np.array([float(rel), 0.0, 0.0])
    rel = _as_finite_array(rel, "rel_pos", (3,))
    rng = float(np.linalg.norm(rel))
    if not rng > 0:
        raise ValueError("range must be positive")
    los = rel / rng
    helper = np.array([0.0, 0.0, 1.0])
    if abs(los @ helper) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    t1 = np.cross(los, helper)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(los, t1)
    J = np.column_stack([los, rng * t1, rng * t2])
    sig = np.array(
        [sensor.range_error_m, sensor.bearing_noise_rad, sensor.elevation_noise_rad]
    )
    R = J @ np.diag(sig**2) @ J.T
    R = 0.5 * (R + R.T)
    if np.any(sig == 0.0):
        floor = _R_FLOOR * float(np.max(np.diag(R)))
        if floor <= 0.0:
            raise ValueError("all measurement noise terms are zero")
        warnings.warn(
            "degenerate measurement noise (a zero sigma); flooring covariance",
            RuntimeWarning,
            stacklevel=2,
        )
        R = R + floor * np.eye(3)
    return R


@dataclass(eq=False)
class SimScenario:
    """What the covariance simulation estimates and when features are seen.

    ``feature_positions`` maps feature id to its true navigation-frame
    position.  With an explicit ``schedule``, a feature is measured at every
    vision frame of the segments where it is scheduled; without one the
    field-of-view gate decides detection frame by frame.
    """

    feature_positions: dict
    schedule: DetectionSchedule | None = None
    vehicle_variances: np.ndarray = DEFAULT_VEHICLE_VARIANCES
    feature_prior: float = FEATURE_PRIOR_DEFAULT

    def __post_init__(self):
        self.feature_positions = {
            fid: _as_finite_array(pos, f"feature_positions[{fid!r}]", (3,))
            for fid, pos in self.feature_positions.items()
        }
        if not self.feature_positions:
            raise ValueError("at least one feature is required")
        self.vehicle_variances = _as_finite_array(
            self.vehicle_variances, "vehicle_variances", (9,)
        )
        self.feature_prior = float(self.feature_prior)
        if self.schedule is not None:
            missing = set(self.schedule.feature_ids) - set(self.feature_positions)
            if missing:
                raise ValueError(
                    f"schedule references unknown feature(s) {sorted(map(repr, missing))}"
                )

    @property
    def feature_ids(self) -> tuple:
        if self.schedule is not None:
            return self.schedule.feature_ids
        return tuple(self.feature_positions)


@dataclass(eq=False)
class SimulationDiagnostics:
    """Numerical health of a covariance run.

    max_relative_asymmetry is measured on raw propagate/update outputs before
    re-symmetrization; min_eigenvalue_ratio is the most negative eigenvalue
    seen relative to the largest one (0 or above means positive
    semidefinite); max_update_variance_growth is the worst relative increase
    of any sampled functional variance across an update (non-positive means
    updates never inflated a variance).
    """

    max_relative_asymmetry: float = 0.0
    min_eigenvalue_ratio: float = 0.0
    max_update_variance_growth: float = -np.inf
    n_updates: int = 0


@dataclass(eq=False)
class CovarianceTrace:
    """Standard-deviation time series recorded at the vision frame rate.

    ``std`` holds per-axis standard deviations of the state errors keyed by
    label ("dp_N", ..., "dm_<id>_U"); ``derived_std`` those of the
    position-minus-feature and feature-minus-feature differences.
    """

    times: np.ndarray
    std: dict
    derived_std: dict
    feature_ids: tuple
    diagnostics: SimulationDiagnostics | None = None

    def labels(self) -> list:
        return list(self.std) + list(self.derived_std)

    def series(self, label: str) -> np.ndarray:
        if label in self.std:
            return self.std[label]
        if label in self.derived_std:
            return self.derived_std[label]
        raise KeyError(label)

    def value_at(self, label: str, t: float) -> float:
        if self.times.size == 0:
            raise ValueError("trace is empty")
        k = int(np.argmin(np.abs(self.times - t)))
        return float(self.series(label)[k])


def _in_fov(rel, sensor: SensorConfig) -> bool:
    rng = float(np.linalg.norm(rel))
    if rng <= 0:
        return False
    cos_angle = float(np.dot(rel, sensor.boresight)) / rng
    return cos_angle >= np.cos(np.deg2rad(sensor.fov_deg))


def fov_schedule(
    feature_positions: dict, trajectory: TrajectoryConfig, sensor: SensorConfig
) -> DetectionSchedule:
    """Detection schedule implied by field-of-view gating.

    A feature counts as detected in a segment when it falls inside the
    sensor cone at any vision frame of that segment.
    """
    ids = tuple(feature_positions)
    detected = np.zeros((len(ids), len(trajectory.segments)), dtype=bool)
    times = np.arange(int(round(trajectory.total_duration * sensor.frame_rate_hz)) + 1)
    for k in times:
        t = k / sensor.frame_rate_hz
        pos, _, _ = trajectory.state_at(t)
        seg = trajectory.segment_index(t)
        for c, fid in enumerate(ids):
            if _in_fov(feature_positions[fid] - pos, sensor):
                detected[c, seg] = True
    return DetectionSchedule(detected=detected, feature_ids=ids)


def derived_functionals(feature_ids, n: int = None):
    """(label, weight) pairs for the standard difference functionals."""
    ids = list(feature_ids)
    if n is None:
        n = VEHICLE_DIM + 3 * len(ids)
    e = np.eye(n)
    out = []
    for c, fid in enumerate(ids):
        for a, axis in enumerate(AXES):
            out.append((f"dp-dm_{fid}_{axis}", e[a] - e[VEHICLE_DIM + 3 * c + a]))
    for c in range(len(ids)):
        for d in range(c + 1, len(ids)):
            for a, axis in enumerate(AXES):
                out.append(
                    (
                        f"dm_{ids[c]}-dm_{ids[d]}_{axis}",
                        e[VEHICLE_DIM + 3 * c + a] - e[VEHICLE_DIM + 3 * d + a],
                    )
                )
    return out


def _visible_features(scenario: SimScenario, trajectory, sensor, t, vehicle_pos):
    ids = scenario.feature_ids
    if scenario.schedule is not None:
        seg = trajectory.segment_index(t)
        return [c for c in range(len(ids)) if scenario.schedule.detected[c, seg]]
    return [
        c
        for c, fid in enumerate(ids)
        if _in_fov(scenario.feature_positions[fid] - vehicle_pos, sensor)
    ]


def _stacked_measurement(scenario, sensor, vehicle_pos, visible, n):
    ids = scenario.feature_ids
    m = 3 * len(visible)
    H = np.zeros((m, n))
    R = np.zeros((m, m))
    for j, c in enumerate(visible):
        rel = scenario.feature_positions[ids[c]] - vehicle_pos
        rows = slice(3 * j, 3 * j + 3)
        H[rows, 0:VEHICLE_DIM] = feature_obs_row(rel)
        H[rows, VEHICLE_DIM + 3 * c : VEHICLE_DIM + 3 * c + 3] = np.eye(3)
        R[rows, rows] = measurement_noise_cartesian(rel, sensor)
    return H, R


def simulate(
    scenario: SimScenario,
    trajectory: TrajectoryConfig,
    sensor: SensorConfig,
    seed: int = 0,
    duration: float = None,
    collect_diagnostics: bool = False,
) -> CovarianceTrace:
    """Run the covariance recursion and record standard deviations per frame.

    Propagates at the IMU rate and applies one stacked measurement update per
    vision frame covering every currently-detected feature, initializing each
    feature's prior block at its first detection.  ``duration`` truncates the
    run; the trace holds duration * frame_rate + 1 rows.  The run itself is
    deterministic; the seed only drives the random functionals sampled for
    the optional diagnostics.
    """
    if scenario.schedule is not None and scenario.schedule.n_segments != len(
        trajectory.segments
    ):
        raise ValueError(
            f"schedule covers {scenario.schedule.n_segments} segments but the "
            f"trajectory has {len(trajectory.segments)}"
        )
    total = trajectory.total_duration if duration is None else float(duration)
    if total < 0:
        raise ValueError("duration must be non-negative")
    total = min(total, trajectory.total_duration)

    ids = scenario.feature_ids
    L = len(ids)
    n = VEHICLE_DIM + 3 * L
    labels = model.state_labels(ids)
    derived = derived_functionals(ids, n)

    frame_dt = 1.0 / sensor.frame_rate_hz
    steps_per_frame = int(round(sensor.imu_rate_hz / sensor.frame_rate_hz))
    imu_dt = frame_dt / steps_per_frame
    n_frames = int(round(total * sensor.frame_rate_hz))

    trace_times = []
    std_rows = []
    derived_rows = []
    diag = SimulationDiagnostics() if collect_diagnostics else None
    rng = np.random.default_rng(seed)

    if total <= 0:
        empty = np.zeros((0,))
        return CovarianceTrace(
            times=empty,
            std={lab: empty.copy() for lab in labels},
            derived_std={lab: empty.copy() for lab, _ in derived},
            feature_ids=ids,
            diagnostics=diag,
        )

    cov = AugmentedCovariance.initial(
        vehicle_variances=scenario.vehicle_variances,
        n_features=L,
        feature_prior=scenario.feature_prior,
    )
    q = process_noise_intensity(sensor, n)

    def note_asymmetry(P_raw):
        if diag is None:
            return
        scale = float(np.max(np.abs(P_raw))) or 1.0
        asym = float(np.max(np.abs(P_raw - P_raw.T))) / scale
        diag.max_relative_asymmetry = max(diag.max_relative_asymmetry, asym)

    t = 0.0
    for frame in range(n_frames + 1):
        pos, _, _ = trajectory.state_at(t)
        visible = _visible_features(scenario, trajectory, sensor, t, pos)
        for c in visible:
            if not cov.feature_initialized[c]:
                cov = initialize_feature(cov, c, scenario.feature_prior)
        if visible:
            H, R = _stacked_measurement(scenario, sensor, pos, visible, n)
            if diag is not None:
                w_samples = rng.standard_normal((20, n))
                before = np.einsum("ij,jk,ik->i", w_samples, cov.P, w_samples)
            P_prior = cov.P
            S = H @ P_prior @ H.T + R
            chol = scipy.linalg.cho_factor(S)
            K = scipy.linalg.cho_solve(chol, H @ P_prior).T
            ikh = np.eye(n) - K @ H
            P_raw = ikh @ P_prior @ ikh.T + K @ R @ K.T
            note_asymmetry(P_raw)
            cov = AugmentedCovariance(
                P=0.5 * (P_raw + P_raw.T),
                feature_initialized=list(cov.feature_initialized),
            )
            if diag is not None:
                after = np.einsum("ij,jk,ik->i", w_samples, cov.P, w_samples)
                growth = float(np.max((after - before) / np.maximum(before, 1e-300)))
                diag.max_update_variance_growth = max(
                    diag.max_update_variance_growth, growth
                )
                diag.n_updates += 1
        if diag is not None:
            eigs = np.linalg.eigvalsh(cov.P)
            ratio = float(eigs[0] / max(eigs[-1], 1e-300))
            diag.min_eigenvalue_ratio = min(diag.min_eigenvalue_ratio, ratio)
        trace_times.append(t)
        std_rows.append(cov.stds())
        derived_rows.append([cov.functional_std(w) for _, w in derived])
        if frame == n_frames:
            break
        for _ in range(steps_per_frame):
            seg = trajectory.segment_index(t)
            F = np.zeros((n, n))
            F[0:VEHICLE_DIM, 0:VEHICLE_DIM] = model.ins_error_f(
                trajectory.segments[seg][1]
            )
            phi = state_transition(F, imu_dt, "exact")
            P_raw = phi @ cov.P @ phi.T + q * imu_dt
            note_asymmetry(P_raw)
            cov = AugmentedCovariance(
                P=0.5 * (P_raw + P_raw.T),
                feature_initialized=list(cov.feature_initialized),
            )
            t += imu_dt
        t = (frame + 1) * frame_dt  # keep frame times exact multiples

    std_arr = np.asarray(std_rows)
    derived_arr = np.asarray(derived_rows)
    return CovarianceTrace(
        times=np.asarray(trace_times),
        std={lab: std_arr[:, k].copy() for k, lab in enumerate(labels)},
        derived_std={
            lab: derived_arr[:, k].copy() for k, (lab, _) in enumerate(derived)
        },
        feature_ids=ids,
        diagnostics=diag,
    )


@dataclass(eq=False)
class StateRun:
    """Trajectory comparison from one noisy-measurement state run."""

    times: np.ndarray
    true_positions: np.ndarray
    ins_positions: np.ndarray
    estimated_positions: np.ndarray


def state_comparison_run(
    scenario: SimScenario,
    trajectory: TrajectoryConfig,
    sensor: SensorConfig,
    seed: int = 0,
    duration: float = None,
) -> StateRun:
    """Single noise-driven run comparing dead-reckoning against the filter.

    Samples one realization of the error-state process (initial errors plus
    process noise) to play the role of the uncorrected inertial drift, feeds
    the corresponding noisy relative-position measurements to a Kalman
    filter, and reports true, inertial-only and corrected positions; fully
    deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    total = trajectory.total_duration if duration is None else float(duration)
    total = min(max(total, 0.0), trajectory.total_duration)

    ids = scenario.feature_ids
    L = len(ids)
    n = VEHICLE_DIM + 3 * L

    frame_dt = 1.0 / sensor.frame_rate_hz
    steps_per_frame = int(round(sensor.imu_rate_hz / sensor.frame_rate_hz))
    imu_dt = frame_dt / steps_per_frame
    n_frames = int(round(total * sensor.frame_rate_hz))
    if total <= 0:
        empty = np.zeros((0,))
        empty3 = np.zeros((0, 3))
        return StateRun(empty, empty3, empty3.copy(), empty3.copy())

    cov = AugmentedCovariance.initial(
        vehicle_variances=scenario.vehicle_variances,
        n_features=L,
        feature_prior=scenario.feature_prior,
    )
    q = process_noise_intensity(sensor, n)

    # one true error-state sample; feature errors drawn from the same prior
    x = np.zeros(n)
    x[:VEHICLE_DIM] = rng.standard_normal(VEHICLE_DIM) * np.sqrt(
        np.asarray(scenario.vehicle_variances)
    )
    x[VEHICLE_DIM:] = rng.standard_normal(3 * L) * np.sqrt(scenario.feature_prior)
    x_hat = np.zeros(n)

    times, true_pos, ins_pos, est_pos = [], [], [], []
    noise_std = np.sqrt(np.diag(q))

    t = 0.0
    for frame in range(n_frames + 1):
        pos, _, _ = trajectory.state_at(t)
        visible = _visible_features(scenario, trajectory, sensor, t, pos)
        for c in visible:
            if not cov.feature_initialized[c]:
                cov = initialize_feature(cov, c, scenario.feature_prior)
        if visible:
            H, R = _stacked_measurement(scenario, sensor, pos, visible, n)
            z = H @ x + np.linalg.cholesky(R) @ rng.standard_normal(H.shape[0])
            S = H @ cov.P @ H.T + R
            chol = scipy.linalg.cho_factor(S)
            K = scipy.linalg.cho_solve(chol, H @ cov.P).T
            x_hat = x_hat + K @ (z - H @ x_hat)
            ikh = np.eye(n) - K @ H
            P_new = ikh @ cov.P @ ikh.T + K @ R @ K.T
            cov = AugmentedCovariance(
                P=0.5 * (P_new + P_new.T),
                feature_initialized=list(cov.feature_initialized),
            )
        times.append(t)
        true_pos.append(pos)
        ins_pos.append(pos + x[0:3])
        est_pos.append(pos + x[0:3] - x_hat[0:3])
        if frame == n_frames:
            break
        for _ in range(steps_per_frame):
            seg = trajectory.segment_index(t)
            F = np.zeros((n, n))
            F[0:VEHICLE_DIM, 0:VEHICLE_DIM] = model.ins_error_f(
                trajectory.segments[seg][1]
            )
            phi = state_transition(F, imu_dt, "exact")
            w = rng.standard_normal(n) * noise_std * np.sqrt(imu_dt)
            x = phi @ x + w
            x_hat = phi @ x_hat
            P_new = phi @ cov.P @ phi.T + q * imu_dt
            cov = AugmentedCovariance(
                P=0.5 * (P_new + P_new.T),
                feature_initialized=list(cov.feature_initialized),
            )
            t += imu_dt
        t = (frame + 1) * frame_dt

    return StateRun(
        times=np.asarray(times),
        true_positions=np.asarray(true_pos),
        ins_positions=np.asarray(ins_pos),
        estimated_positions=np.asarray(est_pos),
    )
