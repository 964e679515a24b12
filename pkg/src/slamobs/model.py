"""Inertial SLAM error-state model construction.

The estimated error state is ordered (dp, dv, psi, dm_1, ..., dm_L): vehicle
position, velocity and attitude errors followed by one 3-vector position
error per mapped feature, all expressed in the local-level navigation frame
with axes North / East / Up.

Because the set of detected features changes from segment to segment, the
per-segment systems are embedded into one fixed-dimension system of size
n = 9 + 3L covering every feature detected anywhere in the scenario: feature
states have zero dynamics (features are static) and a feature's observation
rows are zeroed in segments where it is not detected.  Appending unmeasured,
dynamics-free states in this way never changes the rank attributable to the
original states, which is what makes the fixed-dimension embedding sound;
``equivalence_pad`` exposes exactly that padding for testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pwcs import PwcsStripe, _as_finite_array, skew

AXES = ("N", "E", "U")
VEHICLE_DIM = 9


@dataclass(eq=False)
class InsErrorState:
    """Vehicle error state: position (m), velocity (m/s), attitude (rad).

    The flat ordering is fixed: dp occupies indices 0..2, dv 3..5 and psi
    6..8 of the vehicle block everywhere in this package.
    """

    dp: np.ndarray
    dv: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        self.dp = _as_finite_array(self.dp, "dp", (3,))
        self.dv = _as_finite_array(self.dv, "dv", (3,))
        self.psi = _as_finite_array(self.psi, "psi", (3,))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.dp, self.dv, self.psi])

    @classmethod
    def from_vector(cls, x) -> "InsErrorState":
        x = _as_finite_array(x, "x", (VEHICLE_DIM,))
        return cls(dp=x[0:3], dv=x[3:6], psi=x[6:9])


def ins_error_f(specific_force) -> np.ndarray:
    """9x9 inertial error dynamics for a given specific force (m/s^2, nav frame).

    Position error integrates velocity error; velocity error couples to
    attitude error through the cross-product matrix of the specific force;
    attitude error is constant.  The result is strictly block upper
    triangular, hence nilpotent with F**3 == 0.
    """
    f = _as_finite_array(specific_force, "specific_force", (3,))
    F = np.zeros((VEHICLE_DIM, VEHICLE_DIM))
    F[0:3, 3:6] = np.eye(3)
    F[3:6, 6:9] = skew(f)
    return F


def feature_obs_row(rel_pos) -> np.ndarray:
    """3x9 vehicle-block observation rows for one relative-position measurement.

    rel_pos is the feature position relative to the vehicle in the navigation
    frame.  The block row is [-I, 0, skew(rel_pos)] acting on (dp, dv, psi).
    """
    r = _as_finite_array(rel_pos, "rel_pos", (3,))
    H = np.zeros((3, VEHICLE_DIM))
    H[:, 0:3] = -np.eye(3)
    H[:, 6:9] = skew(r)
    return H


@dataclass(eq=False)
class DetectionSchedule:
    """Which feature is detected in which segment.

    ``detected[c, i]`` is True when feature c is measured during segment i.
    Feature order is fixed by ``feature_ids`` and determines the column-block
    layout of the augmented state.  Every feature must be detected in at
    least one segment.
    """

    detected: np.ndarray
    feature_ids: tuple = None

    def __post_init__(self):
        self.detected = np.asarray(self.detected, dtype=bool)
        if self.detected.ndim != 2:
            raise ValueError("detected must be a 2-d boolean array (features x segments)")
        if self.detected.shape[1] < 1:
            raise ValueError("schedule must cover at least one segment")
        if self.feature_ids is None:
            self.feature_ids = tuple(str(c + 1) for c in range(self.detected.shape[0]))
        else:
            self.feature_ids = tuple(self.feature_ids)
        if len(self.feature_ids) != self.detected.shape[0]:
            raise ValueError(
                f"{len(self.feature_ids)} feature ids for "
                f"{self.detected.shape[0]} schedule rows"
            )
        if len(set(self.feature_ids)) != len(self.feature_ids):
            raise ValueError("feature ids must be unique")
        for c, fid in enumerate(self.feature_ids):
            if not self.detected[c].any():
                raise ValueError(f"feature {fid!r} is never detected")

    @property
    def n_features(self) -> int:
        return self.detected.shape[0]

    @property
    def n_segments(self) -> int:
        return self.detected.shape[1]

    def detections_per_segment(self) -> np.ndarray:
        """Number of detected features in each segment."""
        return self.detected.sum(axis=0)

    def repeated_detections(self) -> int:
        """Number of detection events beyond each feature's first one.

        The total feature count always equals the sum of per-segment
        detections minus this number.
        """
        return int(self.detected.sum() - self.n_features)

    def features_in_segment(self, segment_index: int):
        """(index, id) pairs of the features detected in one segment."""
        return [
            (c, fid)
            for c, fid in enumerate(self.feature_ids)
            if self.detected[c, segment_index]
        ]


@dataclass(eq=False)
class SegmentSpec:
    """One segment's inputs: duration, specific force and feature geometry.

    ``feature_rel_pos`` maps feature id to the feature-relative-to-vehicle
    position (m, nav frame) used as that segment's constant linearization
    point, and must cover exactly the features detected in the segment.
    """

    duration: float
    specific_force: np.ndarray
    feature_rel_pos: dict = field(default_factory=dict)

    def __post_init__(self):
        self.duration = float(self.duration)
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        self.specific_force = _as_finite_array(
            self.specific_force, "specific_force", (3,)
        )
        self.feature_rel_pos = {
            fid: _as_finite_array(rel, f"feature_rel_pos[{fid!r}]", (3,))
            for fid, rel in self.feature_rel_pos.items()
        }


def validate_scenario(schedule: DetectionSchedule, segments) -> None:
    """Check that segment geometry matches the detection schedule.

    Raises ValueError naming the offending segment/feature when a scheduled
    feature has no relative position or a relative position is supplied for
    an unscheduled feature.
    """
    segments = list(segments)
    if len(segments) != schedule.n_segments:
        raise ValueError(
            f"schedule covers {schedule.n_segments} segments but "
            f"{len(segments)} segment specs were given"
        )
    for i, seg in enumerate(segments):
        scheduled = {fid for _, fid in schedule.features_in_segment(i)}
        supplied = set(seg.feature_rel_pos)
        missing = scheduled - supplied
        if missing:
            raise ValueError(
                f"segment {i}: no relative position for scheduled "
                f"feature(s) {sorted(map(repr, missing))}"
            )
        extra = supplied - scheduled
        if extra:
            raise ValueError(
                f"segment {i}: relative position supplied for unscheduled "
                f"feature(s) {sorted(map(repr, extra))}"
            )


@dataclass(eq=False)
class Scenario:
    """A detection schedule plus per-segment specs, validated for consistency."""

    schedule: DetectionSchedule
    segments: list

    def __post_init__(self):
        self.segments = list(self.segments)
        validate_scenario(self.schedule, self.segments)

    @property
    def n_segments(self) -> int:
        return self.schedule.n_segments

    @property
    def feature_ids(self) -> tuple:
        return self.schedule.feature_ids


def state_labels(feature_ids=()) -> list:
    """Per-axis names of the augmented state, in state order."""
    labels = [f"{block}_{axis}" for block in ("dp", "dv", "psi") for axis in AXES]
    for fid in feature_ids:
        labels.extend(f"dm_{fid}_{axis}" for axis in AXES)
    return labels


@dataclass(eq=False)
class AugmentedSystem:
    """Fixed-dimension piece-wise constant system for a whole scenario."""

    stripes: list
    state_labels: list
    feature_ids: tuple

    @property
    def n(self) -> int:
        return self.stripes[0].n


def augment(schedule: DetectionSchedule, segments) -> AugmentedSystem:
    """Embed all segments into one fixed-dimension system of size 9 + 3L.

    Each stripe's F carries the inertial block in the top-left corner and
    zero rows for the (static) feature states.  Each stripe's H has one
    3-row band per feature: the vehicle-block observation rows plus an
    identity in the feature's own column block when the feature is detected,
    all zeros otherwise.  Zero bands are retained so row indexing stays
    aligned with the schedule; they do not affect rank.
    """
    segments = list(segments)
    validate_scenario(schedule, segments)
    L = schedule.n_features
    n = VEHICLE_DIM + 3 * L
    stripes = []
    for i, seg in enumerate(segments):
        F = np.zeros((n, n))
        F[0:VEHICLE_DIM, 0:VEHICLE_DIM] = ins_error_f(seg.specific_force)
        H = np.zeros((3 * L, n))
        for c, fid in schedule.features_in_segment(i):
            rows = slice(3 * c, 3 * c + 3)
            cols = slice(VEHICLE_DIM + 3 * c, VEHICLE_DIM + 3 * c + 3)
            H[rows, 0:VEHICLE_DIM] = feature_obs_row(seg.feature_rel_pos[fid])
            H[rows, cols] = np.eye(3)
        stripes.append(PwcsStripe(F=F, H=H, delta=seg.duration))
    return AugmentedSystem(
        stripes=stripes,
        state_labels=state_labels(schedule.feature_ids),
        feature_ids=schedule.feature_ids,
    )


def augment_scenario(scenario: Scenario) -> AugmentedSystem:
    """Convenience wrapper over ``augment`` for a validated Scenario."""
    return augment(scenario.schedule, scenario.segments)


def equivalence_pad(stripe: PwcsStripe, extra_states: int) -> PwcsStripe:
    """Append unmeasured, dynamics-free states to a stripe.

    The padded system is equivalent to the original: the extra states are
    never observed and never move, so padding changes neither the
    observability of the original states nor the rank of any local or total
    observability matrix built from the stripe.
    """
    if int(extra_states) != extra_states or extra_states < 0:
        raise ValueError("extra_states must be a non-negative integer")
    extra = int(extra_states)
    if extra == 0:
        return PwcsStripe(F=stripe.F.copy(), H=stripe.H.copy(), delta=stripe.delta)
    n = stripe.n
    F = np.zeros((n + extra, n + extra))
    F[:n, :n] = stripe.F
    H = np.zeros((stripe.H.shape[0], n + extra))
    H[:, :n] = stripe.H
    return PwcsStripe(F=F, H=H, delta=stripe.delta)
