"""Observability reports for inertial SLAM scenarios.

Builds the local (single-segment) or total (all-segment) observability
matrix of a scenario, computes its numerical rank and unobservable subspace,
and classifies a family of candidate linear functionals as observable or
not.  Candidates are classified by row-space membership: a functional is
observable exactly when its projection onto the unobservable subspace is
negligible.

Modes are reported per axis.  A 3-vector quantity such as the velocity error
counts as an observable mode only when all three of its axes are observable;
this keeps partial-axis effects visible (under a purely vertical specific
force, for example, the horizontal attitude errors are observable while the
vertical one is not).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .model import AXES, DetectionSchedule, Scenario, SegmentSpec, augment
from .pwcs import (
    DEFAULT_RANK_TOL,
    NullSpaceBasis,
    _as_finite_array,
    lom,
    null_space,
    tom,
)

#: Detection patterns of the four two-feature / two-segment benchmark cases,
#: as rows (feature) by columns (segment).
CASE_SCHEDULES = {
    1: ((1, 0), (0, 1)),
    2: ((1, 1), (0, 1)),
    3: ((1, 0), (1, 1)),
    4: ((1, 1), (1, 1)),
}

DEFAULT_FEATURE_POSITIONS = ((10.0, 0.0, 0.0), (20.0, 100.0, 0.0))
DEFAULT_VEHICLE_POSITION = (0.0, 0.0, 100.0)
DEFAULT_FORCES = ((0.0, 0.0, 9.81), (0.0, 0.1, 9.81))
DEFAULT_SEGMENT_DURATION = 50.0


@dataclass(eq=False)
class CandidateFunctional:
    """A labelled linear functional w.T @ x of the augmented error state."""

    label: str
    weights: np.ndarray

    def __post_init__(self):
        self.weights = _as_finite_array(self.weights, "weights")
        if self.weights.ndim != 1:
            raise ValueError("weights must be a vector")
        if not self.weights.any():
            raise ValueError("weights must be nonzero")


@dataclass(frozen=True)
class AnalysisOptions:
    """Knobs for report construction.

    expansion_mode selects how segment transitions are expanded when stacking
    the total observability matrix ("exact" or "first_order"); rank_tol is
    the relative singular-value threshold; max_power the highest dynamics
    power stacked per segment; extra_candidates additional functionals
    (weights over the full augmented state) classified alongside the
    standard set.
    """

    expansion_mode: str = "exact"
    rank_tol: float = DEFAULT_RANK_TOL
    max_power: int = 2
    extra_candidates: tuple = ()

    def __post_init__(self):
        if self.expansion_mode not in ("exact", "first_order"):
            raise ValueError(
                "expansion_mode must be 'exact' or 'first_order', "
                f"got {self.expansion_mode!r}"
            )
        if not self.rank_tol > 0:
            raise ValueError("rank_tol must be positive")


@dataclass(eq=False)
class FunctionalVerdict:
    """Observability verdict for one candidate functional.

    null_projection is the norm of the candidate's projection onto the
    unobservable subspace, relative to the candidate's norm (0 means fully
    determined by measurements, 1 means fully unobservable).
    """

    label: str
    observable: bool
    null_projection: float


@dataclass(eq=False)
class ObservabilityReport:
    """Rank, unobservable subspace and per-functional verdicts."""

    scope: str
    segment_index: int | None
    expansion_mode: str
    rank_tol: float
    state_labels: list
    matrix_rows: int
    matrix_cols: int
    rank: int
    nullity: int
    null_basis: NullSpaceBasis
    mode_results: list

    def verdict(self, label: str) -> FunctionalVerdict:
        for v in self.mode_results:
            if v.label == label:
                return v
        raise KeyError(label)

    def observable_modes(self) -> list:
        """Base labels whose three axis functionals are all observable."""
        by_base: dict = {}
        order = []
        for v in self.mode_results:
            base, _, axis = v.label.rpartition("_")
            if axis not in AXES or not base:
                base = v.label
            if base not in by_base:
                by_base[base] = []
                order.append(base)
            by_base[base].append(v.observable)
        return [base for base in order if all(by_base[base])]


def standard_candidates(features) -> list:
    """Per-axis candidate functionals for a system with the given features.

    ``features`` is either a feature count or a sequence of feature ids.
    Emits one functional per axis for the vehicle position, velocity and
    attitude errors, each feature error, each position-minus-feature
    difference, and each pairwise feature difference.
    """
    if isinstance(features, (int, np.integer)):
        ids = [str(c + 1) for c in range(int(features))]
    else:
        ids = list(features)
    n = model.VEHICLE_DIM + 3 * len(ids)
    e = np.eye(n)
    out = []
    for b, block in enumerate(("dp", "dv", "psi")):
        for a, axis in enumerate(AXES):
            out.append(CandidateFunctional(f"{block}_{axis}", e[3 * b + a]))
    for c, fid in enumerate(ids):
        for a, axis in enumerate(AXES):
            out.append(CandidateFunctional(f"dm_{fid}_{axis}", e[9 + 3 * c + a]))
    for c, fid in enumerate(ids):
        for a, axis in enumerate(AXES):
            out.append(
                CandidateFunctional(f"dp-dm_{fid}_{axis}", e[a] - e[9 + 3 * c + a])
            )
    for c in range(len(ids)):
        for d in range(c + 1, len(ids)):
            for a, axis in enumerate(AXES):
                out.append(
                    CandidateFunctional(
                        f"dm_{ids[c]}-dm_{ids[d]}_{axis}",
                        e[9 + 3 * c + a] - e[9 + 3 * d + a],
                    )
                )
    return out


def _build_report(matrix, feature_ids, scope, segment_index, options):
    basis = null_space(matrix, options.rank_tol)
    n = matrix.shape[1]
    rank = n - basis.dim
    candidates = standard_candidates(feature_ids)
    for cand in options.extra_candidates:
        if cand.weights.shape[0] == n:
            candidates.append(cand)
    results = []
    for cand in candidates:
        norm = float(np.linalg.norm(cand.weights))
        rel = float(np.linalg.norm(basis.projection(cand.weights))) / norm
        results.append(
            FunctionalVerdict(
                label=cand.label,
                observable=rel <= options.rank_tol,
                null_projection=rel,
            )
        )
    return ObservabilityReport(
        scope=scope,
        segment_index=segment_index,
        expansion_mode=options.expansion_mode,
        rank_tol=options.rank_tol,
        state_labels=model.state_labels(feature_ids),
        matrix_rows=matrix.shape[0],
        matrix_cols=n,
        rank=rank,
        nullity=basis.dim,
        null_basis=basis,
        mode_results=results,
    )


def analyze_local(
    scenario: Scenario, segment_index: int, options: AnalysisOptions = None
) -> ObservabilityReport:
    """Observability report for a single segment considered on its own.

    The local system contains the vehicle states plus only the features
    detected in that segment, so its dimension is 9 + 3 * (detections in the
    segment).
    """
    options = options or AnalysisOptions()
    if not 0 <= segment_index < scenario.n_segments:
        raise IndexError(
            f"segment index {segment_index} out of range "
            f"(scenario has {scenario.n_segments} segments)"
        )
    local_pairs = scenario.schedule.features_in_segment(segment_index)
    local_ids = tuple(fid for _, fid in local_pairs)
    seg = scenario.segments[segment_index]
    local_schedule = DetectionSchedule(
        detected=np.ones((len(local_ids), 1), dtype=bool), feature_ids=local_ids
    )
    local_segment = SegmentSpec(
        duration=seg.duration,
        specific_force=seg.specific_force,
        feature_rel_pos={fid: seg.feature_rel_pos[fid] for fid in local_ids},
    )
    system = augment(local_schedule, [local_segment])
    matrix = lom(system.stripes[0], options.max_power)
    return _build_report(matrix, local_ids, "local", segment_index, options)


def analyze_total(
    scenario: Scenario, options: AnalysisOptions = None
) -> ObservabilityReport:
    """Observability report for the whole scenario.

    Builds the fixed-dimension augmented system over all features detected
    anywhere, stacks the total observability matrix with the configured
    transition expansion, and classifies the standard candidate functionals.
    """
    options = options or AnalysisOptions()
    system = augment(scenario.schedule, scenario.segments)
    matrix = tom(system.stripes, options.max_power, options.expansion_mode)
    return _build_report(matrix, system.feature_ids, "total", None, options)


def case_scenario(
    case_id: int,
    feature_positions=DEFAULT_FEATURE_POSITIONS,
    vehicle_position=DEFAULT_VEHICLE_POSITION,
    forces=DEFAULT_FORCES,
    delta: float = DEFAULT_SEGMENT_DURATION,
) -> Scenario:
    """Two-feature / two-segment scenario for one of the benchmark cases.

    All segments share the same vehicle vantage point, so each feature keeps
    one relative position throughout; the per-segment specific forces default
    to a vertical force followed by a slightly tilted one.
    """
    if case_id not in CASE_SCHEDULES:
        raise ValueError(f"case_id must be one of {sorted(CASE_SCHEDULES)}, got {case_id}")
    positions = [_as_finite_array(p, "feature_positions", (3,)) for p in feature_positions]
    if len(positions) != 2:
        raise ValueError("exactly two feature positions are required")
    vantage = _as_finite_array(vehicle_position, "vehicle_position", (3,))
    force_list = [_as_finite_array(f, "forces", (3,)) for f in forces]
    if len(force_list) != 2:
        raise ValueError("exactly two segment forces are required")
    ids = ("f1", "f2")
    rel = {fid: pos - vantage for fid, pos in zip(ids, positions)}
    pattern = np.array(CASE_SCHEDULES[case_id], dtype=bool)
    schedule = DetectionSchedule(detected=pattern, feature_ids=ids)
    segments = []
    for i, f in enumerate(force_list):
        segments.append(
            SegmentSpec(
                duration=delta,
                specific_force=f,
                feature_rel_pos={
                    fid: rel[fid] for _, fid in schedule.features_in_segment(i)
                },
            )
        )
    return Scenario(schedule=schedule, segments=segments)


def analyze_case(
    case_id: int,
    feature_positions=DEFAULT_FEATURE_POSITIONS,
    vehicle_position=DEFAULT_VEHICLE_POSITION,
    forces=DEFAULT_FORCES,
    delta: float = DEFAULT_SEGMENT_DURATION,
    options: AnalysisOptions = None,
) -> ObservabilityReport:
    """Total-observability report for one benchmark detection pattern."""
    scenario = case_scenario(case_id, feature_positions, vehicle_position, forces, delta)
    return analyze_total(scenario, options)
