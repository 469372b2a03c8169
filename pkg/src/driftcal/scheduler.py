"""Replay adapted runs under calibration policies and count outcomes.

Segment-replay semantics: within each drift segment, the first cycle whose
trigger fires schedules a preventive calibration and consumes the segment
(the adapted data's next segment is the post-reset trajectory). If the
ground-truth crossing is reached first, it scores one violation plus one
corrective calibration. Both action kinds count toward n_cal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .adaptation import AdaptedDataset, AdaptedRun
from .labeling import compute_ttd

POLICY_KINDS = ("reactive", "fixed", "predictive", "quantile")

EVENT_PREVENTIVE = "preventive_cal"
EVENT_VIOLATION = "violation"
EVENT_CORRECTIVE = "corrective_cal"


class SimulationError(ValueError):
    """The replay hit an unusable input (e.g. a missing score)."""


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    margin: int = 5  # predictive/quantile lead time m
    period: int | None = None  # fixed-policy interval P
    quantile_level: float = 0.1

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if self.kind == "fixed":
            if self.period is None or self.period < 1:
                raise ValueError(f"fixed policy needs period >= 1, got {self.period}")


@dataclass(frozen=True)
class CostSpec:
    c_cal: float = 1.0
    c_vio: float = 5.0

    def __post_init__(self):
        if self.c_cal < 0 or self.c_vio < 0:
            raise ValueError("costs must be >= 0")


@dataclass(frozen=True)
class CapacitySpec:
    k: int
    window_width: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"capacity K must be >= 1, got {self.k}")
        if self.window_width < 1:
            raise ValueError(f"window_width must be >= 1, got {self.window_width}")


@dataclass(frozen=True)
class SimEvent:
    engine_id: int
    cycle: int
    event: str
    score: float | None = None  # trigger score; None for reactive/fixed/corrective


@dataclass
class PolicyOutcome:
    policy: str
    n_cal: int
    n_vio: int
    cost: float
    events: list[SimEvent] = field(default_factory=list)


def total_cost(n_cal: int, n_vio: int, costs: CostSpec) -> float:
    if n_cal < 0 or n_vio < 0:
        raise ValueError("counts must be >= 0")
    return costs.c_cal * n_cal + costs.c_vio * n_vio


def rank_by_urgency(candidates, k: int):
    """Smallest scores first, ties broken by ascending instrument id;
    returns the first min(k, n) candidates."""
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    ordered = sorted(candidates, key=lambda c: (c[1], c[0]))
    return ordered[:k]


@dataclass(frozen=True)
class CycleScorer:
    """Decision scores keyed by (engine_id, cycle).

    Scores exist from ``start_cycle`` onward (forecasters need a full
    window); before that, policies simply cannot trigger.
    """

    scores: dict[tuple[int, int], float]
    start_cycle: int = 1

    def __call__(self, engine_id: int, cycle: int) -> float:
        key = (engine_id, cycle)
        if key not in self.scores:
            raise SimulationError(f"no score for engine {engine_id} at cycle {cycle}")
        return self.scores[key]


def oracle_scorer(dataset: AdaptedDataset) -> CycleScorer:
    """Ground-truth cycles-to-next-crossing; +inf where no crossing remains.

    The +inf convention keeps perfect foresight from calibrating in
    crossing-free final segments, where countdown labels measure distance
    to the end of the run rather than real drift.
    """
    scores: dict[tuple[int, int], float] = {}
    for run in dataset.runs:
        ttd = compute_ttd(run).values
        for seg in run.segments:
            for t in range(seg.start, seg.end + 1):
                if seg.crossing is None or t > seg.crossing:
                    scores[(run.engine_id, t)] = math.inf
                else:
                    scores[(run.engine_id, t)] = float(ttd[t - 1])
    return CycleScorer(scores=scores, start_cycle=1)


@dataclass
class _RunState:
    run: AdaptedRun
    seg_idx: int = 0
    cycle: int = 1
    since_cal: int = 0
    done: bool = False

    def current_segment(self):
        return self.run.segments[self.seg_idx]

    def advance_segment(self):
        self.seg_idx += 1
        self.since_cal = 0
        if self.seg_idx >= len(self.run.segments):
            self.done = True
        else:
            self.cycle = self.run.segments[self.seg_idx].start


def simulate(
    dataset: AdaptedDataset,
    scorer: CycleScorer | None,
    policy: PolicySpec,
    costs: CostSpec = CostSpec(),
    capacity: CapacitySpec | None = None,
) -> PolicyOutcome:
    """Replay every run in the dataset under one policy.

    Runs are stepped on a shared global cycle axis (all start at cycle 1),
    which is what makes capacity-limited planning well defined; without a
    CapacitySpec the runs are independent. Preventive calibrations are
    capacity-limited, corrective ones (forced by a violation) are not.
    """
    if policy.kind in ("predictive", "quantile") and scorer is None:
        raise SimulationError(f"{policy.kind} policy requires a scorer")

    states = [_RunState(run=run) for run in dataset.runs]
    n_cal = 0
    n_vio = 0
    events: list[SimEvent] = []
    t = 1
    window_id = -1
    budget = 0
    while any(not s.done for s in states):
        if capacity is not None:
            wid = (t - 1) // capacity.window_width
            if wid != window_id:
                window_id = wid
                budget = capacity.k

        candidates: list[tuple[int, float, _RunState]] = []
        for s in states:
            if s.done or s.cycle != t:
                continue
            seg = s.current_segment()
            if seg.crossing is not None and t == seg.crossing:
                n_vio += 1
                n_cal += 1
                events.append(SimEvent(s.run.engine_id, t, EVENT_VIOLATION))
                events.append(SimEvent(s.run.engine_id, t, EVENT_CORRECTIVE))
                s.advance_segment()
                continue
            s.since_cal += 1
            wants, score = False, None
            if policy.kind == "fixed":
                if s.since_cal >= policy.period:
                    wants, score = True, 0.0
            elif policy.kind in ("predictive", "quantile"):
                if t >= scorer.start_cycle:
                    value = scorer(s.run.engine_id, t)
                    if value <= policy.margin:
                        wants, score = True, value
            if wants:
                candidates.append((s.run.engine_id, score, s))
            else:
                s.cycle = t + 1
                if s.cycle > seg.end:
                    # only reachable in a crossing-free final segment
                    s.advance_segment()

        if candidates:
            if capacity is None:
                serviced = candidates
            else:
                picked = []
                if budget > 0:
                    picked = rank_by_urgency(
                        [(eng, sc) for eng, sc, _ in candidates],
                        min(budget, len(candidates)),
                    )
                chosen = {eng for eng, _ in picked}
                budget -= len(picked)
                serviced = [c for c in candidates if c[0] in chosen]
                for eng, _, s in candidates:
                    if eng not in chosen:  # deferred; stays eligible
                        s.cycle = t + 1
                        if s.cycle > s.current_segment().end:
                            s.advance_segment()
            for eng, score, s in serviced:
                n_cal += 1
                logged = None if policy.kind in ("reactive", "fixed") else score
                events.append(SimEvent(eng, t, EVENT_PREVENTIVE, logged))
                s.advance_segment()
        t += 1

    return PolicyOutcome(
        policy=policy.kind,
        n_cal=n_cal,
        n_vio=n_vio,
        cost=total_cost(n_cal, n_vio, costs),
        events=events,
    )


def median_segment_length(dataset: AdaptedDataset) -> int:
    """Median drift-segment length in cycles; the default fixed period."""
    lengths = [seg.end - seg.start + 1 for run in dataset.runs for seg in run.segments]
    if not lengths:
        raise ValueError("dataset has no segments")
    return max(1, int(np.median(lengths)))
