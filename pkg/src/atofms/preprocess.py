"""Ion-impact event detection and the join with schedule neighborhoods.

A pulse qualifies as an event when it holds at least ``d_min`` consecutive
samples at or above the width threshold ``hw``; its support then extends
outward to where the signal first drops below the (lower) support
threshold ``h0``.  Supports that run into each other merge into a single
event.  Everything outside event supports is treated as a zero-weight
observation, which the likelihood absorbs into its linear term, so only
event supports are ever stored.

Detection is a pure function of the trace; it could run on chunks (with an
overlap margin of a plausible pulse width) and merge deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import LikelihoodEvalContext
from .schedule import event_neighbors
from .simulate import Trace

__all__ = [
    "DetectionParams",
    "Event",
    "EventList",
    "detect_events",
    "events_to_context",
]


@dataclass(frozen=True)
class DetectionParams:
    """Thresholds of the event detector.

    Attributes
    ----------
    h0 : float
        Support threshold: event supports extend while the signal stays at
        or above this level.  0 < h0 <= hw.
    hw : float
        Width-test threshold: a pulse qualifies only if it stays at or
        above this level for at least ``d_min`` samples.
    d_min : int
        Minimum width (in whole samples) at level ``hw``.
    """

    h0: float = 1.0
    hw: float = 2.0
    d_min: int = 2

    def __post_init__(self):
        if not (0 < self.h0 <= self.hw):
            raise ValueError("need 0 < h0 <= hw")
        if self.d_min < 1:
            raise ValueError("d_min must be a positive integer")


@dataclass(frozen=True)
class Event:
    """One detected pulse: inclusive sample interval, weight, raw samples."""

    t_start: int
    t_end: int
    z: float
    samples: np.ndarray

    @property
    def width(self) -> int:
        return self.t_end - self.t_start + 1


@dataclass(frozen=True)
class EventList:
    """Sorted, disjoint events over a trace (or spectrum) axis.

    The complement of the event supports is the zero-weight region; it is
    implicit, never stored.
    """

    events: tuple
    total_samples: int

    def __post_init__(self):
        ordered = tuple(sorted(self.events, key=lambda ev: ev.t_start))
        object.__setattr__(self, "events", ordered)
        prev_end = -1
        for ev in self.events:
            if not (0 <= ev.t_start <= ev.t_end < self.total_samples):
                raise ValueError("event outside the sample axis")
            if ev.t_start <= prev_end:
                raise ValueError("events must be sorted and disjoint")
            if ev.z <= 0:
                raise ValueError("event weights must be positive")
            prev_end = ev.t_end

    def __len__(self) -> int:
        return len(self.events)

    @property
    def covered_samples(self) -> int:
        return sum(ev.width for ev in self.events)

    def to_jsonl(self, path):
        """Write one JSON object per line; the first line carries the axis size."""
        with open(path, "w") as fh:
            fh.write(json.dumps({"total_samples": self.total_samples}) + "\n")
            for ev in self.events:
                fh.write(
                    json.dumps(
                        {
                            "t0": int(ev.t_start),
                            "t1": int(ev.t_end),
                            "z": float(ev.z),
                            "samples": [float(v) for v in ev.samples],
                        }
                    )
                    + "\n"
                )

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            header = json.loads(fh.readline())
            events = []
            for line in fh:
                rec = json.loads(line)
                events.append(
                    Event(
                        t_start=int(rec["t0"]),
                        t_end=int(rec["t1"]),
                        z=float(rec["z"]),
                        samples=np.asarray(rec["samples"], dtype=float),
                    )
                )
        return cls(events=tuple(events), total_samples=int(header["total_samples"]))


def _runs(mask):
    """Start (inclusive) and end (exclusive) indices of True runs."""
    if not mask.any():
        return np.empty((0, 2), dtype=np.int64)
    edges = np.diff(mask.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1
    if mask[0]:
        starts = np.concatenate([[0], starts])
    if mask[-1]:
        ends = np.concatenate([ends, [mask.size]])
    return np.stack([starts, ends], axis=1)


def detect_events(y, params):
    """Detect ion-impact events in a trace (or spectrum).

    A maximal run of samples >= hw with length >= d_min marks a pulse; the
    pulse's support is the surrounding maximal run of samples >= h0.  Two
    pulses inside one support region yield a single merged event.  The
    event weight is the sum of the support samples.

    Parameters
    ----------
    y : Trace or ndarray
        Signal to scan for pulses.
    params : DetectionParams

    Returns
    -------
    EventList
    """
    values = y.y if isinstance(y, Trace) else np.asarray(y, dtype=float)
    support_runs = _runs(values >= params.h0)
    events = []
    if support_runs.size:
        wide_runs = _runs(values >= params.hw)
        wide_runs = wide_runs[(wide_runs[:, 1] - wide_runs[:, 0]) >= params.d_min]
        if wide_runs.size:
            # every qualifying wide run lies inside exactly one support run
            holder = np.searchsorted(support_runs[:, 0], wide_runs[:, 0], side="right") - 1
            for idx in np.unique(holder):
                t0, t_end = int(support_runs[idx, 0]), int(support_runs[idx, 1]) - 1
                segment = values[t0 : t_end + 1]
                events.append(
                    Event(t_start=t0, t_end=t_end, z=float(segment.sum()), samples=segment.copy())
                )
    return EventList(events=tuple(events), total_samples=values.size)


def events_to_context(ev, sched):
    """Join detected events with their schedule neighborhoods.

    Computes, for every event, the per-scan candidate placements and the
    union of candidate bins, packing them into the compressed layout the
    likelihood evaluates on.  No events are dropped.

    Parameters
    ----------
    ev : EventList
        Events on the trace axis.
    sched : FiringSchedule

    Returns
    -------
    LikelihoodEvalContext
    """
    if ev.total_samples != sched.total_samples:
        raise ValueError(
            f"event list covers {ev.total_samples} samples, "
            f"schedule implies {sched.total_samples}"
        )
    indices = []
    offsets = np.zeros(len(ev.events) + 1, dtype=np.int64)
    intervals = []
    for k, event in enumerate(ev.events):
        placements = event_neighbors(sched, event.t_start, event.t_end)
        if not placements:
            raise ValueError(
                f"event at [{event.t_start}, {event.t_end}] has no candidate bins"
            )
        pieces = [np.arange(lo, hi + 1) for _, lo, hi in placements]
        bins = np.unique(np.concatenate(pieces))
        indices.append(bins)
        offsets[k + 1] = offsets[k] + bins.size
        intervals.append(tuple(placements))
    neighbor_indices = (
        np.concatenate(indices) if indices else np.array([], dtype=np.int64)
    )
    return LikelihoodEvalContext(
        n=sched.n,
        n_scans=sched.n_scans,
        weights=np.array([event.z for event in ev.events]),
        neighbor_indices=neighbor_indices.astype(np.int64),
        offsets=offsets,
        intervals=tuple(intervals),
        events=ev,
    )
