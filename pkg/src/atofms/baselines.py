"""Reference spectrum reconstructions used for comparative evaluation.

Two baselines: conventional averaging of non-overlapping scans, and the
naive overlapped-trace estimator that splits every event uniformly across
all of its candidate placements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schedule import event_neighbors, sample_neighbors

__all__ = ["SpectrumEstimate", "average_scans", "naive_atof"]


@dataclass(frozen=True)
class SpectrumEstimate:
    """A reconstructed per-scan spectrum plus its provenance.

    Attributes
    ----------
    values : ndarray
        Non-negative estimate, one entry per bin, in per-scan ADC units.
    method : str
        Reconstruction method tag.
    provenance : dict
        Free-form identifiers (schedule/parameter digests) of the run.
    """

    values: np.ndarray
    method: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("spectrum must be one-dimensional")
        if np.any(values < 0):
            raise ValueError("spectrum must be non-negative")

    @property
    def n(self) -> int:
        return int(self.values.size)


def average_scans(scans):
    """Conventional reconstruction: the arithmetic mean of the scans.

    Parameters
    ----------
    scans : (n_scans, n) array or sequence of equal-length arrays

    Returns
    -------
    SpectrumEstimate
    """
    scans = np.asarray(scans, dtype=float)
    if scans.ndim == 1:
        scans = scans[None, :]
    if scans.ndim != 2 or scans.shape[0] < 1:
        raise ValueError("need at least one scan")
    return SpectrumEstimate(values=scans.mean(axis=0), method="average")


def naive_atof(ev, sched, per_sample=False):
    """Uniform-split reconstruction of an overlapped trace.

    Every event's samples are copied onto each of its candidate placements
    with weight 1/degree, then the spectrum is scaled to per-scan units.
    With ``per_sample=True`` the split is applied sample by sample instead
    (each trace sample spread over its own neighbor bins), which matches
    the event-level form exactly when events span single samples.

    Parameters
    ----------
    ev : EventList
        Events on the trace axis.
    sched : FiringSchedule
    per_sample : bool
        Use the per-sample splitting rule.

    Returns
    -------
    SpectrumEstimate
    """
    if ev.total_samples != sched.total_samples:
        raise ValueError("event list does not match the schedule's trace length")
    n = sched.n
    x = np.zeros(n)
    if per_sample:
        for event in ev.events:
            for offset, value in zip(range(event.t_start, event.t_end + 1), event.samples):
                bins = sample_neighbors(sched, offset)
                if bins.size:
                    x[bins] += value / bins.size
    else:
        for event in ev.events:
            placements = event_neighbors(sched, event.t_start, event.t_end)
            if not placements:
                continue
            share = 1.0 / len(placements)
            for scan, lo, hi in placements:
                first_bin = event.t_start - int(sched.tau[scan])
                src_lo = lo - first_bin
                src_hi = hi - first_bin
                x[lo : hi + 1] += share * event.samples[src_lo : src_hi + 1]
    x /= sched.n_scans
    return SpectrumEstimate(values=x, method="naive")
