"""Firing schedules and the implicit trace-to-spectrum measurement graph.

A schedule is the strictly increasing list of firing times tau (sample
indices) at which scans are launched.  Scan l occupies trace samples
[tau_l, tau_l + n), so trace sample t can contain signal from bin t - tau_l
of any scan l with 0 <= t - tau_l < n.  That sparse bipartite relation is
never materialized: all queries run by binary search over tau.

Bins and samples are indexed from 0 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FiringSchedule",
    "generate_schedule",
    "sample_neighbors",
    "event_neighbors",
    "dense_adjacency",
]

# Guard for the dense test oracle; anything bigger is a mistake.
_MAX_DENSE_CELLS = 10**7


@dataclass(frozen=True)
class FiringSchedule:
    """Firing times of all scans plus the scan length.

    Attributes
    ----------
    tau : ndarray
        Strictly increasing firing times (int64 sample indices), tau[0] == 0.
    n : int
        Scan length in samples (= number of spectrum bins).
    """

    tau: np.ndarray
    n: int

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.int64)
        object.__setattr__(self, "tau", tau)
        if self.n < 1:
            raise ValueError("scan length n must be positive")
        if tau.ndim != 1 or tau.size < 1:
            raise ValueError("tau must be a non-empty 1-d array")
        if tau[0] != 0:
            raise ValueError("first firing time must be 0")
        if tau.size > 1 and np.any(np.diff(tau) <= 0):
            raise ValueError("firing times must be strictly increasing")

    @property
    def n_scans(self) -> int:
        return int(self.tau.size)

    @property
    def total_samples(self) -> int:
        """Trace length: the last scan runs to tau[-1] + n."""
        return int(self.tau[-1]) + self.n

    @property
    def gaps(self) -> np.ndarray:
        """Inter-firing intervals, length n_scans - 1."""
        return np.diff(self.tau)


def generate_schedule(n, n_scans, dtau_min, dtau_max, seed):
    """Draw a random schedule with i.i.d. uniform integer firing gaps.

    Gaps are uniform on [max(dtau_min, 1), dtau_max]: a requested minimum
    of 0 is bumped to 1 because two scans firing at the identical sample
    would make their spectrum copies indistinguishable.

    Parameters
    ----------
    n : int
        Scan length in samples.
    n_scans : int
        Number of scans to fire.
    dtau_min, dtau_max : int
        Inclusive bounds of the firing-gap distribution; 0 <= dtau_min <= dtau_max
        and dtau_max >= 1.
    seed : int or numpy.random.Generator
        Seed (or generator) making the draw reproducible.

    Returns
    -------
    FiringSchedule
    """
    if n < 1:
        raise ValueError("scan length n must be positive")
    if n_scans < 1:
        raise ValueError("need at least one scan")
    if dtau_min < 0 or dtau_max < dtau_min:
        raise ValueError("need 0 <= dtau_min <= dtau_max")
    lo = max(int(dtau_min), 1)
    hi = int(dtau_max)
    if hi < lo:
        raise ValueError("dtau_max must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    gaps = rng.integers(lo, hi + 1, size=n_scans - 1, dtype=np.int64)
    tau = np.concatenate([[0], np.cumsum(gaps)])
    return FiringSchedule(tau=tau, n=n)


def sample_neighbors(sched, t):
    """Candidate spectrum bins for trace sample ``t``.

    Returns the sorted array {t - tau_l : 0 <= t - tau_l < n}; empty only
    when ``t`` falls in a dead-time gap (possible when some firing gap
    exceeds n).  Runs in O(log n_scans + result size).

    Parameters
    ----------
    sched : FiringSchedule
    t : int
        Trace sample index, 0 <= t < sched.total_samples.

    Returns
    -------
    ndarray
        Sorted candidate bin indices (int64).
    """
    if t < 0 or t >= sched.total_samples:
        raise ValueError(f"sample index {t} outside trace of length {sched.total_samples}")
    tau = sched.tau
    lo = np.searchsorted(tau, t - sched.n + 1, side="left")
    hi = np.searchsorted(tau, t, side="right")
    return (t - tau[lo:hi])[::-1].copy()


def event_neighbors(sched, t_start, t_end):
    """Per-scan candidate placements of an event spanning [t_start, t_end].

    For every scan whose span intersects the event, returns the clipped
    bin interval the event would occupy in that scan.  The union of the
    returned intervals is the event's full candidate-bin set, and their
    count is the event's degree.

    Parameters
    ----------
    sched : FiringSchedule
    t_start, t_end : int
        Inclusive sample interval, 0 <= t_start <= t_end < total_samples.

    Returns
    -------
    list of (scan, first_bin, last_bin)
        In ascending firing order; bin bounds are inclusive.
    """
    if not (0 <= t_start <= t_end < sched.total_samples):
        raise ValueError(f"invalid event interval [{t_start}, {t_end}]")
    tau = sched.tau
    n = sched.n
    first = int(np.searchsorted(tau, t_start - n + 1, side="left"))
    last = int(np.searchsorted(tau, t_end, side="right"))
    out = []
    for scan in range(first, last):
        offset = int(tau[scan])
        lo = max(0, t_start - offset)
        hi = min(n - 1, t_end - offset)
        if lo <= hi:
            out.append((scan, lo, hi))
    return out


def dense_adjacency(sched):
    """Dense 0/1 sample-by-bin incidence matrix; test oracle only.

    Entry (t, i) is 1 iff some scan maps bin i to trace sample t.  Guarded
    against accidental huge allocations.
    """
    T = sched.total_samples
    n = sched.n
    if T * n > _MAX_DENSE_CELLS:
        raise ValueError(f"dense matrix would hold {T * n} cells (limit {_MAX_DENSE_CELLS})")
    A = np.zeros((T, n), dtype=np.uint8)
    cols = np.arange(n)
    for offset in sched.tau:
        A[offset + cols, cols] = 1
    return A
