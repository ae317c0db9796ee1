"""Quantitative scoring of reconstructed spectra against ground truth.

Event-level matching uses the permissive overlap rule: an estimated event
counts as a true positive when some truth event covers at least half of
its width, and one truth event may validate several estimates.  True
negatives are undefined for this problem (pulses vary in width and may
overlap), so only TPR / FDR / FNR are reported.

Peak-level matching runs on a calibrated sqrt(mass/charge) axis using a
simple centroid picker: local maxima above a height floor, centroided over
the half-maximum support, with the full width measured by linear
interpolation at the half-maximum crossings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from .baselines import SpectrumEstimate
from .preprocess import DetectionParams, detect_events, events_to_context
from .solver import assign_events, ista_solve

__all__ = [
    "MatchReport",
    "Calibration",
    "InsufficientDataError",
    "match_events",
    "pick_peaks",
    "match_peaks",
    "estimate_single_ion_weight",
    "width_intensity_cdf",
    "curve_sweep",
    "iteration_curve",
    "tpr_at_fdr",
]

# Median of the exponential single-ion weight law sits at ln(2) times the
# mean, so the robust median estimate is rescaled to estimate the mean.
_MEDIAN_TO_MEAN = 1.0 / math.log(2.0)


class InsufficientDataError(ValueError):
    """Raised when the rare-ion calibration finds no usable ions."""


@dataclass(frozen=True)
class MatchReport:
    """Detection counts and rates from event or peak matching.

    ``matches`` holds, per estimated item, the indices of the truth items
    it matched (empty tuple for false positives).
    """

    tp: int
    fp: int
    fn: int
    matches: tuple = ()

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def tpr(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else float("nan")

    @property
    def fdr(self) -> float:
        denom = self.fp + self.tp
        return self.fp / denom if denom else float("nan")

    @property
    def fnr(self) -> float:
        denom = self.tp + self.fn
        return self.fn / denom if denom else float("nan")


@dataclass(frozen=True)
class Calibration:
    """Linear flight-time calibration of the spectrum axis.

    A species with mass-to-charge ratio m/z arrives after
    flight_constant * sqrt(m/z) seconds; bin b therefore sits at
    sqrt(m/z) = b * sample_period / flight_constant.
    """

    flight_constant: float = 1.0
    sample_period: float = 1e-3

    def __post_init__(self):
        if self.flight_constant <= 0 or self.sample_period <= 0:
            raise ValueError("calibration constants must be > 0")

    def mcr_of_bin(self, b):
        """Map bin index (fractional allowed) to the sqrt(m/z) axis."""
        return np.asarray(b, dtype=float) * self.sample_period / self.flight_constant


def match_events(truth, est):
    """Match estimated events against truth events on a shared axis.

    An estimated event is a true positive when some truth event overlaps
    at least 50% of the estimate's width (inclusive).  Truth events
    matched by no estimate are false negatives.  Matching is per-event:
    several estimates may validate against the same truth event.

    Parameters
    ----------
    truth, est : EventList
        Over the same bin axis.

    Returns
    -------
    MatchReport
    """
    if truth.total_samples != est.total_samples:
        raise ValueError(
            f"axis mismatch: truth covers {truth.total_samples} samples, "
            f"estimate covers {est.total_samples}"
        )
    truth_events = truth.events
    starts = np.array([ev.t_start for ev in truth_events], dtype=np.int64)
    ends = np.array([ev.t_end for ev in truth_events], dtype=np.int64)
    order = np.argsort(starts)
    starts, ends = starts[order], ends[order]
    truth_matched = np.zeros(len(truth_events), dtype=bool)
    tp = fp = 0
    matches = []
    for ev in est.events:
        width = ev.width
        lo = int(np.searchsorted(ends, ev.t_start, side="left"))
        hit = []
        for j in range(lo, len(truth_events)):
            if starts[j] > ev.t_end:
                break
            overlap = min(ends[j], ev.t_end) - max(starts[j], ev.t_start) + 1
            if 2 * overlap >= width:
                hit.append(int(order[j]))
        if hit:
            tp += 1
            truth_matched[hit] = True
        else:
            fp += 1
        matches.append(tuple(hit))
    fn = int(len(truth_events) - truth_matched.sum())
    return MatchReport(tp=tp, fp=fp, fn=fn, matches=tuple(matches))


def _spectrum_values(x):
    return x.values if isinstance(x, SpectrumEstimate) else np.asarray(x, dtype=float)


def _find_pulses(values, min_height):
    """Locate local maxima and their half-maximum geometry.

    Returns a list of (apex, centroid, fwhm, height).  The half-maximum
    support is walked outward from the apex while samples stay at or above
    half height; edge crossings are linearly interpolated.
    """
    if min_height <= 0:
        raise ValueError("min_height must be > 0")
    n = values.size
    pulses = []
    for i in range(n):
        v = values[i]
        if v < min_height:
            continue
        left = values[i - 1] if i > 0 else -np.inf
        right = values[i + 1] if i < n - 1 else -np.inf
        if not (v > left and v >= right):
            continue
        half = v / 2.0
        lo = i
        while lo > 0 and values[lo - 1] >= half and values[lo - 1] <= values[lo]:
            lo -= 1
        hi = i
        while hi < n - 1 and values[hi + 1] >= half and values[hi + 1] <= values[hi]:
            hi += 1
        if lo > 0 and values[lo] > half:
            frac = (values[lo] - half) / (values[lo] - values[lo - 1])
            left_edge = lo - frac
        else:
            left_edge = float(lo) - 0.5
        if hi < n - 1 and values[hi] > half:
            frac = (values[hi] - half) / (values[hi] - values[hi + 1])
            right_edge = hi + frac
        else:
            right_edge = float(hi) + 0.5
        seg = values[lo : hi + 1]
        centroid = float(np.dot(np.arange(lo, hi + 1), seg) / seg.sum())
        pulses.append((i, centroid, float(right_edge - left_edge), float(v)))
    return pulses


def pick_peaks(x, min_height, cal):
    """Centroid peak picking on the calibrated sqrt(m/z) axis.

    Local maxima at or above ``min_height`` become peaks; each peak's
    position is the intensity centroid over its half-maximum support and
    its intensity is the apex height.

    Parameters
    ----------
    x : SpectrumEstimate or ndarray
    min_height : float
    cal : Calibration

    Returns
    -------
    list of (mcr, intensity)
        Sorted by intensity, descending.
    """
    values = _spectrum_values(x)
    peaks = [
        (float(cal.mcr_of_bin(centroid)), height)
        for _, centroid, _, height in _find_pulses(values, min_height)
    ]
    peaks.sort(key=lambda p: -p[1])
    return peaks


def match_peaks(truth, est, k, delta_m):
    """Match the top-k peak lists within a mass tolerance.

    Both lists are truncated to their ``k`` most intense peaks; an
    estimated peak is a true positive when some retained truth peak lies
    within ``delta_m`` on the sqrt(m/z) axis.

    Parameters
    ----------
    truth, est : list of (mcr, intensity)
    k : int
    delta_m : float

    Returns
    -------
    MatchReport
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if delta_m <= 0:
        raise ValueError("delta_m must be > 0")
    truth_top = sorted(truth, key=lambda p: -p[1])[:k]
    est_top = sorted(est, key=lambda p: -p[1])[:k]
    truth_pos = np.array([p[0] for p in truth_top])
    truth_matched = np.zeros(len(truth_top), dtype=bool)
    tp = fp = 0
    matches = []
    for mcr, _ in est_top:
        hit = (
            tuple(np.flatnonzero(np.abs(truth_pos - mcr) <= delta_m))
            if truth_pos.size
            else ()
        )
        if hit:
            tp += 1
            truth_matched[list(hit)] = True
        else:
            fp += 1
        matches.append(tuple(int(h) for h in hit))
    fn = int(len(truth_top) - truth_matched.sum())
    return MatchReport(tp=tp, fp=fp, fn=fn, matches=tuple(matches))


def estimate_single_ion_weight(acquisition_events, lo=0.001, hi=0.01):
    """Estimate the mean single-ion weight from rare species.

    Bins covered by an event in more than ``lo`` but less than ``hi`` of
    the acquisitions are taken as rare species: when such a bin fires, the
    event almost surely holds a single ion, so its weight follows the
    exponential single-ion law.  The median weight of those events,
    rescaled by 1/ln(2) (the exponential's median-to-mean factor), is a
    consistent estimate of the mean single-ion weight.

    Parameters
    ----------
    acquisition_events : sequence of EventList
        Per-acquisition events on a shared bin axis; at least 100.
    lo, hi : float
        Occurrence-frequency window defining rare species, 0 < lo < hi < 1.

    Returns
    -------
    float

    Raises
    ------
    InsufficientDataError
        When no bin falls in the rare window or no event peaks on one.
    """
    if len(acquisition_events) < 100:
        raise ValueError("need at least 100 acquisitions")
    if not (0 < lo < hi < 1):
        raise ValueError("need 0 < lo < hi < 1")
    n = acquisition_events[0].total_samples
    occupancy = np.zeros(n, dtype=np.int64)
    for ev in acquisition_events:
        if ev.total_samples != n:
            raise ValueError("acquisitions disagree on the bin axis")
        covered = np.zeros(n, dtype=bool)
        for event in ev.events:
            covered[event.t_start : event.t_end + 1] = True
        occupancy += covered
    freq = occupancy / len(acquisition_events)
    rare = (freq > lo) & (freq < hi)
    if not rare.any():
        raise InsufficientDataError("no bins fall in the rare-occurrence window")
    weights = []
    for ev in acquisition_events:
        for event in ev.events:
            apex = event.t_start + int(np.argmax(event.samples))
            if rare[apex]:
                weights.append(event.z)
    if not weights:
        raise InsufficientDataError("no events peak on a rare bin")
    return float(np.median(weights)) * _MEDIAN_TO_MEAN


def width_intensity_cdf(x, min_height):
    """Empirical CDF of the pulse width-to-intensity ratio.

    For every detected pulse the ratio FWHM / apex height measures
    spikiness; broadened reconstructions shift the CDF right.

    Returns
    -------
    list of (ratio, cumulative_fraction)
        Sorted by ratio; the last fraction is 1.0.
    """
    values = _spectrum_values(x)
    pulses = _find_pulses(values, min_height)
    ratios = sorted(fwhm / height for _, _, fwhm, height in pulses)
    m = len(ratios)
    return [(r, (i + 1) / m) for i, r in enumerate(ratios)]


def kolmogorov_distance(cdf_a, cdf_b):
    """Largest vertical gap between two empirical CDFs given as point lists."""
    xs = sorted({x for x, _ in cdf_a} | {x for x, _ in cdf_b})

    def value(cdf, x):
        v = 0.0
        for xx, f in cdf:
            if xx <= x:
                v = f
            else:
                break
        return v

    return max(abs(value(cdf_a, x) - value(cdf_b, x)) for x in xs) if xs else 0.0


def _scaled_detection(base, hw):
    """Detection params at a swept width threshold, keeping the h0/hw ratio."""
    ratio = base.h0 / base.hw
    return DetectionParams(h0=hw * ratio, hw=hw, d_min=base.d_min)


def curve_sweep(estimator, acquisition, variable, values, truth_events,
                spectrum_detection):
    """Trade-off curve of a reconstruction method on fixed data.

    Two sweep axes exist: ``theta0`` refits the estimator per value and
    detects events in each spectrum at the fixed spectrum thresholds;
    ``hw`` fits once and sweeps the spectrum-side width threshold (the h0
    support threshold scales along to keep their ratio).  Points are
    evaluated in order on the same inputs, so curves from different
    methods are directly comparable.

    Parameters
    ----------
    estimator : sklearn-style reconstructor
        Cloned per point; must expose ``fit`` and ``spectrum_``.
    acquisition : Acquisition
    variable : str
        "theta0" or "hw".
    values : sequence of float
        At least two sweep points.
    truth_events : EventList
        Ground-truth events on the spectrum axis.
    spectrum_detection : DetectionParams
        Spectrum-side detection settings (the fixed side of the sweep).

    Returns
    -------
    list of dict
        One row per value: {value, tp, fp, fn, tpr, fdr, fnr}.
    """
    values = list(values)
    if len(values) < 2:
        raise ValueError("a sweep needs at least two values")
    if variable not in ("theta0", "hw"):
        raise ValueError(f"unknown sweep variable {variable!r}")
    rows = []
    fitted = None
    if variable == "hw":
        fitted = clone(estimator).fit(acquisition)
    for v in values:
        if variable == "theta0":
            est = clone(estimator)
            est.set_params(theta0=v)
            est.fit(acquisition)
            spectrum = est.spectrum_
            detection = spectrum_detection
        else:
            spectrum = fitted.spectrum_
            detection = _scaled_detection(spectrum_detection, v)
        found = detect_events(spectrum.values, detection)
        report = match_events(truth_events, found)
        rows.append(
            {
                "value": float(v),
                "tp": report.tp,
                "fp": report.fp,
                "fn": report.fn,
                "tpr": report.tpr,
                "fdr": report.fdr,
                "fnr": report.fnr,
            }
        )
    return rows


def iteration_curve(trace, sched, detection, model_params, solver_params,
                    truth_events, spectrum_detection):
    """Per-iteration detection metrics of the solver on one trace.

    Runs the solver once, assigning events and scoring the spectrum after
    every update.  Only events whose candidate placements carry rate mass
    are placed: the curve tracks how the solver establishes the existence
    of species over iterations, starting from the all-zero spectrum
    (iteration 0: FNR 1 and FDR 0 by convention).

    Returns
    -------
    list of dict
        Rows {iteration, tp, fp, fn, tpr, fdr, fnr}.
    """
    events = detect_events(trace, detection)
    ctx = events_to_context(events, sched)
    rows = [
        {
            "iteration": 0,
            "tp": 0,
            "fp": 0,
            "fn": len(truth_events.events),
            "tpr": 0.0,
            "fdr": 0.0,
            "fnr": 1.0,
        }
    ]

    def score(k, w):
        spectrum = assign_events(ctx, events, sched, w, skip_unsupported=True)
        per_scan = spectrum.values / sched.n_scans
        found = detect_events(per_scan, spectrum_detection)
        report = match_events(truth_events, found)
        rows.append(
            {
                "iteration": k,
                "tp": report.tp,
                "fp": report.fp,
                "fn": report.fn,
                "tpr": report.tpr,
                "fdr": report.fdr,
                "fnr": report.fnr,
            }
        )

    ista_solve(ctx, model_params, solver_params, on_iteration=score)
    return rows


def tpr_at_fdr(rows, fdr):
    """TPR of a sweep curve at a given FDR, linearly interpolated.

    The curve is reduced to its achieved (fdr, tpr) pairs sorted by FDR;
    queries outside the achieved range clamp to the nearest endpoint.
    """
    pts = sorted(
        {(row["fdr"], row["tpr"]) for row in rows if not math.isnan(row["fdr"])}
    )
    if not pts:
        raise ValueError("curve has no valid points")
    fdrs = np.array([p[0] for p in pts])
    tprs = np.array([p[1] for p in pts])
    # keep the best TPR at duplicate FDRs
    best = {}
    for f, t in zip(fdrs, tprs):
        best[f] = max(best.get(f, -np.inf), t)
    fdrs = np.array(sorted(best))
    tprs = np.array([best[f] for f in fdrs])
    return float(np.interp(fdr, fdrs, tprs))
