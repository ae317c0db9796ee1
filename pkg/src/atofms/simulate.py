"""Synthetic ground truth, per-scan shot-noise realizations, and traces.

Stands in for instrument data: a spectrum is specified as a sparse list of
peaks, each scan draws Poisson ion counts per bin with exponentially
distributed single-ion weights rendered through a bell-shaped detector
pulse, and a trace superposes the scans at their scheduled firing times.

All randomness flows through numpy Generators; per-scan draws use seed
sequences spawned from one root seed, so scans could be drawn in parallel
without changing the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .schedule import FiringSchedule

__all__ = [
    "GroundTruthSpec",
    "Trace",
    "Acquisition",
    "gaussian_kernel",
    "synthetic_peaks",
    "rate_vector_of",
    "expected_spectrum",
    "draw_scan",
    "simulate_scans",
    "assemble_trace",
    "acquisition_stats",
    "simulate_acquisition",
]


@dataclass(frozen=True)
class GroundTruthSpec:
    """Sparse description of the latent spectrum.

    Attributes
    ----------
    peaks : tuple of (center, rate, sigma)
        Peak center bin, mean ion arrivals per scan (> 0), and peak width
        in bins.  ``sigma == 0`` is a delta peak confined to one bin.
    n : int
        Number of spectrum bins.
    w0 : float
        Chemical-noise arrival rate added to every bin.
    kernel_truncate : float
        Half-width of the discrete bell kernels, in multiples of sigma.
    """

    peaks: tuple
    n: int
    w0: float = 1e-6
    kernel_truncate: float = 4.0

    def __post_init__(self):
        object.__setattr__(
            self,
            "peaks",
            tuple((int(c), float(r), float(s)) for c, r, s in self.peaks),
        )
        if self.n < 1:
            raise ValueError("bin count n must be positive")
        if self.w0 < 0:
            raise ValueError("chemical-noise rate must be non-negative")
        for center, rate, sigma in self.peaks:
            if not (0 <= center < self.n):
                raise ValueError(f"peak center {center} outside [0, {self.n})")
            if rate <= 0:
                raise ValueError("peak rates must be > 0")
            if sigma < 0:
                raise ValueError("peak widths must be >= 0")


@dataclass(frozen=True)
class Trace:
    """Detector record of a whole acquisition.

    Attributes
    ----------
    y : ndarray
        Non-negative samples, length schedule.total_samples.
    schedule : FiringSchedule
    """

    y: np.ndarray
    schedule: FiringSchedule

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "y", y)
        if y.shape != (self.schedule.total_samples,):
            raise ValueError(
                f"trace length {y.shape} does not match schedule "
                f"({self.schedule.total_samples} samples)"
            )
        if y.size and y.min() < 0:
            raise ValueError("trace samples must be non-negative")


@dataclass(frozen=True)
class Acquisition:
    """One simulated experiment: the trace plus optional retained scans."""

    trace: Trace
    scans: np.ndarray | None = None
    truth: GroundTruthSpec | None = None

    @property
    def schedule(self) -> FiringSchedule:
        return self.trace.schedule


def gaussian_kernel(sigma, truncate=4.0):
    """Unit-sum discrete bell kernel; ``sigma == 0`` gives a delta."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.array([1.0])
    half = int(np.ceil(truncate * sigma))
    offsets = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def synthetic_peaks(
    n,
    num_peaks,
    seed,
    rate_range=(0.01, 3.0),
    sigma=2.0,
    min_separation=30,
    margin=50,
):
    """Random multimode peak list with log-uniform rates.

    Centers are drawn without replacement on a ``min_separation`` grid so
    neighboring truth peaks stay resolvable; rates are log-uniform over
    ``rate_range`` to mix abundant species with ones near the detection
    floor.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = margin, n - margin
    grid = np.arange(lo, hi, min_separation)
    if num_peaks > grid.size:
        raise ValueError(f"cannot place {num_peaks} peaks with separation {min_separation}")
    centers = np.sort(rng.choice(grid, size=num_peaks, replace=False))
    centers = centers + rng.integers(0, min_separation // 2 + 1, size=num_peaks)
    log_lo, log_hi = np.log(rate_range[0]), np.log(rate_range[1])
    rates = np.exp(rng.uniform(log_lo, log_hi, size=num_peaks))
    return tuple((int(c), float(r), float(sigma)) for c, r in zip(centers, rates))


def rate_vector_of(spec):
    """Materialize the mean arrival-rate vector from a peak list.

    Each peak spreads its rate over a unit-sum bell kernel, so the summed
    rates equal the summed peak rates (up to edge clipping).

    Parameters
    ----------
    spec : GroundTruthSpec

    Returns
    -------
    ndarray
        Non-negative rates, shape (spec.n,).  Excludes the w0 floor.
    """
    w = np.zeros(spec.n)
    for center, rate, sigma in spec.peaks:
        kernel = gaussian_kernel(sigma, spec.kernel_truncate)
        half = (kernel.size - 1) // 2
        lo = center - half
        hi = center + half
        k_lo = max(0, -lo)
        k_hi = kernel.size - max(0, hi - (spec.n - 1))
        w[max(0, lo) : min(spec.n, hi + 1)] += rate * kernel[k_lo:k_hi]
    return w


def expected_spectrum(spec, params, pulse_sigma=2.0):
    """Noise-free expected per-scan detector output for a ground truth.

    This is the infinite-scan average: the arrival rates rendered through
    the detector pulse and scaled by the mean single-ion weight.  Used as
    the reference spectrum in evaluations.
    """
    w = rate_vector_of(spec)
    pulse = gaussian_kernel(pulse_sigma, spec.kernel_truncate)
    return params.mu * np.convolve(w, pulse, mode="same")


def draw_scan(w, params, jitter_sd=0.0, pulse_sigma=0.0, rng=0):
    """Draw one scan under the compound Poisson + Erlang detector model.

    Per bin i the ion count is Poisson(w[i] + w0); each ion contributes an
    Exp(mu) weight rendered as a bell pulse centered at i plus
    integer-rounded Gaussian arrival jitter.  Pulse mass falling outside
    the scan window is dropped.

    Parameters
    ----------
    w : ndarray
        Mean arrivals per bin, >= 0.
    params : ModelParams
        Supplies the detector gain mu and the chemical-noise floor w0.
    jitter_sd : float
        Standard deviation of the per-ion arrival jitter, in samples.
    pulse_sigma : float
        Width of the rendered detector pulse; 0 keeps each ion in one bin.
    rng : int or numpy.random.Generator

    Returns
    -------
    ndarray
        Non-negative detector output, same length as ``w``.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("rates must be non-negative")
    if jitter_sd < 0:
        raise ValueError("jitter_sd must be >= 0")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = w.size
    counts = rng.poisson(w + params.w0)
    total = int(counts.sum())
    x = np.zeros(n)
    if total == 0:
        return x
    centers = np.repeat(np.arange(n), counts)
    weights = rng.exponential(params.mu, size=total)
    if jitter_sd > 0:
        centers = centers + np.rint(rng.normal(0.0, jitter_sd, size=total)).astype(np.int64)
    if pulse_sigma == 0:
        keep = (centers >= 0) & (centers < n)
        np.add.at(x, centers[keep], weights[keep])
        return x
    kernel = gaussian_kernel(pulse_sigma)
    half = (kernel.size - 1) // 2
    positions = centers[:, None] + np.arange(-half, half + 1)[None, :]
    mass = weights[:, None] * kernel[None, :]
    keep = (positions >= 0) & (positions < n)
    np.add.at(x, positions[keep], mass[keep])
    return x


def simulate_scans(w, params, n_scans, jitter_sd=0.0, pulse_sigma=0.0, seed=0):
    """Draw ``n_scans`` independent scans from per-scan spawned seeds."""
    if n_scans < 1:
        raise ValueError("need at least one scan")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_scans)
    scans = np.empty((n_scans, np.asarray(w).size))
    for l, child in enumerate(children):
        scans[l] = draw_scan(
            w, params, jitter_sd=jitter_sd, pulse_sigma=pulse_sigma,
            rng=np.random.default_rng(child),
        )
    return scans


def assemble_trace(scans, sched):
    """Superpose scans at their firing times.

    Parameters
    ----------
    scans : sequence of ndarray or (n_scans, n) array
    sched : FiringSchedule

    Returns
    -------
    Trace
    """
    scans = np.asarray(scans, dtype=float)
    if scans.ndim != 2 or scans.shape != (sched.n_scans, sched.n):
        raise ValueError(
            f"expected {sched.n_scans} scans of length {sched.n}, got {scans.shape}"
        )
    y = np.zeros(sched.total_samples)
    for offset, scan in zip(sched.tau, scans):
        y[offset : offset + sched.n] += scan
    return Trace(y=y, schedule=sched)


def acquisition_stats(sched):
    """Acquisition length and acceleration factor of a schedule.

    The acceleration factor is the scan length divided by the mean firing
    gap: how much faster scans fire than in non-overlapping operation.  A
    single-scan schedule reports 1.0 by convention.

    Returns
    -------
    (acquisition_time, acceleration_factor) : (int, float)
    """
    if sched.n_scans == 1:
        return sched.total_samples, 1.0
    return sched.total_samples, sched.n / float(sched.gaps.mean())


def simulate_acquisition(
    spec,
    sched,
    params,
    jitter_sd=0.5,
    pulse_sigma=2.0,
    seed=0,
    keep_scans=True,
):
    """Full simulation: draw scans for a ground truth and assemble the trace.

    The scan noise floor uses the ground truth's w0 (the model's w0 plays
    no role in data generation).
    """
    w = rate_vector_of(spec)
    scan_params = ModelParams(mu=params.mu, w0=max(spec.w0, 1e-300), lam=0.0)
    scans = simulate_scans(
        w, scan_params, sched.n_scans,
        jitter_sd=jitter_sd, pulse_sigma=pulse_sigma, seed=seed,
    )
    trace = assemble_trace(scans, sched)
    return Acquisition(trace=trace, scans=scans if keep_scans else None, truth=spec)
