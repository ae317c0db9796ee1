"""Assembly of complete simulated experiments from a run configuration.

One root seed drives four named substreams (real peaks, faint peaks,
schedule, scans), so any component can be regenerated independently and
the whole experiment is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .preprocess import EventList, detect_events
from .schedule import FiringSchedule, generate_schedule
from .simulate import (
    Acquisition,
    GroundTruthSpec,
    expected_spectrum,
    rate_vector_of,
    simulate_acquisition,
    simulate_scans,
    synthetic_peaks,
)

__all__ = [
    "Experiment",
    "ground_truth_from_config",
    "empirical_truth_spectrum",
    "simulate_from_config",
]


@dataclass(frozen=True)
class Experiment:
    """Everything one simulated run produces."""

    spec: GroundTruthSpec
    schedule: FiringSchedule
    acquisition: Acquisition
    truth_spectrum: np.ndarray

    def truth_events(self, detection) -> EventList:
        return detect_events(self.truth_spectrum, detection)


def ground_truth_from_config(cfg, rng_real, rng_faint):
    """Real species plus the faint bed, as one peak list."""
    real = synthetic_peaks(
        cfg.n,
        cfg.num_peaks,
        seed=rng_real,
        rate_range=(cfg.rate_min, cfg.rate_max),
        sigma=cfg.peak_sigma,
        min_separation=cfg.min_separation,
    )
    faint = ()
    if cfg.faint_peaks > 0:
        faint = synthetic_peaks(
            cfg.n,
            cfg.faint_peaks,
            seed=rng_faint,
            rate_range=(cfg.faint_rate_min, cfg.faint_rate_max),
            sigma=cfg.peak_sigma,
            min_separation=max(10, cfg.min_separation // 2),
            margin=40,
        )
    return GroundTruthSpec(peaks=real + faint, n=cfg.n, w0=cfg.sim_w0)


def empirical_truth_spectrum(spec, params, n_scans=2000, jitter_sd=0.5,
                             pulse_sigma=2.0, seed=0):
    """High-scan-count empirical reference spectrum.

    Averages many freshly simulated non-overlapping scans, the hold-out
    analogue of the analytic expected spectrum; the two converge as the
    scan count grows.
    """
    w = rate_vector_of(spec)
    scans = simulate_scans(
        w, params, n_scans, jitter_sd=jitter_sd, pulse_sigma=pulse_sigma, seed=seed
    )
    return scans.mean(axis=0)


def simulate_from_config(cfg):
    """Run the full simulation a config describes.

    Substream order: real peaks, faint peaks, schedule, scans.
    """
    root = np.random.SeedSequence(cfg.seed)
    real_ss, faint_ss, sched_ss, scans_ss = root.spawn(4)
    spec = ground_truth_from_config(
        cfg, np.random.default_rng(real_ss), np.random.default_rng(faint_ss)
    )
    sched = generate_schedule(
        cfg.n, cfg.scans, cfg.dtau_min, cfg.dtau_max,
        seed=np.random.default_rng(sched_ss),
    )
    sim_model = ModelParams(mu=cfg.mu, w0=max(cfg.sim_w0, 1e-300))
    acq = simulate_acquisition(
        spec,
        sched,
        sim_model,
        jitter_sd=cfg.jitter_sd,
        pulse_sigma=cfg.pulse_sigma,
        seed=scans_ss,
        keep_scans=cfg.save_scans,
    )
    truth = expected_spectrum(spec, sim_model, pulse_sigma=cfg.pulse_sigma)
    return Experiment(
        spec=spec, schedule=sched, acquisition=acq, truth_spectrum=truth
    )
