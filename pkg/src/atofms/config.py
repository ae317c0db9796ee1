"""Run configuration: flat key = value sections, one file per experiment.

Defaults describe the desk-scale reference instance: 20000 bins, 200 scans
at acceleration factor 4, detector gain 225.
"""

from __future__ import annotations

import configparser
import io as _io
from dataclasses import dataclass

from .evaluate import Calibration
from .model import ModelParams
from .preprocess import DetectionParams
from .solver import SolverParams

__all__ = ["RunConfig"]

# (section, key, type) for every config field, in serialization order.
_LAYOUT = [
    ("simulate", "n", int),
    ("simulate", "scans", int),
    ("simulate", "dtau_min", int),
    ("simulate", "dtau_max", int),
    ("simulate", "num_peaks", int),
    ("simulate", "rate_min", float),
    ("simulate", "rate_max", float),
    ("simulate", "faint_peaks", int),
    ("simulate", "faint_rate_min", float),
    ("simulate", "faint_rate_max", float),
    ("simulate", "peak_sigma", float),
    ("simulate", "min_separation", int),
    ("simulate", "pulse_sigma", float),
    ("simulate", "jitter_sd", float),
    ("simulate", "sim_w0", float),
    ("simulate", "save_scans", bool),
    ("detect", "h0", float),
    ("detect", "hw", float),
    ("detect", "d_min", int),
    ("spectrum_detect", "spectrum_h0", float),
    ("spectrum_detect", "spectrum_hw", float),
    ("spectrum_detect", "spectrum_d_min", int),
    ("model", "mu", float),
    ("model", "w0", float),
    ("solver", "gamma", float),
    ("solver", "theta0", float),
    ("solver", "theta1", float),
    ("solver", "max_iters", int),
    ("solver", "tol", float),
    ("evaluate", "delta_m", float),
    ("evaluate", "top_k", int),
    ("evaluate", "flight_constant", float),
    ("evaluate", "sample_period", float),
    ("run", "seed", int),
]

_KEY_TO_FIELD = {key: key for _, key, _ in _LAYOUT}


@dataclass
class RunConfig:
    """Every knob of a simulated experiment, validated before use."""

    # simulation: 50 well-resolved species over a bed of faint ones that
    # sit below the spectrum detection threshold (they supply the false
    # discoveries that make the trade-off curves meaningful)
    n: int = 20000
    scans: int = 200
    dtau_min: int = 0
    dtau_max: int = 10000
    num_peaks: int = 50
    rate_min: float = 0.08
    rate_max: float = 0.5
    faint_peaks: int = 150
    faint_rate_min: float = 0.002
    faint_rate_max: float = 0.008
    peak_sigma: float = 2.0
    min_separation: int = 60
    pulse_sigma: float = 2.0
    jitter_sd: float = 0.5
    sim_w0: float = 1e-6
    save_scans: bool = True
    # trace-side detection
    h0: float = 1.0
    hw: float = 2.0
    d_min: int = 2
    # spectrum-side detection
    spectrum_h0: float = 0.15
    spectrum_hw: float = 0.3
    spectrum_d_min: int = 2
    # observation model used by the solver; the rate floor is a
    # conditioning dial of the likelihood, sized so the per-event gradient
    # scale matches the threshold schedule (see solver docs)
    mu: float = 225.0
    w0: float = 4e5
    # solver
    gamma: float = 2.5e-3
    theta0: float = 5e-4
    theta1: float = 2e-2
    max_iters: int = 30
    tol: float = 1e-8
    # evaluation
    delta_m: float = 0.01
    top_k: int = 400
    flight_constant: float = 1.0
    sample_period: float = 1e-3
    # randomness
    seed: int = 12

    def validate(self):
        """Build every derived parameter object, surfacing bad values early."""
        if self.n < 1 or self.scans < 1:
            raise ValueError("n and scans must be positive")
        if not (0 <= self.dtau_min <= self.dtau_max) or self.dtau_max < 1:
            raise ValueError("need 0 <= dtau_min <= dtau_max and dtau_max >= 1")
        if self.num_peaks < 1 or self.rate_min <= 0 or self.rate_max < self.rate_min:
            raise ValueError("invalid peak generation settings")
        self.detection()
        self.spectrum_detection()
        self.model()
        self.solver()
        self.calibration()
        if self.top_k < 1 or self.delta_m <= 0:
            raise ValueError("invalid evaluation settings")
        return self

    def detection(self):
        return DetectionParams(h0=self.h0, hw=self.hw, d_min=self.d_min)

    def spectrum_detection(self):
        return DetectionParams(
            h0=self.spectrum_h0, hw=self.spectrum_hw, d_min=self.spectrum_d_min
        )

    def model(self):
        return ModelParams(mu=self.mu, w0=self.w0)

    def solver(self):
        return SolverParams(
            gamma=self.gamma,
            theta0=self.theta0,
            theta1=self.theta1,
            max_iters=self.max_iters,
            tol=self.tol,
        )

    def calibration(self):
        return Calibration(
            flight_constant=self.flight_constant, sample_period=self.sample_period
        )

    def to_ini(self, path=None):
        """Serialize to the sectioned key = value format; returns the text."""
        parser = configparser.ConfigParser()
        for section, key, kind in _LAYOUT:
            if section not in parser:
                parser[section] = {}
            value = getattr(self, _KEY_TO_FIELD[key])
            parser[section][key.removeprefix("spectrum_") if section == "spectrum_detect" else key] = (
                repr(value) if kind is float else str(value)
            )
        buf = _io.StringIO()
        parser.write(buf)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_ini(cls, source):
        """Parse from a path or literal text; missing keys keep defaults."""
        parser = configparser.ConfigParser()
        text = None
        try:
            with open(source) as fh:
                text = fh.read()
        except (OSError, TypeError):
            text = source
        parser.read_string(text)
        kwargs = {}
        for section, key, kind in _LAYOUT:
            ini_key = key.removeprefix("spectrum_") if section == "spectrum_detect" else key
            if parser.has_option(section, ini_key):
                raw = parser.get(section, ini_key)
                if kind is bool:
                    kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    kwargs[key] = kind(raw)
        return cls(**kwargs)
