"""File formats: binary arrays, schedule text, peak specs, and CSV reports.

Binary array files share one 24-byte little-endian header:

    8-byte magic | u32 n | u32 n_scans | u64 count

followed by ``count`` float64 values.  Magics: ``ATOFTRC1`` traces (count =
trace length), ``ATOFSPC1`` spectra (count = n), ``ATOFSCN1`` scan stacks
(count = n * n_scans, row-major).
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct

import numpy as np

from .baselines import SpectrumEstimate
from .schedule import FiringSchedule
from .simulate import GroundTruthSpec, Trace

__all__ = [
    "write_trace",
    "read_trace",
    "write_spectrum",
    "read_spectrum",
    "write_scans",
    "read_scans",
    "write_schedule",
    "read_schedule",
    "write_ground_truth",
    "read_ground_truth",
    "write_cost_history",
    "write_curve",
    "write_match_report",
    "write_match_assignments",
    "write_width_cdf",
    "schedule_digest",
]

TRACE_MAGIC = b"ATOFTRC1"
SPECTRUM_MAGIC = b"ATOFSPC1"
SCANS_MAGIC = b"ATOFSCN1"

_HEADER = struct.Struct("<8sIIQ")


def _write_array(path, magic, n, n_scans, values):
    values = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, n, n_scans, values.size))
        fh.write(values.tobytes())


def _read_array(path, magic):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        got_magic, n, n_scans, count = _HEADER.unpack(header)
        if got_magic != magic:
            raise ValueError(f"{path}: expected magic {magic!r}, found {got_magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    return int(n), int(n_scans), data


def write_trace(path, trace):
    sched = trace.schedule
    _write_array(path, TRACE_MAGIC, sched.n, sched.n_scans, trace.y)


def read_trace(path, sched):
    """Read a trace and bind it to its schedule (shapes must agree)."""
    n, n_scans, data = _read_array(path, TRACE_MAGIC)
    if n != sched.n or n_scans != sched.n_scans:
        raise ValueError(f"{path}: header does not match the schedule")
    return Trace(y=data, schedule=sched)


def write_spectrum(path, spectrum, n_scans=0):
    _write_array(path, SPECTRUM_MAGIC, spectrum.n, n_scans, spectrum.values)


def read_spectrum(path, method=""):
    _, _, data = _read_array(path, SPECTRUM_MAGIC)
    return SpectrumEstimate(values=data, method=method)


def write_scans(path, scans):
    scans = np.asarray(scans, dtype=float)
    _write_array(path, SCANS_MAGIC, scans.shape[1], scans.shape[0], scans.ravel())


def read_scans(path):
    n, n_scans, data = _read_array(path, SCANS_MAGIC)
    return data.reshape(n_scans, n)


def write_schedule(path, sched):
    """One firing time per line after an ``n=<n> N=<N>`` header."""
    with open(path, "w") as fh:
        fh.write(f"n={sched.n} N={sched.n_scans}\n")
        for t in sched.tau:
            fh.write(f"{int(t)}\n")


def read_schedule(path):
    with open(path) as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=") for part in header.split())
        tau = [int(line) for line in fh if line.strip()]
    n = int(fields["n"])
    n_scans = int(fields["N"])
    if len(tau) != n_scans:
        raise ValueError(f"{path}: header claims {n_scans} firings, found {len(tau)}")
    return FiringSchedule(tau=np.array(tau, dtype=np.int64), n=n)


def write_ground_truth(path, spec):
    """Key-value header plus one ``peak = center rate sigma`` line per peak."""
    with open(path, "w") as fh:
        fh.write(f"n = {spec.n}\n")
        fh.write(f"w0 = {spec.w0!r}\n")
        fh.write(f"kernel_truncate = {spec.kernel_truncate!r}\n")
        for center, rate, sigma in spec.peaks:
            fh.write(f"peak = {center} {rate!r} {sigma!r}\n")


def read_ground_truth(path):
    fields = {}
    peaks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            if key == "peak":
                center, rate, sigma = value.split()
                peaks.append((int(center), float(rate), float(sigma)))
            else:
                fields[key] = value.strip()
    return GroundTruthSpec(
        peaks=tuple(peaks),
        n=int(fields["n"]),
        w0=float(fields.get("w0", 0.0)),
        kernel_truncate=float(fields.get("kernel_truncate", 4.0)),
    )


def write_cost_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "theta", "cost", "max_delta"])
        for rec in history:
            writer.writerow([rec.iteration, repr(rec.theta), repr(rec.cost), repr(rec.max_delta)])


def write_curve(path, rows, value_field="value"):
    """Sweep or iteration curve as plot-ready CSV, one point per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([value_field, "tp", "fp", "fn", "tpr", "fdr", "fnr"])
        for row in rows:
            writer.writerow(
                [
                    row[value_field],
                    row["tp"],
                    row["fp"],
                    row["fn"],
                    repr(row["tpr"]),
                    repr(row["fdr"]),
                    repr(row["fnr"]),
                ]
            )


def write_match_report(path, label, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "tp", "fp", "fn", "tpr", "fdr", "fnr"])
        writer.writerow(
            [label, report.tp, report.fp, report.fn,
             repr(report.tpr), repr(report.fdr), repr(report.fnr)]
        )


def write_match_assignments(path, report):
    """Per-estimate matched truth indices, one JSON object per line."""
    with open(path, "w") as fh:
        for j, hit in enumerate(report.matches):
            fh.write(json.dumps({"estimate": j, "matched_truth": list(hit)}) + "\n")


def write_width_cdf(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ratio", "cumulative_fraction"])
        for ratio, frac in points:
            writer.writerow([repr(ratio), repr(frac)])


def schedule_digest(sched):
    """Stable hex digest of a schedule's canonical serialization."""
    payload = f"n={sched.n} N={sched.n_scans}\n" + "\n".join(
        str(int(t)) for t in sched.tau
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
