"""Command-line front end: simulate, reconstruct, evaluate, sweep, selftest.

Every command is deterministic given its config and seed.  Exit codes:
0 success, 1 usage error, 2 data error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io as fileio
from . import selftest as selftest_mod
from .baselines import SpectrumEstimate, average_scans, naive_atof
from .config import RunConfig
from .estimators import AtofReconstructor, AveragingReconstructor, NaiveAtofReconstructor
from .evaluate import curve_sweep, match_events, match_peaks, pick_peaks, width_intensity_cdf
from .evaluate import iteration_curve
from .experiment import simulate_from_config
from .preprocess import detect_events
from .simulate import Acquisition, acquisition_stats
from .solver import SolverParams, reconstruct

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SELFTEST = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(args):
    cfg = RunConfig.from_ini(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_acquisition(out):
    sched = fileio.read_schedule(out / "schedule.txt")
    trace = fileio.read_trace(out / "trace.bin", sched)
    scans_path = out / "scans.bin"
    scans = fileio.read_scans(scans_path) if scans_path.exists() else None
    return Acquisition(trace=trace, scans=scans)


def cmd_simulate(args):
    cfg = _load_config(args)
    out = _outdir(args)
    exp = simulate_from_config(cfg)
    cfg.to_ini(out / "config.ini")
    fileio.write_ground_truth(out / "peaks.txt", exp.spec)
    fileio.write_schedule(out / "schedule.txt", exp.schedule)
    fileio.write_trace(out / "trace.bin", exp.acquisition.trace)
    if exp.acquisition.scans is not None:
        fileio.write_scans(out / "scans.bin", exp.acquisition.scans)
    fileio.write_spectrum(
        out / "truth_spectrum.bin",
        SpectrumEstimate(values=exp.truth_spectrum, method="expected"),
        n_scans=exp.schedule.n_scans,
    )
    total, factor = acquisition_stats(exp.schedule)
    print(
        f"simulated {exp.schedule.n_scans} scans over {total} samples "
        f"(acceleration factor {factor:.2f}) -> {out}"
    )
    return EXIT_OK


def cmd_reconstruct(args):
    cfg = _load_config(args)
    out = _outdir(args)
    acq = _read_acquisition(out)
    sched = acq.schedule
    digest = fileio.schedule_digest(sched)
    if args.method == "atof":
        events = detect_events(acq.trace, cfg.detection())
        events.to_jsonl(out / "events.jsonl")
        spectrum, state = reconstruct(
            acq.trace, sched, cfg.detection(), cfg.model(), cfg.solver()
        )
        spectrum.provenance["schedule"] = digest
        fileio.write_cost_history(out / "cost_atof.csv", state.history)
    elif args.method == "naive":
        events = detect_events(acq.trace, cfg.detection())
        spectrum = naive_atof(events, sched)
    elif args.method == "average":
        if acq.scans is None:
            raise ValueError("no scans.bin in the output directory; re-simulate with save_scans")
        spectrum = average_scans(acq.scans)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown method {args.method}")
    fileio.write_spectrum(out / f"spectrum_{args.method}.bin", spectrum, n_scans=sched.n_scans)
    print(f"wrote {out / f'spectrum_{args.method}.bin'}")
    return EXIT_OK


def cmd_evaluate(args):
    cfg = _load_config(args)
    out = _outdir(args)
    truth = fileio.read_spectrum(args.truth, method="truth")
    estimate = fileio.read_spectrum(args.estimate, method="estimate")
    if truth.n != estimate.n:
        raise ValueError(f"axis mismatch: truth has {truth.n} bins, estimate {estimate.n}")
    detection = cfg.spectrum_detection()
    truth_events = detect_events(truth.values, detection)
    est_events = detect_events(estimate.values, detection)
    event_report = match_events(truth_events, est_events)
    fileio.write_match_report(out / "events_metrics.csv", "events", event_report)
    fileio.write_match_assignments(out / "events_assignments.jsonl", event_report)
    cal = cfg.calibration()
    truth_peaks = pick_peaks(truth.values, detection.hw, cal)
    est_peaks = pick_peaks(estimate.values, detection.hw, cal)
    peak_report = match_peaks(truth_peaks, est_peaks, cfg.top_k, cfg.delta_m)
    fileio.write_match_report(out / "peaks_metrics.csv", "peaks", peak_report)
    fileio.write_width_cdf(
        out / "width_cdf.csv", width_intensity_cdf(estimate.values, detection.hw)
    )
    print(
        f"events: TPR {event_report.tpr:.3f} FDR {event_report.fdr:.3f}; "
        f"peaks: TPR {peak_report.tpr:.3f} FDR {peak_report.fdr:.3f}"
    )
    return EXIT_OK


def _sweep_methods(cfg, acq):
    methods = {
        "atof": AtofReconstructor(
            h0=cfg.h0, hw=cfg.hw, d_min=cfg.d_min, mu=cfg.mu, w0=cfg.w0,
            gamma=cfg.gamma, theta0=cfg.theta0, theta1=cfg.theta1,
            max_iters=cfg.max_iters, tol=cfg.tol,
        ),
        "naive": NaiveAtofReconstructor(h0=cfg.h0, hw=cfg.hw, d_min=cfg.d_min),
    }
    if acq.scans is not None:
        methods["average"] = AveragingReconstructor()
    return methods


def cmd_sweep(args):
    cfg = _load_config(args)
    out = _outdir(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if len(values) < 2:
        raise ValueError("need at least two sweep values")
    acq = _read_acquisition(out)
    truth = fileio.read_spectrum(out / "truth_spectrum.bin")
    detection = cfg.spectrum_detection()
    truth_events = detect_events(truth.values, detection)
    if args.sweep == "iteration":
        # per-iteration solver diagnostics; values pick the reported rows
        checkpoints = sorted({int(v) for v in values})
        rows = iteration_curve(
            acq.trace, acq.schedule, cfg.detection(), cfg.model(),
            SolverParams(
                gamma=cfg.gamma, theta0=cfg.theta0, theta1=cfg.theta1,
                max_iters=max(checkpoints), tol=cfg.tol,
            ),
            truth_events, detection,
        )
        picked = [row for row in rows if row["iteration"] in checkpoints]
        fileio.write_curve(out / "curve_atof_iterations.csv", picked, value_field="iteration")
        print(f"wrote {out / 'curve_atof_iterations.csv'} ({len(picked)} points)")
        return EXIT_OK
    methods = _sweep_methods(cfg, acq)
    # the solver trades off through theta0; the baselines through the
    # spectrum-side width threshold, swept on a matching grid
    baseline_grid = np.geomspace(
        detection.hw / 4.0, detection.hw * 16.0, len(values)
    ).tolist()
    for name, estimator in methods.items():
        if args.sweep == "theta0":
            variable = "theta0" if name == "atof" else "hw"
            points = values if name == "atof" else baseline_grid
        else:
            variable = "hw"
            points = values
        rows = curve_sweep(estimator, acq, variable, points, truth_events, detection)
        fileio.write_curve(out / f"curve_{name}.csv", rows)
        print(f"wrote {out / f'curve_{name}.csv'} ({len(rows)} points)")
    return EXIT_OK


def cmd_selftest(args):
    ok = selftest_mod.run_all(verbose=True)
    print("selftest:", "all checks passed" if ok else "FAILURES detected")
    return EXIT_OK if ok else EXIT_SELFTEST


def _build_parser():
    parser = _Parser(prog="atofms", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate ground truth, schedule, scans, trace")
    p_sim.add_argument("--config", help="path to a config file (defaults apply if omitted)")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_rec = sub.add_parser("reconstruct", help="reconstruct a simulated trace")
    p_rec.add_argument("--config", help="path to a config file")
    p_rec.add_argument("--seed", type=int, help="override the config seed")
    p_rec.add_argument("--out", required=True, help="directory holding simulate outputs")
    p_rec.add_argument(
        "--method", required=True, choices=("atof", "naive", "average"),
        help="reconstruction method",
    )
    p_rec.set_defaults(func=cmd_reconstruct)

    p_eval = sub.add_parser("evaluate", help="score an estimate against a truth spectrum")
    p_eval.add_argument("--config", help="path to a config file")
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--out", required=True, help="directory for the metric files")
    p_eval.add_argument("--truth", required=True, help="truth spectrum file")
    p_eval.add_argument("--estimate", required=True, help="estimated spectrum file")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="trade-off curves over a swept variable")
    p_sweep.add_argument("--config", help="path to a config file")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--out", required=True, help="directory holding simulate outputs")
    p_sweep.add_argument(
        "--sweep", required=True, choices=("theta0", "hw", "iteration"), dest="sweep",
        help="swept variable: solver threshold, spectrum event threshold, "
        "or solver iteration checkpoints",
    )
    p_sweep.add_argument("--values", required=True, help="comma-separated sweep values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_self = sub.add_parser("selftest", help="run the built-in verification suite")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"atofms {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
