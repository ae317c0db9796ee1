"""Built-in verification suite behind the ``selftest`` CLI command.

Four independent checks, each with its own oracle: the likelihood series
against the closed Bessel form, the analytic gradient against finite
differences, the event density against numerical quadrature, and the
sparse neighborhood queries against a dense incidence matrix.  All run in
seconds on fixed seeds.
"""

from __future__ import annotations

import math

import numpy as np

from .model import (
    LikelihoodEvalContext,
    ModelParams,
    bessel_i_scaled,
    event_density,
    nll,
    nll_gradient,
)
from .schedule import FiringSchedule, dense_adjacency, event_neighbors, sample_neighbors

__all__ = ["run_all", "ALL_CHECKS"]


def series_bessel_check():
    """Truncated likelihood series vs the closed Bessel form on a log grid."""
    k = np.arange(1, 4001)
    lgam = np.array([math.lgamma(v) for v in k]) + np.array(
        [math.lgamma(v + 1) for v in k]
    )
    worst = 0.0
    for s in np.logspace(-6, 3, 10):
        for zr in np.logspace(-6, 3, 10):
            a = zr * s
            log_terms = k * np.log(a) - lgam
            peak = log_terms.max()
            log_series = peak + np.log(np.exp(log_terms - peak).sum())
            xi = 2.0 * np.sqrt(a)
            scaled = bessel_i_scaled(1, xi)
            if not np.isfinite(scaled) or scaled <= 0:
                return False, f"Bessel form not finite at xi={xi:g}"
            log_closed = 0.5 * np.log(a) + xi + np.log(scaled)
            err = abs(log_series - log_closed) / max(1.0, abs(log_closed))
            worst = max(worst, err)
    return worst <= 1e-9, f"max rel err {worst:.3e} (tolerance 1e-9)"


def gradient_fd_check():
    """Analytic likelihood gradient vs central finite differences."""
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(5, 40))
        m = int(rng.integers(1, 20))
        idx, offsets = [], [0]
        for _ in range(m):
            k = int(rng.integers(1, 5))
            idx.extend(int(b) for b in rng.choice(n, size=k, replace=False))
            offsets.append(len(idx))
        ctx = LikelihoodEvalContext(
            n=n,
            n_scans=3,
            weights=rng.exponential(100.0, size=m) + 1.0,
            neighbor_indices=np.array(idx, dtype=np.int64),
            offsets=np.array(offsets, dtype=np.int64),
        )
        params = ModelParams(mu=float(rng.uniform(1, 300)), w0=0.05, lam=0.0)
        w = rng.exponential(10.0, size=n)
        grad = nll_gradient(w, ctx, params)
        h = 1e-5 * max(1.0, float(w.max()))
        for i in rng.choice(n, size=min(n, 5), replace=False):
            up, dn = w.copy(), w.copy()
            up[i] += h
            dn[i] = max(dn[i] - h, 0.0)
            fd = (nll(up, ctx, params) - nll(dn, ctx, params)) / (up[i] - dn[i])
            denom = max(abs(fd), 1e-12)
            worst = max(worst, abs(grad[i] - fd) / denom)
    return worst <= 1e-5, f"max rel err {worst:.3e} (tolerance 1e-5)"


def density_normalization_check():
    """Point mass plus the integrated continuous part must equal one."""
    nodes, weights = np.polynomial.legendre.leggauss(48)
    worst = 0.0
    for s in (0.5, 1.0, 5.0):
        for mu in (1.0, 225.0):
            params = ModelParams(mu=mu, w0=1e-6)
            cap = mu * (s + 12.0 * math.sqrt(s) + 60.0)
            total = math.exp(-s)
            edges = np.linspace(0.0, cap, 60)
            for lo, hi in zip(edges[:-1], edges[1:]):
                mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
                z = mid + half * nodes
                total += half * float(np.dot(weights, event_density(z, s, params)))
            worst = max(worst, abs(total - 1.0))
    return worst <= 1e-6, f"max |mass - 1| = {worst:.3e} (tolerance 1e-6)"


def adjacency_oracle_check():
    """Sparse neighbor queries vs the dense incidence matrix."""
    rng = np.random.default_rng(202)
    for _ in range(100):
        n = int(rng.integers(4, 101))
        n_scans = int(rng.integers(1, 21))
        if n_scans == 1:
            tau = np.array([0], dtype=np.int64)
        else:
            gaps = rng.integers(1, n + 1, size=n_scans - 1)
            tau = np.concatenate([[0], np.cumsum(gaps)])
        sched = FiringSchedule(tau=tau, n=n)
        A = dense_adjacency(sched)
        T = sched.total_samples
        for t in rng.integers(0, T, size=8):
            if not np.array_equal(sample_neighbors(sched, int(t)), np.flatnonzero(A[t])):
                return False, f"row mismatch at t={t} (n={n}, scans={n_scans})"
        t0 = int(rng.integers(0, T))
        t1 = int(min(T - 1, t0 + rng.integers(0, 6)))
        union = sorted(
            {b for _, lo, hi in event_neighbors(sched, t0, t1) for b in range(lo, hi + 1)}
        )
        expected = np.flatnonzero(A[t0 : t1 + 1].any(axis=0))
        if not np.array_equal(union, expected):
            return False, f"event union mismatch at [{t0}, {t1}]"
    return True, "100 random schedules agree with the dense oracle"


ALL_CHECKS = [
    ("series-bessel equivalence", series_bessel_check),
    ("gradient finite differences", gradient_fd_check),
    ("density normalization", density_normalization_check),
    ("neighborhood dense oracle", adjacency_oracle_check),
]


def run_all(verbose=True):
    """Run every check; returns True when all pass."""
    all_ok = True
    for name, check in ALL_CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all_ok
