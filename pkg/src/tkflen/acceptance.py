"""End-to-end acceptance checks, shared by the test suite and ``tkflen verify``.

Each check returns a :class:`Criterion`; ``passed`` already includes the
runtime limit.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .analytics import (
    berry_esseen_bound,
    berry_esseen_deviation,
    convolution_crosscheck,
    mortal_progeny_pmf,
    progeny_moments,
)
from .estimator import LengthDistanceEstimator, single_pair_thetas
from .experiments import proof_window_report, stationarity_report, tv_curve
from .model import ModelParams, StarTree2, stationary_mean_length
from .simulate import SimConfig, evolve_lengths, evolve_sequences, sample_leaf_pairs, simulate_progeny

__all__ = ["Criterion", "CRITERIA", "run_criteria"]


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    limit: float = math.inf
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.number}. {self.name}: {self.detail} "
                f"({self.seconds:.1f}s / limit {self.limit:.0f}s)")


def _timed(number: int, name: str, limit: float):
    def wrap(fn: Callable[[], tuple[bool, str, dict]]):
        def run() -> Criterion:
            t0 = time.perf_counter()
            ok, detail, values = fn()
            dt = time.perf_counter() - t0
            return Criterion(number, name, bool(ok) and dt <= limit, detail, dt, limit, values)
        run.__name__ = fn.__name__
        return run
    return wrap


@_timed(1, "closed-form leaf pmf matches convolution", 60)
def closed_form_vs_dp():
    worst = 0.0
    for lam in (0.5, 0.9, 0.99, 0.999):
        for t in (0.5, 1.0, 2.0):
            worst = max(worst, float(convolution_crosscheck(lam, t, 200).max()))
    return worst <= 1e-12, f"max |diff| = {worst:.3g} over M <= 200 (tol 1e-12)", {"max_diff": worst}


@_timed(2, "simulated progeny moments", 60)
def progeny_moments_mc():
    p, t, n = ModelParams(0.9), 1.0, 1_000_000
    x = simulate_progeny(p, t, n, SimConfig(seed=1))
    mom = progeny_moments(p, t)
    law = mortal_progeny_pmf(p, t, tol=1e-17)
    mu4 = float(np.dot((law.support - mom.beta) ** 4, law.masses))
    z_mean = (x.mean() - mom.beta) / math.sqrt(mom.sigma2 / n)
    z_var = (x.var(ddof=1) - mom.sigma2) / math.sqrt((mu4 - mom.sigma2 ** 2) / n)
    ok = abs(z_mean) <= 3 and abs(z_var) <= 3
    return ok, f"z(mean) = {z_mean:+.2f}, z(var) = {z_var:+.2f} (|z| <= 3)", \
        {"z_mean": z_mean, "z_var": z_var}


@_timed(3, "stationary law is a fixed point", 120)
def stationarity():
    worst, ok = 0.0, True
    for lam in (0.5, 0.9, 0.99):
        rep = stationarity_report(ModelParams(lam), (0.5, 1.0, 2.0))
        ok &= rep.passed
        worst = max(worst, max(r["tv"] for r in rep.rows))
    return ok, f"max TV = {worst:.3g} (tol 1e-6 + truncation)", {"max_tv": worst}


@_timed(4, "Berry-Esseen bound dominates exact deviation", 120)
def berry_esseen():
    worst_ratio, ok = 0.0, True
    for lam in (0.9, 0.99):
        for t in (1.0, 2.0):
            for M in (25, 100, 400):
                dev = berry_esseen_deviation(lam, t, M - 1)
                bound = berry_esseen_bound(lam, t, M)
                ok &= dev <= bound
                worst_ratio = max(worst_ratio, dev / bound)
    return ok, f"max deviation / bound = {worst_ratio:.3f}", {"max_ratio": worst_ratio}


@_timed(5, "TV distance plateaus below 1 as lam -> mu", 600)
def tv_plateau():
    rep = tv_curve(ModelParams(0.9), 2.0, 1.0, (0.9, 0.99, 0.999, 0.9999), eps=1e-6)
    tv_hi = [r["tv_hi"] for r in rep.rows]
    bayes_lo = min((1.0 - r["tv_hi"]) / 2 for r in rep.rows)
    spread = rep.summary["spread"]
    ok = max(tv_hi) <= 0.95 and spread <= 0.15 and bayes_lo >= 0.025
    tvs = ", ".join(f"{r['lambda']}: {r['tv_hi']:.4f}" for r in rep.rows)
    return ok, f"tv_hi {{{tvs}}}, spread = {spread:.4f}, min Bayes error = {bayes_lo:.4f}", \
        {"tv_hi": tv_hi, "spread": spread, "bayes_error_lo": bayes_lo}


@_timed(6, "overlap certificate is positive and sound", 300)
def certificate():
    ok, parts, values = True, [], {}
    for lam in (0.99, 0.999):
        rep = proof_window_report(ModelParams(lam), 2.0, 1.0, lam)
        s = rep.summary
        ok &= rep.passed
        parts.append(f"lam={lam}: {s['assembled_lower_bound']:.3g} <= {s['exact_overlap_lo']:.4f}")
        values[lam] = (s["assembled_lower_bound"], s["exact_overlap_lo"])
    return ok, "; ".join(parts), values


@_timed(7, "distance estimators", 300)
def estimators():
    star = StarTree2(1.0)
    p = ModelParams(0.5)
    theta = 2 * star.h * (1 - p.ratio)
    est = LengthDistanceEstimator().fit(sample_leaf_pairs(p, star, 10_000, SimConfig(seed=2024)))
    rel = abs(est.theta_ - theta) / theta
    iqr, raw, fails = {}, {}, {}
    for k in (4, 10):
        q = ModelParams(1 - 2.0 ** -k)
        pairs = sample_leaf_pairs(q, star, 100_000, SimConfig(seed=2025, stream_id=k))
        th, fails[k] = single_pair_thetas(pairs, stationary_mean_length(q))
        th = th[~np.isnan(th)]
        lo, hi = np.percentile(th, [25, 75])
        raw[k] = float(hi - lo)
        iqr[k] = raw[k] / (2 * star.h * (1 - q.ratio))
    ratio = iqr[10] / iqr[4]
    ok = rel <= 0.05 and ratio >= 0.5
    detail = (f"many-sample theta = {est.theta_:.4f} vs {theta:.4f} ({100 * rel:.2f}%); "
              f"single-pair IQR/theta {iqr[4]:.3g} -> {iqr[10]:.3g} (ratio {ratio:.2f}); "
              f"raw IQR {raw[4]:.3g} -> {raw[10]:.3g}; failures {fails[4]}, {fails[10]}")
    return ok, detail, {"theta_hat": est.theta_, "iqr_ratio": ratio, "raw_iqr": raw,
                        "failures": fails}


def _binned(a: np.ndarray, b: np.ndarray, min_expected: float = 5.0) -> np.ndarray:
    """2 x k table with adjacent values pooled until every expected count is large enough."""
    hi = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=hi + 1)
    cb = np.bincount(b, minlength=hi + 1)
    frac = min(len(a), len(b)) / (len(a) + len(b))
    cols, acc = [], np.zeros(2)
    for x, y in zip(ca, cb):
        acc += (x, y)
        if (acc.sum()) * frac >= min_expected:
            cols.append(acc)
            acc = np.zeros(2)
    if acc.sum():
        cols[-1] = cols[-1] + acc
    return np.array(cols).T


@_timed(8, "length chain agrees with full sequences; output is reproducible", 180)
def simulator_agreement():
    from .cli import main

    p = ModelParams(0.9)
    a = evolve_lengths(p, 10, 1.0, 100_000, SimConfig(seed=3))
    b = evolve_sequences(p, 10, 1.0, 100_000, SimConfig(seed=4))
    table = _binned(a, b)
    pval = float(stats.chi2_contingency(table)[1])
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for k in range(2):
            out = Path(tmp, f"run{k}.csv")
            args = ["simulate", "--lambda", "0.9", "--star-height", "1", "--replicates", "2000",
                    "--seed", "99", "--format", "csv", "--out", str(out)]
            if main(args) != 0:
                return False, "simulate command failed", {}
            outs.append(out.read_bytes())
    same = outs[0] == outs[1]
    return pval > 1e-3 and same, f"chi-square p = {pval:.3g} ({table.shape[1]} bins); " \
        f"repeated CSV identical: {same}", {"p_value": pval, "identical": same}


CRITERIA: dict[int, Callable[[], Criterion]] = {
    1: closed_form_vs_dp,
    2: progeny_moments_mc,
    3: stationarity,
    4: berry_esseen,
    5: tv_plateau,
    6: certificate,
    7: estimators,
    8: simulator_agreement,
}


def run_criteria(which=None, echo: Callable[[str], None] | None = None) -> list[Criterion]:
    out = []
    for k in sorted(which or CRITERIA):
        res = CRITERIA[k]()
        if echo:
            echo(res.line())
        out.append(res)
    return out
