"""Scripted numerical experiments on the length process near ``lam -> mu``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._io import csv_text, json_text
from .analytics import (
    RootSweep,
    _certificate,
    _Link,
    berry_esseen_bound,
    leaf_marginal_law,
    mortal_progeny_pmf,
    pair_law_tv,
    progeny_moments,
    stationary_law,
)
from .laws import tv_distance
from .model import ModelParams

__all__ = [
    "Report",
    "tv_curve",
    "scaling_check",
    "proof_window_report",
    "stationarity_report",
]


@dataclass
class Report:
    """Table rows plus named pass/fail assertions."""

    name: str
    rows: list[dict] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        header = list(self.rows[0])
        return csv_text(header, ([r[k] for k in header] for r in self.rows))

    def to_json(self) -> str:
        return json_text({"name": self.name, "passed": self.passed, "checks": self.checks,
                          "summary": self.summary, "rows": self.rows})


def _mu_of(params) -> float:
    return params.mu if isinstance(params, ModelParams) else 1.0


def _with_lambda(params, lam: float) -> ModelParams:
    base = params if isinstance(params, ModelParams) else ModelParams(0.5, 1.0)
    return ModelParams(lam, base.mu, base.nu, base.pi0, base.pi1)


def tv_curve(params, h1: float, h2: float, lambda_grid, eps: float = 1e-6,
             threads: int = 1) -> Report:
    """Exact TV distance between the pair laws at two heights along a grid of insertion rates.

    ``params`` supplies ``mu`` (and the unused substitution settings); each
    grid value replaces ``lam``.
    """
    grid = [float(x) for x in lambda_grid]

    def row(lam):
        p = _with_lambda(params, lam)
        res = pair_law_tv(p, h1, h2, eps)
        return {"lambda": lam, "h1": h1, "h2": h2, "tv_lo": res.tv_lo, "tv_hi": res.tv_hi,
                "overlap": res.overlap, "bayes_error": (1.0 - res.tv) / 2}

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(row, grid))
    else:
        rows = [row(lam) for lam in grid]
    rep = Report("tv_curve", rows)
    if rows:
        rep.summary = {"max_tv_hi": max(r["tv_hi"] for r in rows),
                       "min_tv_lo": min(r["tv_lo"] for r in rows)}
        rep.summary["spread"] = rep.summary["max_tv_hi"] - rep.summary["min_tv_lo"]
    return rep


def scaling_check(params, h1: float, h2: float, lambda_grid) -> Report:
    """Mean gap and variance of leaf sums at root length ``ceil(1/(1 - lam/mu))``."""
    mu = _mu_of(params)
    rows = []
    for lam in lambda_grid:
        r = lam / mu
        M = math.ceil(1.0 / (1.0 - r))
        C = M * (1.0 - r)
        l1, l2 = _Link.make(r, mu * h1), _Link.make(r, mu * h2)
        gap = M * (l1.beta - l2.beta)
        v1, v2 = M * l1.sigma2, M * l2.sigma2
        rows.append({
            "lambda": float(lam), "M": M,
            "mean_gap": gap, "mean_gap_sketch": C * mu * (h2 - h1),
            "var_h1": v1, "var_h1_sketch": C * mu * h1 / (1.0 - r),
            "var_h2": v2, "var_h2_sketch": C * mu * h2 / (1.0 - r),
            "gap2_over_var": gap * gap / min(v1, v2) if min(v1, v2) > 0 else math.inf,
        })
    rep = Report("scaling_check", rows)
    ratios = [row["gap2_over_var"] for row in rows]
    rep.checks["ratio_non_increasing"] = all(b <= a for a, b in zip(ratios, ratios[1:]))
    if len(ratios) > 1:
        rep.checks["ratio_decays"] = ratios[-1] < ratios[0]
    return rep


def proof_window_report(params, h1: float, h2: float, lam: float, c1: float = 0.5,
                        c2: float = 2.0, K: int = 8, samples: int = 5,
                        eps: float = 1e-6) -> Report:
    """Overlap certificates for every root length in ``[c1, c2] / (1 - lam/mu)``.

    The assembled bound is ``c4 * sum_M stationary(M) * overlap_constant(M)``
    where ``c4`` is the smallest probability, over both heights, that the
    immortal link leaves no descendant in either leaf.  It lower-bounds the
    overlap of the two pair laws, which is computed exactly for comparison.
    """
    if not 0 < c1 < 1 < c2:
        raise ValueError("need 0 < c1 < 1 < c2")
    if K < 1:
        raise ValueError("K must be at least 1")
    p = _with_lambda(params, lam)
    r = p.ratio
    M_lo = max(2, math.ceil(c1 / (1.0 - r)))
    M_hi = math.floor(c2 / (1.0 - r))
    mom1 = progeny_moments(p, h1)
    link1, link2 = _Link.make(p, h1), _Link.make(p, h2)
    c4 = min(link1.one_minus_q, link2.one_minus_q) ** 2
    m1 = mortal_progeny_pmf(p, h1, tol=1e-16)
    m2 = mortal_progeny_pmf(p, h2, tol=1e-16)
    s1 = RootSweep(p, h1, include_immortal=False, drop_tol=1e-17)
    s2 = RootSweep(p, h2, include_immortal=False, drop_tol=1e-17)
    sample_at = set(np.unique(np.linspace(M_lo, M_hi, samples).round().astype(int)).tolist())

    rows, assembled, window_mass, min_const = [], 0.0, 0.0, math.inf
    for M in range(1, M_hi + 1):
        # sweeps hold the sums of M - 1 mortal progenies
        if M >= 2:
            s1.advance()
            s2.advance()
        if M < M_lo:
            continue
        cert = _certificate(M, K, mom1.beta, mom1.sigma, s1.law(), s2.law(), m1, m2)
        w = (1.0 - r) * r ** M
        assembled += w * cert.overlap_constant
        window_mass += w
        min_const = min(min_const, cert.overlap_constant)
        if M in sample_at:
            rows.append({
                "M": M,
                "be_bound_h1": berry_esseen_bound(p, h1, M),
                "be_bound_h2": berry_esseen_bound(p, h2, M),
                "scaled_min_interval_mass": cert.scaled_min_interval_mass,
                "scaled_point_mass_lb": cert.scaled_point_mass_lower_bound,
                "link_floor": cert.link_floor,
                "matched_sum": cert.matched_sum,
                "overlap_constant": cert.overlap_constant,
            })
    assembled *= c4
    exact = pair_law_tv(p, h1, h2, eps)
    rep = Report("proof_window", rows)
    rep.summary = {
        "lambda": lam, "M_lo": M_lo, "M_hi": M_hi, "c4": c4,
        "window_mass": window_mass, "min_overlap_constant": min_const,
        "assembled_lower_bound": assembled,
        "product_form_bound": c4 * window_mass * min_const,
        "exact_overlap_lo": exact.overlap_lo, "exact_overlap_hi": exact.overlap_hi,
    }
    rep.checks["assembled_positive"] = assembled > 0
    rep.checks["assembled_below_exact"] = assembled <= exact.overlap_lo
    return rep


def stationarity_report(params, t_grid, eps: float = 1e-10, tol: float = 1e-6) -> Report:
    """TV between the stationary length law and the law after one edge of length ``t``."""
    rows = []
    target = stationary_law(params, eps / 10)
    for t in t_grid:
        mixed = leaf_marginal_law(params, t, eps)
        res = tv_distance(mixed, target)
        width = res.tv_hi - res.tv_lo
        rows.append({"t": float(t), "tv": res.tv, "tv_lo": res.tv_lo, "tv_hi": res.tv_hi,
                     "ok": res.tv <= tol + width})
    rep = Report("stationarity", rows)
    rep.checks["fixed_point"] = all(r["ok"] for r in rows)
    return rep
