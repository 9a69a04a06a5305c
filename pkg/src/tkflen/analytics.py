"""Exact (truncated, error-certified) laws of the TKF91 length process.

All functions take either a :class:`~tkflen.model.ModelParams` or a bare
float ``lam/mu``; times are converted to units where ``mu == 1``.  A bare
ratio of exactly 1 is accepted as the continuous limit.

A mortal link alive at time 0 leaves ``L_t`` descendants (itself included)
at time ``t``: zero with probability ``eta``, otherwise ``1 + G`` with ``G``
geometric of ratio ``lam * eta``.  The immortal link leaves a geometric
number of mortal descendants with the same ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, special

from .exceptions import DegenerateError, ResourceError
from .laws import DiscreteLaw, JointLaw, TVResult, tv_distance, tv_from_arrays
from .model import _mu, _ratio, stationary_pmf_array

__all__ = [
    "Moments",
    "OverlapCertificate",
    "eta",
    "mortal_progeny_pmf",
    "immortal_progeny_pmf",
    "progeny_moments",
    "leaf_length_pmf_given_root",
    "joint_pair_law",
    "pair_law_tv",
    "leaf_marginal_law",
    "stationary_law",
    "berry_esseen_bound",
    "berry_esseen_deviation",
    "overlap_certificate",
    "RootSweep",
    "convolution_crosscheck",
]

DEFAULT_CAP = 5_000_000
PMF_TOL = 1e-14


@dataclass(frozen=True)
class _Link:
    """Per-link constants for rescaled rate ``lam`` and elapsed time ``tau``.

    ``growth`` is ``(1 - exp(-(1-lam) tau)) / (1 - lam)``, which tends to
    ``tau`` as ``lam -> 1``; every other quantity is a ratio of it with
    ``beta`` so nothing cancels near ``lam == 1``.
    """

    lam: float
    tau: float
    beta: float
    growth: float

    @classmethod
    def make(cls, params, t: float) -> "_Link":
        lam = _ratio(params)
        tau = _mu(params) * float(t)
        if tau < 0:
            raise ValueError(f"time must be non-negative, got {t}")
        x = (1.0 - lam) * tau
        if lam == 1.0:
            g = tau
        else:
            g = -math.expm1(-x) / (1.0 - lam)
        return cls(lam, tau, math.exp(-x), g)

    @property
    def denom(self) -> float:
        return self.growth + self.beta

    @property
    def eta(self) -> float:
        return self.growth / self.denom

    @property
    def one_minus_eta(self) -> float:
        return self.beta / self.denom

    @property
    def q(self) -> float:
        """Geometric ratio ``lam * eta``."""
        return self.lam * self.growth / self.denom

    @property
    def one_minus_q(self) -> float:
        return 1.0 / self.denom

    @property
    def sigma2(self) -> float:
        return (1.0 + self.lam) * self.beta * self.growth


def eta(params, t: float) -> float:
    """Probability that a mortal link has no descendant after time ``t``."""
    return _Link.make(params, t).eta


def _geometric_cut(q: float, scale: float, tol: float) -> int:
    """Smallest ``c >= 1`` with ``scale * q**c <= tol``."""
    if q <= 0.0 or scale <= tol:
        return 1
    return max(1, math.ceil(math.log(tol / scale) / math.log(q)))


def _mortal_masses(link: _Link, n_terms: int) -> np.ndarray:
    out = np.empty(n_terms)
    out[0] = link.eta
    if n_terms > 1:
        k = np.arange(n_terms - 1, dtype=float)
        out[1:] = link.one_minus_eta * link.one_minus_q * np.power(link.q, k)
    return out


def mortal_progeny_pmf(params, t: float, tol: float = PMF_TOL) -> DiscreteLaw:
    """Law of the progeny size of one mortal link after time ``t``."""
    link = _Link.make(params, t)
    if link.tau == 0:
        return DiscreteLaw.point_mass(1)
    c = _geometric_cut(link.q, link.one_minus_eta, tol)
    masses = _mortal_masses(link, c + 1)
    return DiscreteLaw(0, masses, link.one_minus_eta * link.q ** c)


def immortal_progeny_pmf(params, t: float, tol: float = PMF_TOL) -> DiscreteLaw:
    """Law of the number of mortal descendants of the immortal link."""
    link = _Link.make(params, t)
    if link.tau == 0:
        return DiscreteLaw.point_mass(0)
    c = _geometric_cut(link.q, 1.0, tol)
    masses = link.one_minus_q * np.power(link.q, np.arange(c, dtype=float))
    return DiscreteLaw(0, masses, link.q ** c)


@dataclass(frozen=True)
class Moments:
    beta: float
    sigma2: float
    rho: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def _rho_closed(link: _Link) -> float:
    # (1 + G) is geometric on {1, 2, ...} with mean D = 1/(1-q)
    D, b = link.denom, link.beta
    third_central = b * (6 * D * D - 6 * D + 1) - 3 * b * b * (2 * D - 1) + 2 * b ** 3
    # |L - beta|^3 differs from (L - beta)^3 only at L = 0
    return third_central + 2 * link.eta * b ** 3


def _rho_series(link: _Link, tol: float = 1e-12) -> tuple[float, float]:
    """Truncated sum of ``|n - beta|^3 P(L = n)`` and a bound on the remainder."""
    b, q = link.beta, link.q
    a = link.one_minus_eta * link.one_minus_q
    c = 16
    while True:
        n = np.arange(1, c + 1, dtype=float)
        head = link.eta * b ** 3 + math.fsum(((n - b) ** 3) * a * np.power(q, n - 1))
        # remaining terms a (n-b)^3 q^(n-1) for n > c shrink by at most this ratio
        ratio = (1.0 + 1.0 / (c + 1 - b)) ** 3 * q
        if ratio < 1.0:
            first = a * (c + 1 - b) ** 3 * q ** c
            bound = first / (1.0 - ratio)
            if bound <= tol:
                return head, bound
        c *= 2


def progeny_moments(params, t: float, method: str = "series") -> Moments:
    """Mean, variance and absolute third central moment of ``L_t``.

    ``method="series"`` sums the pmf with a certified remainder; ``"closed"``
    uses the geometric-structure formula.  The two agree to ~1e-12.
    """
    link = _Link.make(params, t)
    if method == "closed":
        rho = _rho_closed(link)
    elif method == "series":
        rho = _rho_series(link)[0] if link.tau > 0 else 0.0
    else:
        raise ValueError(f"unknown method {method!r}")
    return Moments(link.beta, link.sigma2, rho)


def _log_mgf(link: _Link, s: float, M: int, immortal: bool) -> float:
    es = math.exp(s)
    qe = link.q * es
    out = 0.0
    if M:
        out += M * math.log(link.eta + link.one_minus_eta * link.one_minus_q * es / (1 - qe))
    if immortal:
        out += math.log(link.one_minus_q / (1 - qe))
    return out


def _chernoff_log_tail(link: _Link, M: int, immortal: bool, n: float) -> float:
    """log of a Chernoff bound on ``P(S >= n)``."""
    s_max = -math.log(link.q) if link.q > 0 else 50.0
    res = optimize.minimize_scalar(
        lambda s: _log_mgf(link, s, M, immortal) - s * n,
        bounds=(1e-12, s_max * (1 - 1e-9)), method="bounded",
        options={"xatol": 1e-10})
    return min(0.0, float(res.fun))


def _support_limit(link: _Link, M: int, immortal: bool, tol: float) -> int:
    """Value ``n`` with ``P(S > n) <= tol`` for S = M mortal (+ immortal) progenies."""
    if link.tau == 0:
        return M
    if M == 0 and not immortal:
        return 0
    mean = M * link.beta + (link.q / link.one_minus_q if immortal else 0.0)
    sd = math.sqrt(M * link.sigma2 + (link.q / link.one_minus_q ** 2 if immortal else 0.0))
    target = math.log(tol)
    lo = math.floor(mean)
    step = max(1.0, sd)
    hi = lo + step
    while _chernoff_log_tail(link, M, immortal, hi + 1) > target:
        lo, hi = hi, hi + step
        step *= 2
    lo, hi = int(lo), int(math.ceil(hi))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _chernoff_log_tail(link, M, immortal, mid + 1) > target:
            lo = mid
        else:
            hi = mid
    return hi


def _mixture_masses(link: _Link, M: int, n_max: int) -> np.ndarray:
    """Binomial / negative-binomial closed form of the M-fold mortal convolution.

    ``K ~ Binomial(M, 1 - eta)`` links survive; given ``K = k`` the total is
    ``k`` plus a negative binomial with ``k`` successes of probability ``1 - q``.
    """
    out = np.zeros(n_max + 1)
    out[0] = link.eta ** M
    if M == 0 or n_max == 0:
        return out
    with np.errstate(divide="ignore"):
        log_eta = math.log(link.eta) if link.eta > 0 else -np.inf
        log_ome = math.log(link.one_minus_eta)
        log_q = math.log(link.q) if link.q > 0 else -np.inf
        log_omq = math.log(link.one_minus_q)
    k = np.arange(1, M + 1, dtype=float)[:, None]
    n = np.arange(1, n_max + 1, dtype=float)[None, :]
    log_binom = special.gammaln(M + 1) - special.gammaln(k + 1) - special.gammaln(M - k + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_choose = special.gammaln(n) - special.gammaln(k) - special.gammaln(n - k + 1)
        logt = (log_binom + k * log_ome + np.where(M - k > 0, (M - k) * log_eta, 0.0)
                + log_choose + k * log_omq + np.where(n - k > 0, (n - k) * log_q, 0.0))
    logt = np.where(n >= k, logt, -np.inf)
    out[1:] = np.exp(logt).sum(axis=0)
    return out


def leaf_length_pmf_given_root(params, t: float, M: int, include_immortal: bool = False,
                               method: str = "dp", tol: float = PMF_TOL,
                               cap: int = DEFAULT_CAP) -> DiscreteLaw:
    """Law of a leaf length after time ``t`` from a root with ``M`` mortal sites.

    Without the immortal link this is the M-fold convolution of the mortal
    progeny law.  ``method`` selects ``"dp"`` (repeated convolution),
    ``"mixture"`` (closed form) or ``"sweep"`` (recursive filter).
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    link = _Link.make(params, t)
    if link.tau == 0:
        return DiscreteLaw.point_mass(M)
    n_max = _support_limit(link, M, include_immortal, tol)
    if n_max + 1 > cap:
        raise ResourceError(f"support of {n_max + 1} values exceeds cap {cap}")

    if method == "sweep":
        sweep = RootSweep(params, t, include_immortal, drop_tol=tol * 1e-3 / (M + 1))
        for _ in range(M):
            sweep.advance()
        return sweep.law()

    # per-link truncation far below tol so pointwise values are exact to ~M*1e-17
    mortal_cut = min(n_max, _geometric_cut(link.q, link.one_minus_eta, 1e-17))
    mortal = DiscreteLaw(0, _mortal_masses(link, mortal_cut + 1),
                         link.one_minus_eta * link.q ** mortal_cut)
    if method == "dp":
        law = DiscreteLaw.point_mass(0)
        for _ in range(M):
            law = law.convolve(mortal, max_value=n_max)
    elif method == "mixture":
        m = _mixture_masses(link, M, n_max)
        tail = max(0.0, 1.0 - math.fsum(m)) + (n_max + 1) * 2.0 ** -52
        law = DiscreteLaw(0, m, tail)
    else:
        raise ValueError(f"unknown method {method!r}")
    if include_immortal:
        imm_cut = min(n_max, _geometric_cut(link.q, 1.0, 1e-17))
        imm = DiscreteLaw(0, link.one_minus_q * np.power(link.q, np.arange(imm_cut + 1.0)),
                          link.q ** (imm_cut + 1))
        law = law.convolve(imm, max_value=n_max)
    return law


class RootSweep:
    """Leaf-length laws for root lengths ``0, 1, 2, ...`` at a fixed time.

    Each :meth:`advance` adds one mortal root site.  Convolving with the
    mortal progeny law is a first-order recursive filter because the law is
    geometric past zero, so a step costs time linear in the support width.
    Outer entries with cumulative mass below ``drop_tol`` are discarded on
    every step and added to the tracked deficit.
    """

    def __init__(self, params, t: float, include_immortal: bool = True,
                 drop_tol: float = 1e-15):
        self.link = _Link.make(params, t)
        self.drop_tol = drop_tol
        self.M = 0
        if self.link.tau == 0:
            self.offset, self.masses, self.deficit = 0, np.ones(1), 0.0
        elif include_immortal:
            law = immortal_progeny_pmf(params, t, tol=drop_tol)
            self.offset, self.masses, self.deficit = 0, law.masses.copy(), law.tail_bound
        else:
            self.offset, self.masses, self.deficit = 0, np.ones(1), 0.0
        self._ext = _geometric_cut(self.link.q, 1.0, drop_tol) + 1

    def law(self) -> DiscreteLaw:
        return DiscreteLaw(self.offset, np.maximum(self.masses, 0.0), self.deficit)

    def advance(self) -> None:
        link = self.link
        self.M += 1
        if link.tau == 0:
            self.offset += 1
            return
        p = np.concatenate([self.masses, np.zeros(self._ext)])
        u = signal.lfilter([0.0, link.one_minus_q], [1.0, -link.q], p)
        r = link.eta * p + link.one_minus_eta * u
        np.maximum(r, 0.0, out=r)
        # mass the filter would keep emitting past the padded end
        escaped = link.one_minus_eta * u[-1] * link.q / link.one_minus_q
        cs = np.cumsum(r)
        lo = int(np.searchsorted(cs, self.drop_tol, side="right"))
        rcs = np.cumsum(r[::-1])
        n_hi = int(np.searchsorted(rcs, self.drop_tol, side="right"))
        hi = len(r) - n_hi
        if lo >= hi:
            lo, hi, n_hi = 0, len(r), 0
        dropped = (cs[lo - 1] if lo else 0.0) + (rcs[n_hi - 1] if n_hi else 0.0)
        self.masses = r[lo:hi]
        self.offset += lo
        self.deficit += escaped + float(dropped)


def stationary_law(params, eps: float = 1e-12) -> DiscreteLaw:
    """Geometric stationary length law truncated at neglected mass ``eps``."""
    r = _ratio(params)
    n_max = _geometric_cut(r, 1.0, eps) - 1
    return DiscreteLaw(0, stationary_pmf_array(r, n_max), r ** (n_max + 1))


def _root_cut(r: float, eps: float) -> int:
    """Largest root length kept so that the stationary tail is at most ``eps``."""
    return _geometric_cut(r, 1.0, eps) - 1


def leaf_marginal_law(params, t: float, eps: float = 1e-10,
                      cap: int = DEFAULT_CAP) -> DiscreteLaw:
    """Law of one leaf length: stationary root, evolved for time ``t`` with the immortal link."""
    r = _ratio(params)
    M_max = _root_cut(r, eps / 2)
    drop = eps / (4.0 * (M_max + 1) ** 2)
    sweep = RootSweep(params, t, include_immortal=True, drop_tol=drop)
    acc = np.zeros(0)
    weighted_deficit = 0.0
    for M in range(M_max + 1):
        if M:
            sweep.advance()
        w = (1.0 - r) * r ** M
        end = sweep.offset + len(sweep.masses)
        if end > cap:
            raise ResourceError(f"marginal support {end} exceeds cap {cap}")
        if end > len(acc):
            acc = np.concatenate([acc, np.zeros(end - len(acc))])
        acc[sweep.offset:end] += w * sweep.masses
        weighted_deficit += w * sweep.deficit
    return DiscreteLaw(0, acc, r ** (M_max + 1) + weighted_deficit)


def joint_pair_law(params, h: float, include_immortal: bool = True, eps: float = 1e-8,
                   cap: int = 20_000_000) -> JointLaw:
    """Joint law of the two leaf lengths of a star tree of height ``h``.

    Mixture over the stationary root length of products of the conditionally
    independent leaf laws; the neglected mass is at most ``eps``.
    """
    if not h > 0:
        raise ValueError("height must be positive")
    if not 0 < eps < 0.1:
        raise ValueError("eps must lie in (0, 0.1)")
    r = _ratio(params)
    M_max = _root_cut(r, eps / 2)
    drop = eps / (8.0 * (M_max + 1) ** 2)
    sweep = RootSweep(params, h, include_immortal, drop_tol=drop)
    laws = []
    for M in range(M_max + 1):
        if M:
            sweep.advance()
        laws.append((sweep.offset, sweep.masses.copy(), sweep.deficit))
    lo = min(o for o, _, _ in laws)
    hi = max(o + len(m) for o, m, _ in laws)
    if (hi - lo) ** 2 > cap:
        raise ResourceError(f"joint table {(hi - lo)}^2 exceeds cap {cap}")
    table = np.zeros((hi - lo, hi - lo))
    tail = r ** (M_max + 1)
    for M, (o, m, d) in enumerate(laws):
        w = (1.0 - r) * r ** M
        s = o - lo
        table[s:s + len(m), s:s + len(m)] += w * np.outer(m, m)
        tail += w * 2.0 * d
    return JointLaw((lo, lo), table, tail)


def _align_pair(a: RootSweep, b: RootSweep) -> tuple[np.ndarray, np.ndarray]:
    lo = min(a.offset, b.offset)
    hi = max(a.offset + len(a.masses), b.offset + len(b.masses))
    x = np.zeros(hi - lo)
    y = np.zeros(hi - lo)
    x[a.offset - lo:a.offset - lo + len(a.masses)] = a.masses
    y[b.offset - lo:b.offset - lo + len(b.masses)] = b.masses
    return x, y


def pair_law_tv(params, h1: float, h2: float, eps: float = 1e-6) -> TVResult:
    """TV distance between the leaf-pair laws of star trees of heights ``h1`` and ``h2``.

    The length chain is reversible with respect to its stationary law, so the
    pair law is ``stationary(y1) * P_{2h}(y1, y2)``: the first leaf length is
    stationary and the second is the first evolved for time ``2h``.  The TV
    distance is then a stationary mixture of one-dimensional TV distances,
    which scales to ratios close to one where the joint table cannot be stored.
    """
    r = _ratio(params)
    if h1 == h2:
        return TVResult(0.0, 0.0, 0.0, 1.0)
    Y_max = _root_cut(r, eps / 2)
    mean_len = r / (1.0 - r)
    drop = min(1e-13, eps / (8.0 * (mean_len + 2.0)))
    a = RootSweep(params, 2 * h1, True, drop_tol=drop)
    b = RootSweep(params, 2 * h2, True, drop_tol=drop)
    tv = tv_lo = tv_hi = overlap = 0.0
    for y1 in range(Y_max + 1):
        if y1:
            a.advance()
            b.advance()
        w = (1.0 - r) * r ** y1
        x, y = _align_pair(a, b)
        res = tv_from_arrays(x, y, a.deficit, b.deficit)
        tv += w * res.tv
        tv_lo += w * res.tv_lo
        tv_hi += w * res.tv_hi
        overlap += w * res.overlap
    g_tail = r ** (Y_max + 1)
    return TVResult(tv, tv_lo, min(1.0, tv_hi + g_tail), overlap)


def berry_esseen_bound(params, t: float, M: int) -> float:
    """Uniform CDF-deviation bound ``3 rho / (sigma^3 sqrt(M - 1))`` for ``M - 1`` summands."""
    if M < 2:
        raise ValueError("M must be at least 2")
    mom = progeny_moments(params, t)
    return 3.0 * mom.rho / (mom.sigma ** 3 * math.sqrt(M - 1))


def berry_esseen_deviation(params, t: float, n: int, law: DiscreteLaw | None = None) -> float:
    """Upper bound on ``sup_x |F(n beta + x sigma sqrt(n)) - Phi(x)|`` for the sum of ``n`` progenies.

    Evaluated exactly at every jump of the lattice CDF, plus the neglected mass.
    """
    if n < 1:
        raise ValueError("n must be positive")
    link = _Link.make(params, t)
    if law is None:
        law = leaf_length_pmf_given_root(params, t, n, include_immortal=False, tol=1e-15)
    j = np.arange(law.support_offset, law.last + 2, dtype=float)
    z = (j - n * link.beta) / math.sqrt(n * link.sigma2)
    phi = special.ndtr(z)
    F = np.cumsum(law.masses)
    # the CDF is 0 below the support start
    below = float(phi[0])
    dev = max(below, float(np.max(np.abs(F - phi[:-1]))), float(np.max(np.abs(phi[1:] - F))))
    return dev + law.tail_bound


@dataclass(frozen=True, eq=False)
class OverlapCertificate:
    """Interval-mass and matched-point lower bounds on the overlap of two sum laws.

    Intervals of width ``K * sigma(h1)`` cover the band of one standard
    deviation of ``S_{M-1}`` around its mean under ``h1``.  The point bounds
    use the last mortal link to carry the best point of each interval into
    every point of the next one.
    """

    M: int
    K: int
    interval_starts: np.ndarray  # first integer of each interval
    interval_masses_h1: np.ndarray
    interval_masses_h2: np.ndarray
    min_interval_mass: float
    matched_points: np.ndarray
    matched_lower_bounds: np.ndarray
    matched_exact: np.ndarray
    link_floor: float  # smallest single-link mass over the offsets used
    point_mass_lower_bound: float
    matched_sum: float
    overlap_constant: float
    extra: dict = field(default_factory=dict)

    @property
    def scaled_min_interval_mass(self) -> float:
        return self.min_interval_mass * math.sqrt(self.M - 1)

    @property
    def scaled_point_mass_lower_bound(self) -> float:
        return self.point_mass_lower_bound * math.sqrt(self.M - 1)


def _certificate(M: int, K: int, beta1: float, sigma1: float,
                 a1: DiscreteLaw, a2: DiscreteLaw,
                 m1: DiscreteLaw, m2: DiscreteLaw) -> OverlapCertificate:
    n = M - 1
    center = beta1 * n
    width = K * sigma1
    R = max(1, math.ceil(math.sqrt(n) / K))
    bounds = center + width * np.arange(-R, R + 1)
    # integers in [b_r, b_{r+1}); consecutive intervals partition the integers
    starts = np.maximum(np.ceil(bounds).astype(np.int64), 0)
    if np.any(np.diff(starts) <= 0):
        raise DegenerateError(
            f"an interval of width {width:.3g} contains no integer (M={M}, K={K})")
    cs1 = np.concatenate([[0.0], np.cumsum(a1.masses)])
    cs2 = np.concatenate([[0.0], np.cumsum(a2.masses)])

    def interval_mass(cs, law, s, e):
        i0 = np.clip(s - law.support_offset, 0, len(law.masses))
        i1 = np.clip(e - law.support_offset, 0, len(law.masses))
        return cs[i1] - cs[i0]

    mass1 = interval_mass(cs1, a1, starts[:-1], starts[1:])
    mass2 = interval_mass(cs2, a2, starts[:-1], starts[1:])
    min_mass = float(np.min(np.minimum(mass1, mass2)))

    pts, lbs, exact = [], [], []
    used_offsets = []
    e1 = a1.convolve(m1)
    e2 = a2.convolve(m2)
    for r in range(2 * R - 1):
        s, e = starts[r], starts[r + 1]
        nxt = np.arange(starts[r + 1], starts[r + 2])
        lb = np.full(len(nxt), np.inf)
        for a, m in ((a1, m1), (a2, m2)):
            seg = a.pmf(np.arange(s, e))
            best = s + int(np.argmax(seg))
            d = nxt - best
            used_offsets.append(d)
            lb = np.minimum(lb, a.pmf(best) * m.pmf(d))
        pts.append(nxt)
        lbs.append(lb)
        exact.append(np.minimum(e1.pmf(nxt), e2.pmf(nxt)))
    pts = np.concatenate(pts)
    lbs = np.concatenate(lbs)
    exact = np.concatenate(exact)
    if np.any(lbs > exact * (1 + 1e-9) + 1e-300):
        raise ArithmeticError("matched lower bound exceeds the exact point mass")
    offs = np.concatenate(used_offsets)
    floor = float(min(np.min(m1.pmf(offs)), np.min(m2.pmf(offs))))
    matched = float(np.sum(lbs))
    return OverlapCertificate(
        M=M, K=K, interval_starts=starts, interval_masses_h1=mass1,
        interval_masses_h2=mass2, min_interval_mass=min_mass,
        matched_points=pts, matched_lower_bounds=lbs, matched_exact=exact,
        link_floor=floor, point_mass_lower_bound=float(np.min(lbs)),
        matched_sum=matched, overlap_constant=matched ** 2)


def overlap_certificate(params, h1: float, h2: float, M: int, K: int) -> OverlapCertificate:
    """Certificate for the overlap of the root-length-``M`` leaf-pair laws at two heights."""
    if not h1 >= h2 > 0:
        raise ValueError("need h1 >= h2 > 0")
    if M < 2 or K < 1:
        raise ValueError("need M >= 2 and K >= 1")
    mom1 = progeny_moments(params, h1)
    a1 = leaf_length_pmf_given_root(params, h1, M - 1, tol=1e-15)
    a2 = leaf_length_pmf_given_root(params, h2, M - 1, tol=1e-15)
    m1 = mortal_progeny_pmf(params, h1, tol=1e-16)
    m2 = mortal_progeny_pmf(params, h2, tol=1e-16)
    return _certificate(M, K, mom1.beta, mom1.sigma, a1, a2, m1, m2)


def conditional_pair_overlap(params, h1: float, h2: float, M: int) -> TVResult:
    """TV between the pair laws given root length ``M`` and no immortal descendants."""
    laws = []
    for h in (h1, h2):
        q = leaf_length_pmf_given_root(params, h, M, tol=1e-15)
        laws.append(JointLaw((q.support_offset,) * 2, np.outer(q.masses, q.masses),
                             2 * q.tail_bound))
    return tv_distance(*laws)


def convolution_crosscheck(params, t: float, M_max: int) -> np.ndarray:
    """Max abs difference between repeated convolution and the closed form, for ``M = 1..M_max``.

    Both are evaluated on ``0..n`` where ``n`` bounds the support of the
    ``M_max``-fold sum; all masses there are exact for every smaller ``M``.
    """
    link = _Link.make(params, t)
    n_max = _support_limit(link, M_max, False, PMF_TOL)
    cut = min(n_max, _geometric_cut(link.q, link.one_minus_eta, 1e-17))
    mortal = DiscreteLaw(0, _mortal_masses(link, cut + 1), link.one_minus_eta * link.q ** cut)
    law = DiscreteLaw.point_mass(0)
    diffs = np.empty(M_max)
    for M in range(1, M_max + 1):
        law = law.convolve(mortal, max_value=n_max)
        closed = _mixture_masses(link, M, n_max)
        dp = np.zeros(n_max + 1)
        dp[:len(law.masses)] = law.masses
        diffs[M - 1] = np.max(np.abs(dp - closed))
    return diffs
