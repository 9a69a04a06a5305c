"""Exact stochastic simulation of the TKF91 process.

Two paths are provided: a full-sequence Gillespie simulation that tracks
digits and root-lineage tags, and a vectorized simulation of the length
chain alone (birth rate ``lam * (n + 1)``, death rate ``mu * n``).

Random numbers come from Philox, a counter-based generator.  Work is split
into fixed blocks of replicates and block ``b`` always draws from the
stream keyed by ``(seed, stream_id)`` with counter ``b``, so results do not
depend on how blocks are scheduled across threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._io import csv_text
from .exceptions import CapExceeded
from .model import ModelParams, RootedTree, Sequence, StarTree2

__all__ = [
    "SimConfig",
    "LengthPair",
    "make_rng",
    "evolve_sequence",
    "evolve_length",
    "evolve_lengths",
    "simulate_progeny",
    "evolve_sequences",
    "sample_root_stationary",
    "sample_leaf_pairs",
    "simulate_tree",
    "simulate_trees",
    "fasta_text",
    "length_table_csv",
    "pairs_csv",
]

BLOCK = 8192


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    stream_id: int = 0
    max_length_cap: int = 10_000_000
    threads: int | None = None

    def __post_init__(self):
        if self.max_length_cap < 1:
            raise ValueError("max_length_cap must be at least 1")
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")


@dataclass(frozen=True)
class LengthPair:
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("lengths must be non-negative")


def make_rng(seed: int, stream_id: int = 0, block: int = 0) -> np.random.Generator:
    """Generator for one block of one substream."""
    key = (seed % 2 ** 64) | ((stream_id % 2 ** 64) << 64)
    counter = np.array([0, 0, 0, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _n_threads(cfg: SimConfig) -> int:
    if cfg.threads:
        return cfg.threads
    env = os.environ.get("TKF_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def _run_blocks(count: int, cfg: SimConfig, work: Callable[[np.random.Generator, int], list]):
    """Apply ``work(rng, size)`` to each block and concatenate in block order."""
    sizes = [min(BLOCK, count - s) for s in range(0, count, BLOCK)]

    def job(b):
        return work(make_rng(cfg.seed, cfg.stream_id, b), sizes[b])

    threads = min(_n_threads(cfg), len(sizes))
    if threads <= 1:
        return [job(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(job, range(len(sizes))))


def _unit_rates(params: ModelParams) -> tuple[float, float]:
    """(lam/mu, nu/mu): rates in time units where mu == 1."""
    return params.lam / params.mu, params.nu / params.mu


class _Draws:
    """Buffered uniforms and exponentials from one generator."""

    def __init__(self, rng: np.random.Generator, size: int = 512):
        self.rng, self.size = rng, size
        self._u, self._iu = rng.random(size), 0
        self._e, self._ie = rng.standard_exponential(size), 0

    def uniform(self) -> float:
        if self._iu == self.size:
            self._u, self._iu = self.rng.random(self.size), 0
        self._iu += 1
        return self._u[self._iu - 1]

    def exponential(self) -> float:
        if self._ie == self.size:
            self._e, self._ie = self.rng.standard_exponential(self.size), 0
        self._ie += 1
        return self._e[self._ie - 1]


def _evolve_lists(digits: list, lineage: list, lam: float, nu: float, pi1: float,
                  t: float, draws: _Draws, cap: int) -> None:
    """In-place Gillespie simulation on digit/lineage lists (mu == 1 units)."""
    clock = 0.0
    while True:
        M = len(digits)
        ins = lam * (M + 1)
        total = ins + M * (1.0 + nu)
        clock += draws.exponential() / total
        if clock >= t:
            return
        u = draws.uniform() * total
        if u < ins:
            # site 0 is the immortal link; the child goes right after its parent
            site = min(int(u / lam), M)
            tag = 0 if site == 0 else lineage[site - 1]
            digits.insert(site, 1 if draws.uniform() < pi1 else 0)
            lineage.insert(site, tag)
            if M + 1 > cap:
                raise CapExceeded(f"sequence length exceeded cap {cap}")
        elif nu == 0.0 or u < ins + M:
            i = min(int(u - ins), M - 1)
            del digits[i]
            del lineage[i]
        else:
            i = min(int((u - ins - M) / nu), M - 1)
            digits[i] = 1 if draws.uniform() < pi1 else 0


def evolve_sequence(params: ModelParams, seq: Sequence, t: float,
                    cfg: SimConfig | None = None, rng: np.random.Generator | None = None
                    ) -> Sequence:
    """Run the full indel/substitution process on ``seq`` for time ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    cfg = cfg or SimConfig()
    if t == 0:
        return seq
    if rng is None:
        rng = make_rng(cfg.seed, cfg.stream_id, 0)
    lam, nu = _unit_rates(params)
    digits, lineage = list(seq.digits), list(seq.lineage)
    _evolve_lists(digits, lineage, lam, nu, params.pi1, t * params.mu,
                  _Draws(rng, 64), cfg.max_length_cap)
    return Sequence(tuple(digits), tuple(lineage))


def _length_batch(lam: float, n0: np.ndarray, t: float, rng: np.random.Generator,
                  immigration: float = 1.0, cap: int = 10_000_000) -> np.ndarray:
    """Vectorized Gillespie for the linear birth-death chain (mu == 1 units).

    Birth rate ``lam * (n + immigration)``, death rate ``n``.
    """
    n = np.array(n0, dtype=np.int64, copy=True)
    if t <= 0 or n.size == 0:
        return n
    clock = np.zeros(n.size)
    active = np.arange(n.size)
    while active.size:
        na = n[active]
        birth = lam * (na + immigration)
        rate = birth + na
        live = rate > 0
        active, birth, rate = active[live], birth[live], rate[live]
        if not active.size:
            break
        clock[active] += rng.standard_exponential(active.size) / rate
        go = clock[active] < t
        active, birth, rate = active[go], birth[go], rate[go]
        if not active.size:
            break
        step = np.where(rng.random(active.size) * rate < birth, 1, -1)
        n[active] += step
        if n[active].max() > cap:
            raise CapExceeded(f"sequence length exceeded cap {cap}")
    return n


def evolve_length(params: ModelParams, M: int, t: float, cfg: SimConfig | None = None) -> int:
    """Length after time ``t`` starting from ``M`` mortal sites, simulating the length chain only."""
    if M < 0 or t < 0:
        raise ValueError("M and t must be non-negative")
    cfg = cfg or SimConfig()
    lam, _ = _unit_rates(params)
    rng = make_rng(cfg.seed, cfg.stream_id, 0)
    return int(_length_batch(lam, np.array([M]), t * params.mu, rng, 1.0, cfg.max_length_cap)[0])


def evolve_lengths(params: ModelParams, M: int, t: float, count: int,
                   cfg: SimConfig | None = None) -> np.ndarray:
    """``count`` independent runs of :func:`evolve_length` from the same start."""
    cfg = cfg or SimConfig()
    lam, _ = _unit_rates(params)

    def work(rng, size):
        return _length_batch(lam, np.full(size, M), t * params.mu, rng, 1.0, cfg.max_length_cap)

    return np.concatenate(_run_blocks(count, cfg, work)) if count else np.zeros(0, np.int64)


def simulate_progeny(params: ModelParams, t: float, count: int, cfg: SimConfig | None = None,
                     immortal: bool = False) -> np.ndarray:
    """Progeny sizes of a single link after time ``t``.

    A mortal link counts itself if it survives; the immortal link counts only
    its mortal descendants.
    """
    cfg = cfg or SimConfig()
    lam, _ = _unit_rates(params)
    start, imm = (0, 1.0) if immortal else (1, 0.0)

    def work(rng, size):
        return _length_batch(lam, np.full(size, start), t * params.mu, rng, imm,
                             cfg.max_length_cap)

    return np.concatenate(_run_blocks(count, cfg, work)) if count else np.zeros(0, np.int64)


def evolve_sequences(params: ModelParams, M: int, t: float, count: int,
                     cfg: SimConfig | None = None, lineage: int | None = None) -> np.ndarray:
    """Full-sequence runs from a random root of ``M`` sites tagged ``1..M``.

    Returns final lengths, or with ``lineage`` set, the number of sites
    descending from that root site (0 is the immortal link).
    """
    cfg = cfg or SimConfig()
    lam, nu = _unit_rates(params)
    tau = t * params.mu

    def work(rng, size):
        draws = _Draws(rng)
        out = np.empty(size, dtype=np.int64)
        for i in range(size):
            d = [1 if draws.uniform() < params.pi1 else 0 for _ in range(M)]
            g = list(range(1, M + 1))
            _evolve_lists(d, g, lam, nu, params.pi1, tau, draws, cfg.max_length_cap)
            out[i] = len(d) if lineage is None else g.count(lineage)
        return out

    return np.concatenate(_run_blocks(count, cfg, work)) if count else np.zeros(0, np.int64)


def sample_root_stationary(params: ModelParams, cfg: SimConfig | None = None,
                           rng: np.random.Generator | None = None) -> Sequence:
    """Root sequence drawn from the stationary measure; lineage ids are ``1..M``."""
    if rng is None:
        cfg = cfg or SimConfig()
        rng = make_rng(cfg.seed, cfg.stream_id, 0)
    M = int(rng.geometric(1.0 - params.ratio)) - 1
    digits = (rng.random(M) < params.pi1).astype(int)
    return Sequence(tuple(digits.tolist()), tuple(range(1, M + 1)))


def sample_leaf_pairs(params: ModelParams, star: StarTree2, count: int,
                      cfg: SimConfig | None = None, full_sequences: bool = False) -> np.ndarray:
    """Leaf length pairs from ``count`` independent star-tree replicates.

    Returns an integer array of shape ``(count, 2)``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    cfg = cfg or SimConfig()
    lam, nu = _unit_rates(params)
    h = star.h * params.mu
    cap = cfg.max_length_cap

    def lengths(rng, size):
        roots = rng.geometric(1.0 - lam, size) - 1
        n1 = _length_batch(lam, roots, h, rng, 1.0, cap)
        n2 = _length_batch(lam, roots, h, rng, 1.0, cap)
        return np.column_stack([n1, n2])

    def sequences(rng, size):
        draws = _Draws(rng)
        out = np.empty((size, 2), dtype=np.int64)
        for i in range(size):
            root = sample_root_stationary(params, rng=rng)
            for leaf in range(2):
                d, g = list(root.digits), list(root.lineage)
                _evolve_lists(d, g, lam, nu, params.pi1, h, draws, cap)
                out[i, leaf] = len(d)
        return out

    return np.concatenate(_run_blocks(count, cfg, sequences if full_sequences else lengths))


def simulate_tree(params: ModelParams, tree: RootedTree, cfg: SimConfig | None = None,
                  replicate: int = 0) -> dict[str, Sequence]:
    """Evolve a stationary root sequence down ``tree``; return the leaf states."""
    cfg = cfg or SimConfig()
    rng = make_rng(cfg.seed, cfg.stream_id, replicate)
    return _simulate_tree(params, tree, rng, cfg.max_length_cap)


def _simulate_tree(params, tree, rng, cap):
    lam, nu = _unit_rates(params)
    draws = _Draws(rng)
    root = sample_root_stationary(params, rng=rng)
    out: dict[str, Sequence] = {}
    stack = [(tree.root, list(root.digits), list(root.lineage))]
    while stack:
        node, d, g = stack.pop()
        if node.is_leaf:
            out[node.name] = Sequence(tuple(d), tuple(g))
            continue
        for child in reversed(node.children):
            cd, cg = list(d), list(g)
            _evolve_lists(cd, cg, lam, nu, params.pi1, child.length * params.mu, draws, cap)
            stack.append((child, cd, cg))
    return {leaf.name: out[leaf.name] for leaf in tree.leaves()}


def simulate_trees(params: ModelParams, tree: RootedTree, count: int,
                   cfg: SimConfig | None = None) -> list[dict[str, Sequence]]:
    """``count`` independent replicates of :func:`simulate_tree`."""
    cfg = cfg or SimConfig()
    if count <= 0:
        return []

    def work(rng, size):
        return [_simulate_tree(params, tree, rng, cfg.max_length_cap) for _ in range(size)]

    return [rep for block in _run_blocks(count, cfg, work) for rep in block]


def fasta_text(replicates: list[dict[str, Sequence]]) -> str:
    lines = []
    for r, leaves in enumerate(replicates):
        for name, seq in leaves.items():
            lines.append(f">{r}|{name}")
            lines.append(str(seq))
    return "\n".join(lines) + ("\n" if lines else "")


def length_table_csv(replicates: list[dict[str, Sequence]]) -> str:
    rows = ((r, name, len(seq)) for r, leaves in enumerate(replicates)
            for name, seq in leaves.items())
    return csv_text(["replicate", "leaf", "length"], rows)


def pairs_csv(pairs: np.ndarray) -> str:
    """Star-tree pairs as a (replicate, leaf, length) table."""
    rows = ((r, leaf + 1, int(pairs[r, leaf])) for r in range(len(pairs)) for leaf in range(2))
    return csv_text(["replicate", "leaf", "length"], rows)
