"""Truncated probability laws with certified neglected mass, and TV distance.

Stored masses are never larger than the true masses, so the neglected mass
``tail_bound`` bounds everything the table does not account for.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ._io import csv_text, json_text

__all__ = ["DiscreteLaw", "JointLaw", "TVResult", "tv_distance"]


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    """pmf on consecutive integers ``support_offset, support_offset + 1, ...``."""

    support_offset: int
    masses: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.ndim != 1:
            raise ValueError("masses must be one-dimensional")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and non-negative")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be non-negative")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "support_offset", int(self.support_offset))
        object.__setattr__(self, "tail_bound", float(self.tail_bound))

    @classmethod
    def point_mass(cls, n: int = 0) -> "DiscreteLaw":
        return cls(n, np.ones(1), 0.0)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + len(self.masses))

    @property
    def last(self) -> int:
        return self.support_offset + len(self.masses) - 1

    def total(self) -> float:
        return float(np.sum(self.masses))

    def pmf(self, n) -> np.ndarray | float:
        idx = np.asarray(n) - self.support_offset
        inside = (idx >= 0) & (idx < len(self.masses))
        out = np.where(inside, self.masses[np.clip(idx, 0, len(self.masses) - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self) -> np.ndarray:
        """Cumulative stored mass at each support point."""
        return np.cumsum(self.masses)

    def mean(self) -> float:
        return float(np.dot(self.support, self.masses) / self.total())

    def var(self) -> float:
        x = self.support - self.mean()
        return float(np.dot(x * x, self.masses) / self.total())

    def convolve(self, other: "DiscreteLaw", max_value: int | None = None) -> "DiscreteLaw":
        """Law of the sum of independent draws.

        Masses at values up to ``min(self.last, other.last) + min offsets`` are
        exact when both inputs were; everything past ``max_value`` is dropped
        into the tail.
        """
        m = np.convolve(self.masses, other.masses)
        off = self.support_offset + other.support_offset
        tail = self.tail_bound + other.tail_bound
        if max_value is not None and off + len(m) - 1 > max_value:
            keep = max(max_value - off + 1, 0)
            tail += float(np.sum(m[keep:]))
            m = m[:keep]
        return DiscreteLaw(off, m, tail)

    def trimmed(self, tol: float) -> "DiscreteLaw":
        """Drop outer entries whose cumulative mass on each side is at most ``tol``."""
        m = self.masses
        if len(m) == 0:
            return self
        cs = np.cumsum(m)
        lo = int(np.searchsorted(cs, tol, side="right"))
        rcs = np.cumsum(m[::-1])
        hi = len(m) - int(np.searchsorted(rcs, tol, side="right"))
        if lo >= hi:
            return self
        dropped = (cs[lo - 1] if lo else 0.0) + (rcs[len(m) - hi - 1] if hi < len(m) else 0.0)
        return DiscreteLaw(self.support_offset + lo, m[lo:hi], self.tail_bound + float(dropped))

    def to_csv(self) -> str:
        return csv_text(["value", "mass"], zip(self.support.tolist(), self.masses.tolist()))

    def to_dict(self) -> dict:
        return {"support_offset": self.support_offset, "masses": self.masses.tolist(),
                "tail_bound": self.tail_bound}

    def to_json(self) -> str:
        return json_text(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteLaw":
        return cls(d["support_offset"], np.asarray(d["masses"], dtype=float), d["tail_bound"])


@dataclass(frozen=True, eq=False)
class JointLaw:
    """pmf on an integer rectangle, dense storage with per-axis offsets."""

    support_offset: tuple[int, int]
    masses: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.ndim != 2:
            raise ValueError("masses must be two-dimensional")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite and non-negative")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "support_offset", tuple(int(o) for o in self.support_offset))
        object.__setattr__(self, "tail_bound", float(self.tail_bound))

    def total(self) -> float:
        return float(np.sum(self.masses))

    def __getitem__(self, key: tuple[int, int]) -> float:
        i = key[0] - self.support_offset[0]
        j = key[1] - self.support_offset[1]
        if 0 <= i < self.masses.shape[0] and 0 <= j < self.masses.shape[1]:
            return float(self.masses[i, j])
        return 0.0

    def items(self):
        """Sparse iteration over ``((y1, y2), mass)`` with positive mass."""
        o1, o2 = self.support_offset
        for i, j in zip(*np.nonzero(self.masses)):
            yield (int(i) + o1, int(j) + o2), float(self.masses[i, j])

    def marginal(self, axis: int = 0) -> DiscreteLaw:
        return DiscreteLaw(self.support_offset[axis], self.masses.sum(axis=1 - axis),
                           self.tail_bound)

    def to_csv(self) -> str:
        rows = ((y1, y2, m) for (y1, y2), m in self.items())
        return csv_text(["value", "value2", "mass"], rows)

    def to_dict(self) -> dict:
        return {"support_offset": list(self.support_offset),
                "masses": self.masses.tolist(), "tail_bound": self.tail_bound}

    def to_json(self) -> str:
        return json_text(self.to_dict())


@dataclass(frozen=True)
class TVResult:
    """TV distance from stored masses, with a certified enclosing interval."""

    tv: float
    tv_lo: float
    tv_hi: float
    overlap: float

    @property
    def overlap_lo(self) -> float:
        return 1.0 - self.tv_hi

    @property
    def overlap_hi(self) -> float:
        return 1.0 - self.tv_lo


Law = Union[DiscreteLaw, JointLaw]


def _aligned(a: Law, b: Law) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, DiscreteLaw):
        lo = min(a.support_offset, b.support_offset)
        hi = max(a.last, b.last)
        out = np.zeros((2, hi - lo + 1))
        for k, law in enumerate((a, b)):
            s = law.support_offset - lo
            out[k, s:s + len(law.masses)] = law.masses
        return out[0], out[1]
    lo = [min(a.support_offset[k], b.support_offset[k]) for k in range(2)]
    hi = [max(law.support_offset[k] + law.masses.shape[k] for law in (a, b)) for k in range(2)]
    out = np.zeros((2, hi[0] - lo[0], hi[1] - lo[1]))
    for k, law in enumerate((a, b)):
        s0 = law.support_offset[0] - lo[0]
        s1 = law.support_offset[1] - lo[1]
        out[k, s0:s0 + law.masses.shape[0], s1:s1 + law.masses.shape[1]] = law.masses
    return out[0], out[1]


def tv_from_arrays(x: np.ndarray, y: np.ndarray, tail_x: float, tail_y: float) -> TVResult:
    """TV between two aligned mass arrays with known neglected masses."""
    tv = 0.5 * float(np.sum(np.abs(x - y)))
    overlap = float(np.sum(np.minimum(x, y)))
    half_total = 0.5 * (float(np.sum(x)) + float(np.sum(y)))
    # |x - y| / 2 + min(x, y) == (x + y) / 2 pointwise
    if abs(tv + overlap - half_total) > 1e-12 * max(1.0, half_total) + 1e-15 * x.size:
        raise ArithmeticError("TV / overlap identity violated")
    w = 0.5 * (tail_x + tail_y)
    return TVResult(tv, float(max(0.0, tv - w)), float(min(1.0, tv + w)), overlap)


def tv_distance(a: Law, b: Law) -> TVResult:
    """Total variation distance between two laws of the same kind."""
    if type(a) is not type(b):
        raise TypeError("tv_distance needs two laws of the same kind")
    x, y = _aligned(a, b)
    return tv_from_arrays(x, y, a.tail_bound, b.tail_bound)
