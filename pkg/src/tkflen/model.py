"""Model parameters, stationary laws and the basic sequence/tree value types."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .exceptions import ParamError, ProbError

__all__ = [
    "ModelParams",
    "Sequence",
    "StarTree2",
    "Node",
    "RootedTree",
    "validate",
    "load_params",
    "parse_newick",
    "stationary_length_pmf",
    "stationary_mean_length",
    "stationary_sequence_logprob",
    "time_rescale",
]


@dataclass(frozen=True)
class ModelParams:
    """Rates and digit frequencies of the two-state TKF91 process.

    ``lam`` is the per-site insertion rate, ``mu`` the deletion rate of a
    mortal site and ``nu`` its substitution rate.  The length process only
    depends on ``lam / mu``; ``nu`` and the digit frequencies are used by the
    full-sequence simulator.
    """

    lam: float
    mu: float = 1.0
    nu: float = 0.0
    pi0: float = 0.5
    pi1: float | None = None

    def __post_init__(self):
        if self.pi1 is None:
            object.__setattr__(self, "pi1", 1.0 - self.pi0)
        validate(self)

    @property
    def ratio(self) -> float:
        """``lam / mu``, the only parameter the length process sees."""
        return self.lam / self.mu

    @property
    def pi(self) -> tuple[float, float]:
        return (self.pi0, self.pi1)

    def rescaled(self) -> "ModelParams":
        """Same process in time units where ``mu == 1``."""
        return replace(self, lam=self.lam / self.mu, mu=1.0, nu=self.nu / self.mu)

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "mu": self.mu, "nu": self.nu,
                "pi0": self.pi0, "pi1": self.pi1}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        unknown = set(d) - {"lambda", "mu", "nu", "pi0", "pi1"}
        if unknown:
            raise ParamError(f"unknown parameter keys: {sorted(unknown)}")
        if "lambda" not in d:
            raise ParamError("missing required key 'lambda'")
        return cls(lam=float(d["lambda"]), mu=float(d.get("mu", 1.0)),
                   nu=float(d.get("nu", 0.0)), pi0=float(d.get("pi0", 0.5)),
                   pi1=None if d.get("pi1") is None else float(d["pi1"]))


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every invariant holds, else raise ParamError."""
    lam, mu, nu = params.lam, params.mu, params.nu
    for name, v in (("lambda", lam), ("mu", mu), ("nu", nu),
                    ("pi0", params.pi0), ("pi1", params.pi1)):
        if not math.isfinite(v):
            raise ParamError(f"{name} must be finite, got {v}")
    if lam <= 0 or mu <= 0:
        raise ParamError(f"rates must be positive (lambda={lam}, mu={mu})")
    if nu < 0:
        raise ParamError(f"nu must be non-negative, got {nu}")
    if lam >= mu:
        raise ParamError(f"need lambda < mu for a stationary law (lambda={lam}, mu={mu})")
    if params.pi0 < 0 or params.pi1 < 0:
        raise ParamError("digit probabilities must be non-negative")
    if abs(params.pi0 + params.pi1 - 1.0) > 1e-12:
        raise ParamError(f"pi0 + pi1 must equal 1, got {params.pi0 + params.pi1}")
    return params


def load_params(path: Union[str, Path]) -> ModelParams:
    """Read a JSON document with keys lambda, mu, nu, pi0, pi1."""
    with open(path) as fh:
        return ModelParams.from_dict(json.load(fh))


@dataclass(frozen=True)
class Sequence:
    """Mortal sites of a sequence; the immortal link is implicit.

    ``lineage[i]`` names the root site that digit ``i`` descends from:
    0 for the immortal link, ``k >= 1`` for the k-th mortal root site.
    """

    digits: tuple[int, ...] = ()
    lineage: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if not self.lineage and self.digits:
            object.__setattr__(self, "lineage", (0,) * len(self.digits))
        else:
            object.__setattr__(self, "lineage", tuple(int(k) for k in self.lineage))
        if len(self.lineage) != len(self.digits):
            raise ValueError("digits and lineage must have equal length")
        if any(d not in (0, 1) for d in self.digits):
            raise ValueError("digits must be 0 or 1")
        if any(k < 0 for k in self.lineage):
            raise ValueError("lineage ids must be non-negative")

    def __len__(self) -> int:
        return len(self.digits)

    def __str__(self) -> str:
        return "".join(map(str, self.digits))

    def lineage_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for k in self.lineage:
            counts[k] = counts.get(k, 0) + 1
        return counts


@dataclass(frozen=True)
class StarTree2:
    """Two leaves, labelled ``1`` and ``2``, each at distance ``h`` from the root."""

    h: float

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ParamError(f"tree height must be positive, got {self.h}")

    def to_tree(self) -> "RootedTree":
        return parse_newick(f"(1:{self.h!r},2:{self.h!r});")


@dataclass(frozen=True)
class Node:
    name: str | None
    length: float | None  # None only at the root
    children: tuple["Node", ...] = field(default=())

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class RootedTree:
    root: Node

    def __post_init__(self):
        for parent, child in self.edges():
            if child.length is None or not child.length > 0:
                raise ParamError(f"branch to {child.name!r} needs a positive length")
        names = [leaf.name for leaf in self.leaves()]
        if any(not n for n in names):
            raise ParamError("every leaf needs a label")
        if len(set(names)) != len(names):
            raise ParamError("leaf labels must be unique")

    def edges(self) -> Iterator[tuple[Node, Node]]:
        """Edges in depth-first pre-order."""
        stack = [(self.root, c) for c in reversed(self.root.children)]
        while stack:
            parent, node = stack.pop()
            yield parent, node
            stack.extend((node, c) for c in reversed(node.children))

    def leaves(self) -> list[Node]:
        if self.root.is_leaf:
            return [self.root]
        return [c for _, c in self.edges() if c.is_leaf]

    def scaled(self, factor: float) -> "RootedTree":
        def walk(node: Node) -> Node:
            length = None if node.length is None else node.length * factor
            return Node(node.name, length, tuple(walk(c) for c in node.children))
        return RootedTree(walk(self.root))

    def to_newick(self) -> str:
        def fmt(node: Node) -> str:
            s = ""
            if node.children:
                s = "(" + ",".join(fmt(c) for c in node.children) + ")"
            s += node.name or ""
            if node.length is not None:
                s += f":{node.length!r}"
            return s
        return fmt(self.root) + ";"


class _NewickParser:
    _special = set("(),:;")

    def __init__(self, text: str):
        self.s = text.strip()
        self.i = 0

    def error(self, msg: str):
        raise ParamError(f"Newick parse error at position {self.i}: {msg}")

    def skip_ws(self):
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.s[self.i] if self.i < len(self.s) else ""

    def label(self) -> str | None:
        self.skip_ws()
        if self.peek() == "'":
            end = self.s.find("'", self.i + 1)
            if end < 0:
                self.error("unterminated quoted label")
            out = self.s[self.i + 1:end]
            self.i = end + 1
            return out
        start = self.i
        while (self.i < len(self.s) and self.s[self.i] not in self._special
               and not self.s[self.i].isspace()):
            self.i += 1
        return self.s[start:self.i] or None

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.i += 1
        self.skip_ws()
        start = self.i
        while self.i < len(self.s) and self.s[self.i] not in self._special:
            self.i += 1
        try:
            return float(self.s[start:self.i])
        except ValueError:
            self.error(f"bad branch length {self.s[start:self.i]!r}")

    def subtree(self) -> Node:
        children: list[Node] = []
        if self.peek() == "(":
            self.i += 1
            children.append(self.subtree())
            while self.peek() == ",":
                self.i += 1
                children.append(self.subtree())
            if self.peek() != ")":
                self.error("expected ')'")
            self.i += 1
        name = self.label()
        return Node(name, self.length(), tuple(children))

    def parse(self) -> RootedTree:
        root = self.subtree()
        if self.peek() != ";":
            self.error("expected ';' terminating a single rooted tree")
        self.i += 1
        if self.peek():
            self.error("trailing characters after ';'")
        # a length on the root edge carries no information for the process
        root = Node(root.name, None, root.children)
        return RootedTree(root)


def parse_newick(text: str) -> RootedTree:
    """Parse one rooted Newick tree with labelled leaves and branch lengths."""
    return _NewickParser(text).parse()


def stationary_length_pmf(params, M: int) -> float:
    """Geometric stationary probability that the sequence has ``M`` mortal sites."""
    r = _ratio(params)
    if M < 0:
        return 0.0
    return (1.0 - r) * r ** M


def stationary_mean_length(params) -> float:
    r = _ratio(params)
    return r / (1.0 - r)


def stationary_sequence_logprob(params: ModelParams, seq: Sequence) -> float:
    """Log stationary probability of a full digit sequence."""
    r = params.ratio
    logpi = []
    for d in seq.digits:
        p = params.pi[d]
        if p <= 0:
            raise ProbError(f"digit {d} has zero stationary frequency")
        logpi.append(math.log(p))
    return math.log1p(-r) + len(seq) * math.log(r) + math.fsum(logpi)


def time_rescale(params: ModelParams, tree_or_height):
    """Express ``params`` and a height/tree in units where ``mu == 1``.

    Returns the rescaled parameters and the input with every branch length
    multiplied by ``mu``.
    """
    mu = params.mu
    if isinstance(tree_or_height, RootedTree):
        scaled = tree_or_height if mu == 1.0 else tree_or_height.scaled(mu)
    elif isinstance(tree_or_height, StarTree2):
        scaled = StarTree2(tree_or_height.h * mu)
    else:
        scaled = float(tree_or_height) * mu
    return params.rescaled(), scaled


def _ratio(params) -> float:
    """``lam/mu`` from a ModelParams, or a bare float already in mu=1 units."""
    if isinstance(params, ModelParams):
        return params.ratio
    r = float(params)
    if not 0.0 < r <= 1.0:
        raise ParamError(f"rate ratio must lie in (0, 1], got {r}")
    return r


def _mu(params) -> float:
    return params.mu if isinstance(params, ModelParams) else 1.0


def stationary_pmf_array(params, n_max: int) -> np.ndarray:
    """Vector of stationary probabilities for lengths ``0..n_max``."""
    r = _ratio(params)
    return (1.0 - r) * np.power(r, np.arange(n_max + 1, dtype=float))
