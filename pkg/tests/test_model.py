import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tkflen.analytics import leaf_length_pmf_given_root, pair_law_tv
from tkflen.exceptions import ParamError, ProbError
from tkflen.model import (
    ModelParams,
    RootedTree,
    Sequence,
    StarTree2,
    load_params,
    parse_newick,
    stationary_length_pmf,
    stationary_mean_length,
    stationary_pmf_array,
    stationary_sequence_logprob,
    time_rescale,
    validate,
)


def test_validate_accepts_defaults():
    p = ModelParams(0.5, 1.0, 1.0, 0.5, 0.5)
    assert validate(p) is p
    assert ModelParams(0.9999).lam == 0.9999
    assert ModelParams(0.5, nu=0.0).nu == 0.0


@pytest.mark.parametrize("kw", [
    dict(lam=1.0), dict(lam=1.5), dict(lam=0.0), dict(lam=-0.1),
    dict(lam=0.5, mu=-1.0), dict(lam=0.5, nu=-0.1),
    dict(lam=0.5, pi0=0.6, pi1=0.6), dict(lam=0.5, pi0=-0.1),
    dict(lam=float("nan")), dict(lam=0.5, mu=float("inf")),
])
def test_validate_rejects(kw):
    with pytest.raises(ParamError):
        ModelParams(**kw)


def test_pi1_defaults_to_complement():
    assert ModelParams(0.5, pi0=0.3).pi == pytest.approx((0.3, 0.7))


def test_param_dict_roundtrip(tmp_path):
    p = ModelParams(0.25, 2.0, 0.5, 0.4, 0.6)
    assert ModelParams.from_dict(p.to_dict()) == p
    f = tmp_path / "p.json"
    f.write_text(json.dumps(p.to_dict()))
    assert load_params(f) == p
    with pytest.raises(ParamError):
        ModelParams.from_dict({"lambda": 0.5, "gamma": 1})
    with pytest.raises(ParamError):
        ModelParams.from_dict({"mu": 1})


def test_stationary_pmf_values():
    assert stationary_length_pmf(ModelParams(0.5), 0) == 0.5
    assert stationary_length_pmf(ModelParams(0.5), 3) == 0.0625
    assert stationary_length_pmf(ModelParams(1.0, 2.0), 3) == 0.0625
    assert stationary_length_pmf(ModelParams(0.5), -1) == 0.0


@pytest.mark.parametrize("r", [0.3, 0.5, 0.9, 0.99])
def test_stationary_pmf_normalized(r):
    n = int(math.log(1e-16) / math.log(r)) + 1
    arr = stationary_pmf_array(r, n)
    assert math.fsum(arr) + r ** (n + 1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("r", [0.3, 0.5, 0.9])
def test_mean_length_matches_sum(r):
    n = int(math.log(1e-18) / math.log(r)) + 200
    arr = stationary_pmf_array(r, n)
    assert math.fsum(np.arange(n + 1) * arr) == pytest.approx(stationary_mean_length(r), abs=1e-10)


def test_mean_length_values():
    assert stationary_mean_length(ModelParams(0.5)) == 1.0
    assert stationary_mean_length(ModelParams(0.9)) == pytest.approx(9.0, rel=1e-14)
    means = [stationary_mean_length(ModelParams(r)) for r in (0.9, 0.99, 0.999)]
    assert means == sorted(means)


def test_sequence_logprob_examples():
    p = ModelParams(0.5)
    assert stationary_sequence_logprob(p, Sequence()) == pytest.approx(math.log(0.5))
    assert stationary_sequence_logprob(p, Sequence((0,))) == pytest.approx(math.log(1 / 8))


def test_sequence_logprob_zero_frequency():
    p = ModelParams(0.5, pi0=1.0)
    assert stationary_sequence_logprob(p, Sequence((0, 0))) == pytest.approx(math.log(0.5 * 0.25))
    with pytest.raises(ProbError):
        stationary_sequence_logprob(p, Sequence((0, 1)))


def test_sequence_logprob_normalizes():
    p = ModelParams(0.6, pi0=0.3)
    K = 12
    total = 0.0
    for M in range(K + 1):
        for bits in range(2 ** M):
            digits = tuple((bits >> i) & 1 for i in range(M))
            total += math.exp(stationary_sequence_logprob(p, Sequence(digits)))
    assert total + p.ratio ** (K + 1) == pytest.approx(1.0, abs=1e-12)


def test_sequence_validation():
    s = Sequence((1, 0, 1), (2, 0, 2))
    assert len(s) == 3 and str(s) == "101"
    assert s.lineage_counts() == {2: 2, 0: 1}
    with pytest.raises(ValueError):
        Sequence((2,))
    with pytest.raises(ValueError):
        Sequence((1, 0), (1,))
    with pytest.raises(ValueError):
        Sequence((1,), (-1,))


def test_star_tree():
    with pytest.raises(ParamError):
        StarTree2(0.0)
    tree = StarTree2(1.5).to_tree()
    assert [leaf.name for leaf in tree.leaves()] == ["1", "2"]
    assert all(leaf.length == 1.5 for leaf in tree.leaves())


def test_newick_parse_and_roundtrip():
    tree = parse_newick("((a:1,b:2.5)x:0.5, c:3e-1);")
    assert [leaf.name for leaf in tree.leaves()] == ["a", "b", "c"]
    lengths = {c.name: c.length for _, c in tree.edges()}
    assert lengths == {"x": 0.5, "a": 1.0, "b": 2.5, "c": 0.3}
    again = parse_newick(tree.to_newick())
    assert again.to_newick() == tree.to_newick()


def test_newick_quoted_labels_and_single_leaf():
    tree = parse_newick("('leaf one':2);")
    assert tree.leaves()[0].name == "leaf one"


@pytest.mark.parametrize("text", [
    "(a:1,b:1)",          # missing semicolon
    "(a,b:1);",           # missing length
    "(a:1,b:0);",         # zero length
    "(a:1,a:1);",         # duplicate label
    "(:1,b:1);",          # unlabelled leaf
    "(a:1,b:1));",        # unbalanced
    "(a:1,b:x);",         # bad number
    "(a:1,b:1); (c:1);",  # two trees
])
def test_newick_errors(text):
    with pytest.raises(ParamError):
        parse_newick(text)


def test_time_rescale_examples():
    p, h = time_rescale(ModelParams(1.0, 2.0, 4.0), 3.0)
    assert (p.lam, p.mu, p.nu, h) == (0.5, 1.0, 2.0, 6.0)
    p1 = ModelParams(0.3)
    q, h = time_rescale(p1, 2.0)
    assert q == p1 and h == 2.0
    tree = parse_newick("(a:1,b:2);")
    _, scaled = time_rescale(ModelParams(1.0, 2.0), tree)
    assert [c.length for _, c in scaled.edges()] == [2.0, 4.0]
    _, star = time_rescale(ModelParams(1.0, 4.0), StarTree2(0.5))
    assert star.h == 2.0


@pytest.mark.parametrize("method", ["dp", "mixture"])
def test_leaf_law_invariant_under_rescaling(method):
    raw = ModelParams(1.8, 2.0)
    unit, t = time_rescale(raw, 0.75)
    a = leaf_length_pmf_given_root(raw, 0.75, 7, True, method=method)
    b = leaf_length_pmf_given_root(unit, t, 7, True, method=method)
    assert a.support_offset == b.support_offset and len(a.masses) == len(b.masses)
    assert np.max(np.abs(a.masses - b.masses)) <= 1e-12


def test_tv_invariant_under_rescaling():
    a = pair_law_tv(ModelParams(1.8, 2.0), 1.0, 0.5)
    b = pair_law_tv(ModelParams(0.9), 2.0, 1.0)
    assert a.tv == pytest.approx(b.tv, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.1, 10.0), st.integers(0, 60))
def test_stationary_pmf_scale_free(r, mu, M):
    assert stationary_length_pmf(ModelParams(r * mu, mu), M) == pytest.approx(
        stationary_length_pmf(ModelParams(r), M), rel=1e-12, abs=1e-300)


def test_rooted_tree_requires_positive_lengths():
    from tkflen.model import Node
    with pytest.raises(ParamError):
        RootedTree(Node(None, None, (Node("a", -1.0),)))
