import math

import numpy as np
import pytest

from tkflen.analytics import immortal_progeny_pmf, leaf_length_pmf_given_root, stationary_law
from tkflen.exceptions import CapExceeded
from tkflen.laws import DiscreteLaw, tv_distance
from tkflen.model import ModelParams, Sequence, StarTree2, parse_newick
from tkflen.simulate import (
    LengthPair,
    SimConfig,
    evolve_length,
    evolve_lengths,
    evolve_sequence,
    evolve_sequences,
    fasta_text,
    length_table_csv,
    make_rng,
    pairs_csv,
    sample_leaf_pairs,
    sample_root_stationary,
    simulate_progeny,
    simulate_tree,
    simulate_trees,
)


def empirical(x) -> DiscreteLaw:
    counts = np.bincount(np.asarray(x))
    return DiscreteLaw(0, counts / counts.sum())


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(max_length_cap=0)
    with pytest.raises(ValueError):
        SimConfig(seed=-1)
    with pytest.raises(ValueError):
        LengthPair(-1, 0)


def test_rng_streams_differ():
    a = make_rng(1, 0, 0).random(4)
    assert np.array_equal(a, make_rng(1, 0, 0).random(4))
    assert not np.array_equal(a, make_rng(1, 1, 0).random(4))
    assert not np.array_equal(a, make_rng(1, 0, 1).random(4))
    assert not np.array_equal(a, make_rng(2, 0, 0).random(4))


def test_zero_time_is_identity(cfg):
    p = ModelParams(0.5, nu=1.0)
    seq = Sequence((0, 1, 1), (1, 2, 3))
    assert evolve_sequence(p, seq, 0.0, cfg) == seq
    assert evolve_length(p, 7, 0.0, cfg) == 7


def test_negative_inputs(cfg):
    with pytest.raises(ValueError):
        evolve_length(ModelParams(0.5), -1, 1.0, cfg)
    with pytest.raises(ValueError):
        evolve_sequence(ModelParams(0.5), Sequence(), -1.0, cfg)


def test_cap_exceeded():
    cfg = SimConfig(seed=3, max_length_cap=5)
    with pytest.raises(CapExceeded):
        evolve_lengths(ModelParams(0.99), 5, 50.0, 100, cfg)
    with pytest.raises(CapExceeded):
        evolve_sequence(ModelParams(0.99), Sequence((0,) * 5), 50.0, cfg)


def test_lineage_conservation(cfg):
    p = ModelParams(0.8, nu=0.5)
    root = Sequence((0, 1, 0, 1), (1, 2, 3, 4))
    for rep in range(50):
        out = evolve_sequence(p, root, 2.0, SimConfig(seed=rep))
        assert set(out.lineage) <= {0, 1, 2, 3, 4}
        assert len(out.digits) == len(out.lineage)


def test_substitutions_follow_pi(cfg):
    # indels are negligibly slow, so every site is resubstituted many times
    p = ModelParams(1e-9, 2e-9, nu=5.0, pi0=0.2)
    out = evolve_sequence(p, Sequence((0,) * 4000), 5.0, cfg)
    assert len(out) == 4000
    frac = sum(out.digits) / len(out)
    assert abs(frac - 0.8) < 3 * math.sqrt(0.16 / len(out)) + 1e-3


def test_length_chain_matches_exact_law():
    p = ModelParams(0.9)
    x = evolve_lengths(p, 10, 1.0, 1_000_000, SimConfig(seed=11))
    exact = leaf_length_pmf_given_root(p, 1.0, 10, include_immortal=True)
    assert tv_distance(empirical(x), exact).tv <= 0.005


def test_progeny_simulation_matches_laws():
    p = ModelParams(0.8)
    mortal = simulate_progeny(p, 1.0, 200_000, SimConfig(seed=5))
    exact = leaf_length_pmf_given_root(p, 1.0, 1)
    assert tv_distance(empirical(mortal), exact).tv <= 0.01
    imm = simulate_progeny(p, 1.0, 200_000, SimConfig(seed=6), immortal=True)
    assert tv_distance(empirical(imm), immortal_progeny_pmf(p, 1.0)).tv <= 0.01


@pytest.mark.slow
def test_immortal_lineage_count_matches_law():
    p = ModelParams(0.8)
    n = 1_000_000
    x = evolve_sequences(p, 0, 1.0, n, SimConfig(seed=21), lineage=0)
    law = immortal_progeny_pmf(p, 1.0)
    assert tv_distance(empirical(x), law).tv <= 0.01
    p0 = law.pmf(0)
    assert abs(np.mean(x == 0) - p0) <= 3 * math.sqrt(p0 * (1 - p0) / n)


def test_full_sequence_lengths_match_length_chain():
    p = ModelParams(0.9, nu=0.3)
    a = evolve_sequences(p, 10, 1.0, 100_000, SimConfig(seed=8))
    exact = leaf_length_pmf_given_root(p, 1.0, 10, include_immortal=True)
    assert tv_distance(empirical(a), exact).tv <= 0.015


def test_root_sampler():
    p = ModelParams(0.5, pi0=0.3)
    n = 100_000
    rng = make_rng(17)
    roots = [sample_root_stationary(p, rng=rng) for _ in range(n)]
    lengths = np.array([len(r) for r in roots])
    assert abs(lengths.mean() - 1.0) <= 3 * math.sqrt(2.0 / n)
    assert abs(np.mean(lengths == 0) - 0.5) <= 3 * math.sqrt(0.25 / n)
    digits = np.concatenate([r.digits for r in roots if len(r)])
    assert abs(digits.mean() - 0.7) <= 3 * math.sqrt(0.21 / len(digits))
    assert all(r.lineage == tuple(range(1, len(r) + 1)) for r in roots[:100])


def test_leaf_pairs_marginal_and_slope():
    p, star = ModelParams(0.5), StarTree2(1.0)
    X = sample_leaf_pairs(p, star, 1_000_000, SimConfig(seed=31))
    assert X.shape == (1_000_000, 2)
    assert tv_distance(empirical(X[:, 0]), stationary_law(p)).tv <= 0.01
    x1, x2 = X[:, 0].astype(float), X[:, 1].astype(float)
    d = x1 - x1.mean()
    slope = d @ (x2 - x2.mean()) / (d @ d)
    resid = x2 - x2.mean() - slope * d
    se = math.sqrt(resid @ resid / (len(X) - 2) / (d @ d))
    assert abs(slope - math.exp(-2 * star.h * (1 - p.ratio))) <= 3 * se


def test_tiny_height_pairs_equal():
    X = sample_leaf_pairs(ModelParams(0.5), StarTree2(1e-6), 100_000, SimConfig(seed=2))
    assert np.mean(X[:, 0] == X[:, 1]) >= 0.999


def test_leaf_pairs_requires_count():
    with pytest.raises(ValueError):
        sample_leaf_pairs(ModelParams(0.5), StarTree2(1.0), 0)


def test_determinism_across_threads():
    p, star = ModelParams(0.7), StarTree2(0.5)
    a = sample_leaf_pairs(p, star, 30_000, SimConfig(seed=4, threads=1))
    b = sample_leaf_pairs(p, star, 30_000, SimConfig(seed=4, threads=3))
    c = sample_leaf_pairs(p, star, 30_000, SimConfig(seed=5, threads=1))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    tree = parse_newick("((a:0.3,b:0.4):0.2,c:0.6);")
    r1 = simulate_trees(p, tree, 20, SimConfig(seed=9, threads=1))
    r2 = simulate_trees(p, tree, 20, SimConfig(seed=9, threads=2))
    assert r1 == r2


def test_star_tree_matches_pair_sampler():
    p, star = ModelParams(0.5), StarTree2(1.0)
    n = 100_000
    reps = simulate_trees(p, star.to_tree(), n, SimConfig(seed=41))
    A = np.array([[len(r["1"]), len(r["2"])] for r in reps])
    B = sample_leaf_pairs(p, star, n, SimConfig(seed=42))
    hi = int(max(A.max(), B.max())) + 1
    ca = np.bincount(A[:, 0] * hi + A[:, 1], minlength=hi * hi) / n
    cb = np.bincount(B[:, 0] * hi + B[:, 1], minlength=hi * hi) / n
    assert 0.5 * np.abs(ca - cb).sum() <= 0.01


def test_single_leaf_mixes_to_stationary():
    p = ModelParams(0.5)
    reps = simulate_trees(p, parse_newick("(a:200);"), 10_000, SimConfig(seed=51))
    lengths = [len(r["a"]) for r in reps]
    assert tv_distance(empirical(lengths), stationary_law(p)).tv <= 0.02


def test_tree_outputs(cfg):
    p = ModelParams(0.6)
    tree = parse_newick("((a:0.3,b:0.4):0.2,c:0.6);")
    assert simulate_trees(p, tree, 0, cfg) == []
    one = simulate_tree(p, tree, cfg)
    assert list(one) == ["a", "b", "c"]
    reps = [one, one]
    fasta = fasta_text(reps)
    assert fasta.splitlines()[0] == ">0|a" and fasta.count(">") == 6
    table = length_table_csv(reps)
    assert table.splitlines()[0] == "replicate,leaf,length" and len(table.splitlines()) == 7
    assert pairs_csv(np.array([[3, 4]])) == "replicate,leaf,length\n0,1,3\n0,2,4\n"
