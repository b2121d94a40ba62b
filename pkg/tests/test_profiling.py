"""Decision-bias profiling and fix-plan bookkeeping."""

import numpy as np
import pytest

from sensq.data import Dataset, gen_synthetic
from sensq.errors import DatasetError, EncodingError
from sensq.mlp import Layer, Mlp, forward, random_mlp
from sensq.profiling import (
    DBiasProfile,
    Direction,
    FixPlan,
    NodeProfile,
    NodeStatus,
    compute_dbias,
    fix_order,
    initial_fixplan,
)


def brute_counts(m, d):
    """Independent recount from per-sample forward traces."""
    counts = {n: [0, 0] for n in m.hidden_node_ids()}
    for x in d.features:
        t = forward(m, x)
        for l, z in enumerate(t.pre_activations, start=1):
            for i, v in enumerate(z):
                counts[(l, i)][0 if v >= 0 else 1] += 1
    return counts


class TestComputeDbias:
    def test_counts_match_brute_force_recount(self):
        m = random_mlp([6, 5, 4, 1], seed=20)
        d = gen_synthetic(6, 40, 0.2, seed=21)
        profile = compute_dbias(m, d)
        expected = brute_counts(m, d)
        for p in profile.nodes:
            assert (p.n_identity, p.n_zero) == tuple(expected[p.node])
            assert p.n_identity + p.n_zero == len(d)

    def test_dbias_in_half_one_interval(self):
        for seed in range(5):
            m = random_mlp([4, 6, 3, 1], seed=seed)
            d = gen_synthetic(4, 30, 0.2, seed=seed + 50)
            for p in compute_dbias(m, d).nodes:
                assert 0.5 <= p.d_bias <= 1.0

    def test_unanimous_identity(self):
        m = Mlp(
            [
                Layer(np.array([[1.0, 1.0]]), np.array([0.5])),  # always positive
                Layer(np.array([[1.0]]), np.array([0.0])),
            ]
        )
        feats = np.random.default_rng(0).uniform(0, 1, (10, 2))
        d = Dataset(feats, np.array([0, 1] * 5))
        p = compute_dbias(m, d).nodes[0]
        assert (p.n_identity, p.n_zero) == (10, 0)
        assert p.direction is Direction.IDENTITY
        assert p.d_bias == 1.0

    def test_tie_resolves_to_identity(self):
        p = NodeProfile((1, 0), 5, 5)
        assert p.d_bias == 0.5
        assert p.direction is Direction.IDENTITY

    def test_majority_zero(self):
        p = NodeProfile((1, 0), 3, 7)
        assert p.direction is Direction.ZERO
        assert p.d_bias == 0.7

    def test_empty_dataset_rejected(self):
        m = random_mlp([3, 2, 1], seed=1)
        with pytest.raises(DatasetError):
            compute_dbias(m, Dataset(np.zeros((0, 3)), np.zeros(0, int)))

    def test_counts_additive_over_partitions(self):
        # profiles of disjoint halves sum to the whole-set profile
        m = random_mlp([5, 4, 1], seed=2)
        d = gen_synthetic(5, 30, 0.2, seed=3)
        half1, half2 = d.subset(np.arange(30)), d.subset(np.arange(30, 60))
        whole = compute_dbias(m, d)
        p1, p2 = compute_dbias(m, half1), compute_dbias(m, half2)
        for w, a, b in zip(whole.nodes, p1.nodes, p2.nodes):
            assert w.n_identity == a.n_identity + b.n_identity


class TestFixOrder:
    def _profile(self, biases):
        # build a profile over 10 observations per node
        nodes = tuple(
            NodeProfile((1, i), round(b * 10), 10 - round(b * 10))
            for i, b in enumerate(biases)
        )
        return DBiasProfile(nodes)

    def test_sorted_by_increasing_bias(self):
        p = self._profile([0.9, 0.6, 0.8])
        assert fix_order(p) == [(1, 1), (1, 2), (1, 0)]

    def test_equal_biases_fall_back_to_node_order(self):
        p = self._profile([0.7, 0.7, 0.7])
        assert fix_order(p) == [(1, 0), (1, 1), (1, 2)]

    def test_singleton(self):
        p = self._profile([0.8])
        assert fix_order(p) == [(1, 0)]

    def test_order_is_permutation_and_stable(self):
        m = random_mlp([4, 5, 3, 1], seed=4)
        d = gen_synthetic(4, 25, 0.2, seed=5)
        profile = compute_dbias(m, d)
        order = fix_order(profile)
        assert sorted(order) == m.hidden_node_ids()
        assert order == fix_order(compute_dbias(m, d))
        biases = [profile[n].d_bias for n in order]
        assert biases == sorted(biases)


class TestFixPlan:
    def test_initial_plan_mirrors_directions(self):
        m = random_mlp([4, 4, 2, 1], seed=6)
        d = gen_synthetic(4, 20, 0.2, seed=7)
        profile = compute_dbias(m, d)
        plan = initial_fixplan(profile)
        assert plan.n_free == 0
        for p in profile.nodes:
            want = (
                NodeStatus.FIXED_IDENTITY
                if p.direction is Direction.IDENTITY
                else NodeStatus.FIXED_ZERO
            )
            assert plan.status(p.node) is want

    def test_unfixing_everything_frees_all(self):
        m = random_mlp([3, 3, 2, 1], seed=8)
        d = gen_synthetic(3, 15, 0.2, seed=9)
        profile = compute_dbias(m, d)
        plan = initial_fixplan(profile)
        for node in fix_order(profile):
            plan = plan.unfix(node)
        assert plan.n_free == len(m.hidden_node_ids())
        assert plan == FixPlan.all_free(m)

    def test_unfix_unknown_node(self):
        m = random_mlp([3, 2, 1], seed=10)
        with pytest.raises(EncodingError):
            FixPlan.all_free(m).unfix((9, 9))

    def test_digest_and_coverage(self):
        m = random_mlp([3, 2, 1], seed=11)
        plan = FixPlan.all_free(m)
        assert plan.digest() == "FF"
        plan.check_covers(m)
        bigger = random_mlp([3, 4, 1], seed=12)
        with pytest.raises(EncodingError):
            plan.check_covers(bigger)
