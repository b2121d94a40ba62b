"""Trigger stamping, direct weight perturbation, and trojan retraining."""

import numpy as np
import pytest

from sensq.attack import (
    PerturbSpec,
    Trigger,
    attack_success_rate,
    stamp_trigger,
    synthetic_perturb,
    top_inflation_indices,
    trojan_retrain,
)
from sensq.data import gen_synthetic
from sensq.errors import DatasetError, DimensionMismatch
from sensq.mlp import Layer, Mlp, forward, forward_batch, random_mlp
from sensq.train import TrainConfig, evaluate, train


class TestStamp:
    def test_empty_trigger_is_identity(self):
        x = np.array([0.2, 0.4, 0.6])
        out = stamp_trigger(x, Trigger((), (), 1))
        assert np.array_equal(out, x)
        assert out is not x  # always a copy

    def test_overwrite_single_index(self):
        x = np.array([0.2, 0.4, 0.6])
        out = stamp_trigger(x, Trigger((0,), (1.0,), 1))
        assert out[0] == 1.0
        assert np.array_equal(out[1:], x[1:])

    def test_idempotent(self):
        x = np.random.default_rng(0).uniform(0, 1, 8)
        trig = Trigger((1, 5), (1.0, 0.0), 1)
        once = stamp_trigger(x, trig)
        assert np.array_equal(stamp_trigger(once, trig), once)

    def test_index_out_of_range(self):
        with pytest.raises(DimensionMismatch):
            stamp_trigger(np.array([0.1, 0.2]), Trigger((5,), (1.0,), 1))

    def test_trigger_validation(self):
        with pytest.raises(DimensionMismatch):
            Trigger((0, 0), (1.0, 1.0), 1)  # duplicate index
        with pytest.raises(DimensionMismatch):
            Trigger((0,), (1.5,), 1)  # value out of range


class TestTopInflationIndices:
    def test_signed_value_ranking_with_ceil(self):
        w = np.array([0.8, 0.5, 0.1, -0.2])
        assert top_inflation_indices(w, 0.3) == [0, 1]  # ceil(1.2) = 2

    def test_tie_breaks_toward_lower_index(self):
        w = np.array([0.5, 0.7, 0.5, 0.5])
        assert top_inflation_indices(w, 0.5) == [0, 1]

    def test_full_fraction_selects_all(self):
        w = np.array([0.3, -0.1, 0.2])
        assert top_inflation_indices(w, 1.0) == [0, 1, 2]


class TestSyntheticPerturb:
    def _stub(self, out_weights):
        return Mlp(
            [
                Layer(np.eye(len(out_weights)), np.zeros(len(out_weights))),
                Layer(np.array([out_weights]), np.array([0.0])),
            ]
        )

    def test_hand_worked_fixed_deltas(self):
        m = self._stub([0.8, 0.5, 0.1, -0.2])
        spec = PerturbSpec(
            inflate_fraction=0.3,
            inflate_range=(0.1, 0.1),
            deflate_range=(-0.02, -0.02),
            seed=0,
        )
        m2, deltas = synthetic_perturb(m, spec)
        np.testing.assert_allclose(
            m2.layers[-1].weights[0], [0.9, 0.6, 0.08, -0.22], atol=1e-15
        )
        assert deltas == {0: 0.1, 1: 0.1, 2: -0.02, 3: -0.02}

    def test_degenerate_ranges_change_only_top_k(self):
        m = self._stub([0.4, 0.9, 0.3])
        spec = PerturbSpec(
            inflate_fraction=0.3, inflate_range=(0.05, 0.05), deflate_range=(0.0, 0.0)
        )
        m2, deltas = synthetic_perturb(m, spec)
        assert deltas[1] == 0.05
        assert deltas[0] == 0.0 and deltas[2] == 0.0
        assert m2.layers[-1].weights[0][1] == 0.9 + 0.05

    def test_sampled_deltas_inside_ranges(self):
        m = self._stub(list(np.random.default_rng(1).uniform(0, 1, 10)))
        spec = PerturbSpec(seed=42)
        _, deltas = synthetic_perturb(m, spec)
        e_idx = set(top_inflation_indices(m.layers[-1].weights[0], 0.3))
        for j, dv in deltas.items():
            if j in e_idx:
                assert 0.05 <= dv <= 0.25
            else:
                assert -0.05 <= dv <= 0.0

    def test_only_output_layer_changes(self):
        m = random_mlp([5, 4, 3, 1], seed=2)
        m2, _ = synthetic_perturb(m, PerturbSpec(seed=3))
        for l1, l2 in zip(m.layers[:-1], m2.layers[:-1]):
            assert np.array_equal(l1.weights, l2.weights)
            assert np.array_equal(l1.bias, l2.bias)
        assert np.array_equal(m.layers[-1].bias, m2.layers[-1].bias)
        assert not np.array_equal(m.layers[-1].weights, m2.layers[-1].weights)


@pytest.fixture(scope="module")
def trained():
    d = gen_synthetic(10, 50, 0.2, seed=7)
    cfg = TrainConfig(architecture=(8, 6, 4, 1), epochs=20, learning_rate=0.2, seed=7)
    return d, train(cfg, d)


class TestTrojanRetrain:
    trigger = Trigger((0, 1), (1.0, 1.0), 1)

    def test_zero_epochs_returns_unchanged(self, trained):
        d, m = trained
        cfg = TrainConfig(architecture=(8, 6, 4, 1), epochs=0, seed=0)
        assert trojan_retrain(m, d, self.trigger, cfg) == m

    def test_zero_stamp_fraction_keeps_clean_accuracy(self, trained):
        d, m = trained
        cfg = TrainConfig(
            architecture=(8, 6, 4, 1), epochs=10, learning_rate=0.1, seed=0
        )
        tuned = trojan_retrain(m, d, self.trigger, cfg, stamp_fraction=0.0)
        assert evaluate(tuned, d).accuracy == 1.0

    def test_trojan_succeeds_and_stays_stealthy(self, trained):
        d, m = trained
        cfg = TrainConfig(
            architecture=(8, 6, 4, 1), epochs=40, learning_rate=0.2, seed=1
        )
        tm = trojan_retrain(m, d, self.trigger, cfg, stamp_fraction=0.5)
        assert tm.same_architecture(m)
        assert evaluate(tm, d).accuracy >= 0.95
        assert attack_success_rate(tm, d, self.trigger) >= 0.90

    def test_stealth_gap_between_clean_and_stamped(self, trained):
        # deviation vs the clean model should be an order of magnitude
        # larger on trigger-stamped flips than on clean traffic
        d, m = trained
        cfg = TrainConfig(
            architecture=(8, 6, 4, 1), epochs=40, learning_rate=0.2, seed=2
        )
        tm = trojan_retrain(m, d, self.trigger, cfg, stamp_fraction=0.5)
        clean = d.features
        flips = np.array(
            [stamp_trigger(x, self.trigger) for x in d.features[d.labels == 0]]
        )

        def mean_dev(points):
            p1 = [forward(m, x).probability for x in points]
            p2 = [forward(tm, x).probability for x in points]
            return float(np.mean(np.abs(np.array(p1) - np.array(p2))))

        assert mean_dev(flips) > 10 * mean_dev(clean)

    def test_deterministic(self, trained):
        d, m = trained
        cfg = TrainConfig(architecture=(8, 6, 4, 1), epochs=5, seed=3)
        a = trojan_retrain(m, d, self.trigger, cfg)
        b = trojan_retrain(m, d, self.trigger, cfg)
        assert a == b


class TestAttackSuccessRate:
    def test_constant_target_predictor(self, trained):
        d, _ = trained
        always_one = Mlp([Layer(np.zeros((1, 10)), np.array([3.0]))])
        assert attack_success_rate(always_one, d, Trigger((0,), (1.0,), 1)) == 1.0

    def test_clean_model_scores_low(self, trained):
        d, m = trained
        # the clean model only predicts the target on samples already there
        rate = attack_success_rate(m, d, Trigger((0, 1), (1.0, 1.0), 1))
        assert rate < 0.75

    def test_empty_dataset_rejected(self, trained):
        _, m = trained
        from sensq.data import Dataset

        empty = Dataset(np.zeros((0, 10)), np.zeros(0, int))
        with pytest.raises(DatasetError):
            attack_success_rate(m, empty, Trigger((0,), (1.0,), 1))
