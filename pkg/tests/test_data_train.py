"""Dataset generation, CSV round-trips, training, and gradient checks."""

import numpy as np
import pytest

from sensq.data import Dataset, gen_synthetic, load_csv, save_csv
from sensq.errors import DatasetError, TrainingError
from sensq.mlp import Layer, Mlp, random_mlp
from sensq.train import TrainConfig, evaluate, loss_and_grads, train


class TestGenSynthetic:
    def test_deterministic_per_seed(self):
        a = gen_synthetic(4, 50, 0.2, seed=7)
        b = gen_synthetic(4, 50, 0.2, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        c = gen_synthetic(4, 50, 0.2, seed=8)
        assert not np.array_equal(a.features, c.features)

    def test_least_squares_separates_perfectly(self):
        d = gen_synthetic(6, 80, 0.2, seed=3)
        # independent check: fit labels with plain least squares and thresh
        X = np.hstack([d.features, np.ones((len(d), 1))])
        coef, *_ = np.linalg.lstsq(X, d.labels.astype(float), rcond=None)
        preds = (X @ coef >= 0.5).astype(int)
        assert np.array_equal(preds, d.labels)

    def test_single_sample_per_class(self):
        d = gen_synthetic(3, 1, 0.3, seed=0)
        assert len(d) == 2
        assert sorted(d.labels.tolist()) == [0, 1]

    def test_margin_validation(self):
        for margin in (0.0, 0.5, -0.1, 0.7):
            with pytest.raises(DatasetError):
                gen_synthetic(4, 10, margin, seed=0)

    def test_features_inside_unit_box(self):
        d = gen_synthetic(5, 200, 0.45, seed=1)
        assert d.features.min() >= 0.0 and d.features.max() <= 1.0

    def test_per_coordinate_margin(self):
        d = gen_synthetic(4, 100, 0.2, seed=2)
        lo = d.features[d.labels == 1].min()
        hi = d.features[d.labels == 0].max()
        assert lo - hi >= 0.2 - 1e-12


class TestCsv:
    def test_roundtrip_is_exact(self, tmp_path):
        d = gen_synthetic(5, 30, 0.2, seed=4)
        path = tmp_path / "d.csv"
        save_csv(d, path)
        loaded = load_csv(path)
        assert np.array_equal(loaded.features, d.features)
        assert np.array_equal(loaded.labels, d.labels)

    def test_two_row_file(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("f0,f1,label\n0.25,0.5,0\n1.0,0.0,1\n")
        d = load_csv(path)
        assert len(d) == 2
        assert d.features[1, 0] == 1.0

    def test_out_of_range_feature_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,label\n0.2,0.3,0\n1.5,0.1,1\n")
        with pytest.raises(DatasetError, match=":3"):
            load_csv(path)

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,label\n0.2,0.3,2\n")
        with pytest.raises(DatasetError, match=":2"):
            load_csv(path)

    def test_header_must_match(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n0.2,0.3,0\n")
        with pytest.raises(DatasetError, match="header"):
            load_csv(path)


class TestTrain:
    def test_separable_data_reaches_full_accuracy(self):
        d = gen_synthetic(8, 40, 0.2, seed=5)
        m = train(TrainConfig(architecture=(8, 6, 4, 1), epochs=25, seed=5), d)
        metrics = evaluate(m, d)
        assert metrics.accuracy == 1.0
        assert metrics.precision == 1.0 and metrics.recall == 1.0

    def test_deterministic_per_seed(self):
        d = gen_synthetic(5, 20, 0.2, seed=6)
        cfg = TrainConfig(architecture=(4, 1), epochs=10, seed=9)
        assert train(cfg, d) == train(cfg, d)

    def test_single_class_rejected(self):
        feats = np.random.default_rng(0).uniform(0, 1, (10, 3))
        d = Dataset(feats, np.zeros(10, int))
        with pytest.raises(TrainingError, match="both labels"):
            train(TrainConfig(architecture=(3, 1)), d)

    def test_divergence_reported(self):
        d = gen_synthetic(4, 20, 0.2, seed=7)
        cfg = TrainConfig(architecture=(6, 1), epochs=200, learning_rate=1e300, seed=0)
        with pytest.raises(TrainingError, match="learning rate"):
            with np.errstate(over="ignore", invalid="ignore"):
                train(cfg, d)

    def test_nonneg_initialization_regime(self):
        # trained weights should stay in the low-magnitude regime the
        # attack delta ranges assume
        d = gen_synthetic(6, 40, 0.2, seed=8)
        m = train(TrainConfig(architecture=(6, 4, 1), epochs=20, seed=8), d)
        assert all(np.abs(l.weights).max() < 3.0 for l in m.layers)

    def test_config_validation(self):
        with pytest.raises(TrainingError):
            TrainConfig(architecture=(4, 2))  # last width must be 1
        with pytest.raises(TrainingError):
            TrainConfig(architecture=(0, 1))
        with pytest.raises(TrainingError):
            TrainConfig(architecture=(4, 1), learning_rate=0.0)


class TestGradients:
    def test_gradients_match_central_differences(self):
        rng = np.random.default_rng(10)
        for arch in ((3, 1), (4, 3, 1), (5, 4, 2, 1)):
            m = random_mlp([4, *arch], seed=11)
            X = rng.uniform(0, 1, (8, 4))
            y = rng.integers(0, 2, 8)
            _, grads = loss_and_grads(m, X, y)
            h = 1e-6
            for li, layer in enumerate(m.layers):
                gw, gb = grads[li]
                for (r, c) in [(0, 0), (layer.weights.shape[0] - 1, layer.weights.shape[1] - 1)]:
                    num = _central_diff_weight(m, X, y, li, r, c, h)
                    denom = max(abs(num), abs(gw[r, c]), 1e-8)
                    assert abs(num - gw[r, c]) / denom < 1e-4
                num_b = _central_diff_bias(m, X, y, li, 0, h)
                denom = max(abs(num_b), abs(gb[0]), 1e-8)
                assert abs(num_b - gb[0]) / denom < 1e-4


def _perturbed(m, li, r, c, eps, bias=False):
    layers = [Layer(l.weights.copy(), l.bias.copy()) for l in m.layers]
    if bias:
        layers[li].bias[r] += eps
    else:
        layers[li].weights[r, c] += eps
    return Mlp(layers)


def _central_diff_weight(m, X, y, li, r, c, h):
    lo, _ = loss_and_grads(_perturbed(m, li, r, c, -h), X, y)
    hi, _ = loss_and_grads(_perturbed(m, li, r, c, +h), X, y)
    return (hi - lo) / (2 * h)


def _central_diff_bias(m, X, y, li, r, h):
    lo, _ = loss_and_grads(_perturbed(m, li, r, 0, -h, bias=True), X, y)
    hi, _ = loss_and_grads(_perturbed(m, li, r, 0, +h, bias=True), X, y)
    return (hi - lo) / (2 * h)


class TestEvaluate:
    def test_constant_zero_predictor(self):
        d = gen_synthetic(4, 25, 0.2, seed=12)
        m = Mlp([Layer(np.zeros((1, 4)), np.array([-5.0]))])
        metrics = evaluate(m, d)
        assert metrics.accuracy == 0.5
        assert metrics.recall == 0.0
        assert metrics.precision == 1.0  # no positive predictions

    def test_constant_one_predictor(self):
        d = gen_synthetic(4, 25, 0.2, seed=13)
        m = Mlp([Layer(np.zeros((1, 4)), np.array([5.0]))])
        metrics = evaluate(m, d)
        assert metrics.accuracy == 0.5
        assert metrics.recall == 1.0
        assert metrics.precision == 0.5
