"""Classifier internals: activations, losses, gradients, training, metrics."""
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from faasplan.errors import DegenerateDataset, DimensionMismatch
from faasplan.model import ContainerConfig, ReplicaClassMap
from faasplan.predictor import (
    FeatureVector,
    PredictionModel,
    TrainingConfig,
    TrainingSample,
    evaluate,
    forward,
    loss,
    loss_gradients,
    model_from_dict,
    model_to_dict,
    predict_replicas,
    softmax,
    relu,
    train,
)


def onehot(index, n):
    v = np.zeros(n)
    v[index] = 1.0
    return v


def tiny_model(seed=0, sizes=(3, 4, 3), loss_kind="cce"):
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0, 0.7, (a, b)) for a, b in zip(sizes, sizes[1:])]
    biases = [rng.normal(0, 0.3, b) for b in sizes[1:]]
    return PredictionModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        class_map=ReplicaClassMap(tuple(range(5, 5 * (sizes[-1] + 1), 5))),
        feature_mean=np.zeros(sizes[0]),
        feature_std=np.ones(sizes[0]),
        loss_kind=loss_kind,
    )


def fd_gradients(model, samples, step=1e-5):
    """Central finite differences of the mean loss, the slow honest way."""
    n = len(model.class_map)

    def mean_loss():
        total = 0.0
        for s in samples:
            p = forward(model, s.features)
            total += loss(model.loss_kind, p, onehot(s.label, n))
        return total / len(samples)

    grads_w, grads_b = [], []
    for arrays, grads in ((model.weights, grads_w), (model.biases, grads_b)):
        for arr in arrays:
            grad = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + step
                hi = mean_loss()
                arr[idx] = orig - step
                lo = mean_loss()
                arr[idx] = orig
                grad[idx] = (hi - lo) / (2 * step)
                it.iternext()
            grads.append(grad)
    return grads_w, grads_b


class TestActivations:
    def test_relu(self):
        assert relu(-3.2) == 0.0
        assert relu(0.0) == 0.0
        assert relu(7.5) == 7.5

    def test_softmax_uniform_on_equal_logits(self):
        np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-12)

    def test_softmax_example_vector(self):
        p = softmax([-0.62, 8.12, 2.53])
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.all(p > 0)
        assert p.argmax() == 1
        assert p[1] > 0.99

    def test_softmax_extreme_logits_stay_finite(self):
        p = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0)
        assert p[1] == pytest.approx(0.0, abs=1e-12)

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(-100, 100))
    def test_softmax_shift_invariance(self, logits, shift):
        base = softmax(logits)
        shifted = softmax([q + shift for q in logits])
        assert abs(base.sum() - 1.0) < 1e-9
        np.testing.assert_allclose(base, shifted, atol=1e-9)


class TestForward:
    def test_zero_weight_model_is_uniform(self):
        model = tiny_model()
        for w in model.weights:
            w[:] = 0.0
        for b in model.biases:
            b[:] = 0.0
        p = forward(model, FeatureVector(512, 1.0, 10.0))
        np.testing.assert_allclose(p, [1 / 3] * 3, atol=1e-12)

    def test_hand_computed_two_affine_maps(self):
        w1 = np.array([[0.1, -0.2], [0.3, 0.4], [-0.5, 0.6]])
        b1 = np.array([0.05, -0.05])
        w2 = np.array([[1.0, -1.0], [0.5, 0.25]])
        b2 = np.array([0.1, 0.2])
        model = PredictionModel(
            layer_sizes=(3, 2, 2),
            weights=[w1, w2],
            biases=[b1, b2],
            class_map=ReplicaClassMap((5, 10)),
            feature_mean=np.zeros(3),
            feature_std=np.ones(3),
        )
        # scalar arithmetic, no numpy
        h = [
            max(0.0, 1 * 0.1 + 2 * 0.3 + 3 * -0.5 + 0.05),
            max(0.0, 1 * -0.2 + 2 * 0.4 + 3 * 0.6 - 0.05),
        ]
        z = [
            h[0] * 1.0 + h[1] * 0.5 + 0.1,
            h[0] * -1.0 + h[1] * 0.25 + 0.2,
        ]
        m = max(z)
        e = [math.exp(v - m) for v in z]
        expected = [v / sum(e) for v in e]
        got = forward(model, FeatureVector(1.0, 2.0, 3.0))
        np.testing.assert_allclose(got, expected, rtol=1e-12)

    def test_output_sums_to_one(self):
        model = tiny_model(seed=3)
        p = forward(model, FeatureVector(2048, 2.0, 33.0))
        assert abs(p.sum() - 1.0) < 1e-9

    def test_malformed_model_rejected(self):
        model = tiny_model()
        model.weights[0] = model.weights[0][:, :2]
        with pytest.raises(DimensionMismatch):
            forward(model, FeatureVector(1, 1, 1))

    def test_wrong_final_width_rejected(self):
        model = tiny_model()
        model.class_map = ReplicaClassMap((5, 10))
        with pytest.raises(DimensionMismatch):
            forward(model, FeatureVector(1, 1, 1))


class TestLoss:
    def test_cce_perfect_prediction(self):
        assert loss("cce", [0.0, 1.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-9)

    def test_cce_even_split_is_ln2(self):
        assert loss("cce", [0.5, 0.5], [1.0, 0.0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_klde_identical_distributions(self):
        assert loss("klde", [0.0, 1.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-9)

    def test_klde_equals_cce_for_onehot_targets(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = rng.dirichlet(np.ones(4))
            t = onehot(rng.integers(4), 4)
            assert loss("klde", p, t) == pytest.approx(loss("cce", p, t), rel=1e-12)

    def test_psse_is_cce_plus_probability_mass(self):
        p = [0.5, 0.5]
        t = [1.0, 0.0]
        assert loss("psse", p, t) == pytest.approx(1.0 + math.log(2), rel=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            loss("mse", [1.0], [1.0])


class TestGradients:
    @pytest.mark.parametrize("kind", ["cce", "klde", "psse"])
    def test_backprop_matches_finite_differences(self, kind):
        for seed in (0, 1, 2):
            model = tiny_model(seed=seed, loss_kind=kind)
            rng = np.random.default_rng(seed + 100)
            samples = [
                TrainingSample(FeatureVector(*rng.normal(0, 1, 3)), int(rng.integers(3)))
                for _ in range(6)
            ]
            aw, ab = loss_gradients(model, samples)
            fw, fb = fd_gradients(model, samples)
            for analytic, fd in zip(aw + ab, fw + fb):
                np.testing.assert_allclose(
                    analytic, fd, rtol=1e-4, atol=1e-8,
                    err_msg=f"gradient mismatch for {kind} seed {seed}",
                )


def separable_samples(n_per_class=40, seed=0):
    """Two rate clusters far apart; a linear boundary separates them."""
    rng = np.random.default_rng(seed)
    samples = []
    for label, center in ((0, 5.0), (1, 40.0)):
        for _ in range(n_per_class):
            samples.append(
                TrainingSample(
                    FeatureVector(
                        mem_mb=float(rng.choice([512, 1024])),
                        cpus=float(rng.choice([1.0, 2.0])),
                        request_rate=center + rng.normal(0, 1.5),
                    ),
                    label,
                )
            )
    return samples


class TestTrain:
    def test_separable_set_reaches_high_accuracy(self):
        hyper = TrainingConfig(
            hidden_sizes=(16,), epochs=200, learning_rate=0.1,
            class_map=ReplicaClassMap((5, 10)), seed=1,
        )
        _, history = train(separable_samples(), hyper)
        assert history[-1].accuracy >= 0.99

    def test_loss_decreases_endpoint_to_endpoint(self):
        hyper = TrainingConfig(
            hidden_sizes=(16,), epochs=150, learning_rate=1e-3,
            class_map=ReplicaClassMap((5, 10)), seed=2,
        )
        _, history = train(separable_samples(seed=3), hyper)
        assert history[-1].loss <= history[0].loss

    def test_deterministic_for_fixed_seed(self):
        hyper = TrainingConfig(
            hidden_sizes=(8,), epochs=20, class_map=ReplicaClassMap((5, 10)), seed=7,
        )
        m1, h1 = train(separable_samples(seed=5), hyper)
        m2, h2 = train(separable_samples(seed=5), hyper)
        for a, b in zip(m1.weights + m1.biases, m2.weights + m2.biases):
            assert np.array_equal(a, b)
        assert h1 == h2

    def test_single_label_rejected(self):
        samples = [TrainingSample(FeatureVector(512, 1, r), 0) for r in range(10)]
        with pytest.raises(DegenerateDataset):
            train(samples, TrainingConfig(class_map=ReplicaClassMap((5, 10))))

    def test_label_outside_class_map_rejected(self):
        samples = [
            TrainingSample(FeatureVector(512, 1, 1.0), 0),
            TrainingSample(FeatureVector(512, 1, 2.0), 5),
        ]
        with pytest.raises(ValueError):
            train(samples, TrainingConfig(class_map=ReplicaClassMap((5, 10))))

    def test_history_covers_every_epoch(self):
        hyper = TrainingConfig(
            hidden_sizes=(8,), epochs=12, class_map=ReplicaClassMap((5, 10)), seed=0,
        )
        _, history = train(separable_samples(seed=2, n_per_class=20), hyper)
        assert [h.epoch for h in history] == list(range(12))


def sign_model(n_classes=2):
    """Predicts class 1 when request_rate > 0, class 0 otherwise."""
    w = np.zeros((3, n_classes))
    w[2, 0] = -1.0
    w[2, 1] = 1.0
    return PredictionModel(
        layer_sizes=(3, n_classes),
        weights=[w],
        biases=[np.zeros(n_classes)],
        class_map=ReplicaClassMap(tuple(range(5, 5 * n_classes + 1, 5))),
        feature_mean=np.zeros(3),
        feature_std=np.ones(3),
    )


class TestPredictReplicas:
    def test_uniform_output_breaks_tie_to_smallest(self):
        model = tiny_model(sizes=(3, 4, 6))
        for w in model.weights:
            w[:] = 0.0
        for b in model.biases:
            b[:] = 0.0
        model.class_map = ReplicaClassMap()
        assert predict_replicas(model, ContainerConfig(512, 1.0), 10.0) == 5

    def test_forced_class_index_maps_to_count(self):
        model = tiny_model(sizes=(3, 4, 6))
        for w in model.weights:
            w[:] = 0.0
        model.biases[0][:] = 0.0
        model.biases[-1][:] = 0.0
        model.biases[-1][2] = 5.0
        model.class_map = ReplicaClassMap()
        assert predict_replicas(model, ContainerConfig(512, 1.0), 10.0) == 15

    def test_argmax_invariant_under_monotone_logit_transform(self):
        model = tiny_model(seed=9, sizes=(3, 8, 4))
        scaled = tiny_model(seed=9, sizes=(3, 8, 4))
        scaled.weights[-1] = scaled.weights[-1] * 3.0
        scaled.biases[-1] = scaled.biases[-1] * 3.0 + 2.5
        rng = np.random.default_rng(0)
        for _ in range(25):
            c = ContainerConfig(int(rng.choice([512, 2048])), float(rng.choice([1, 4])))
            rate = float(rng.uniform(1, 50))
            assert predict_replicas(model, c, rate) == predict_replicas(scaled, c, rate)


class TestEvaluate:
    def test_all_correct(self):
        model = sign_model()
        samples = [
            TrainingSample(FeatureVector(512, 1.0, -1.0), 0),
            TrainingSample(FeatureVector(512, 1.0, 1.0), 1),
        ]
        report = evaluate(model, samples)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0

    def test_always_wrong_fixed_class(self):
        model = sign_model()
        samples = [TrainingSample(FeatureVector(512, 1.0, -1.0), 1) for _ in range(4)]
        report = evaluate(model, samples)
        assert report.accuracy == 0.0
        assert report.macro_f1 == 0.0

    def test_hand_computed_confusion_matrix(self):
        # confusion [[2,1],[1,2]]: per-class precision 2/3, macro F1 2/3
        model = sign_model()
        samples = [
            TrainingSample(FeatureVector(512, 1.0, -1.0), 0),
            TrainingSample(FeatureVector(512, 1.0, -1.0), 0),
            TrainingSample(FeatureVector(512, 1.0, 1.0), 0),
            TrainingSample(FeatureVector(512, 1.0, -1.0), 1),
            TrainingSample(FeatureVector(512, 1.0, 1.0), 1),
            TrainingSample(FeatureVector(512, 1.0, 1.0), 1),
        ]
        report = evaluate(model, samples)
        assert report.accuracy == pytest.approx(4 / 6)
        assert report.macro_precision == pytest.approx(2 / 3)
        assert report.macro_recall == pytest.approx(2 / 3)
        assert report.macro_f1 == pytest.approx(2 / 3)

    def test_absent_classes_stay_in_divisor(self):
        model = tiny_model(sizes=(3, 4, 6))
        for w in model.weights:
            w[:] = 0.0
        for b in model.biases:
            b[:] = 0.0
        model.class_map = ReplicaClassMap()
        # uniform output -> always class 0; all labels class 0 -> only 1/6 classes scored
        samples = [TrainingSample(FeatureVector(512, 1.0, r), 0) for r in (1.0, 2.0, 3.0)]
        report = evaluate(model, samples)
        assert report.accuracy == 1.0
        assert report.macro_f1 == pytest.approx(1 / 6)
        assert report.macro_precision == pytest.approx(1 / 6)

    def test_macro_metrics_match_sklearn(self):
        from sklearn.metrics import f1_score, precision_score, recall_score

        model = sign_model()
        rng = np.random.default_rng(42)
        rates = rng.choice([-1.0, 1.0], size=30)
        labels = rng.integers(0, 2, size=30)
        samples = [
            TrainingSample(FeatureVector(512, 1.0, float(r)), int(l))
            for r, l in zip(rates, labels)
        ]
        preds = (rates > 0).astype(int)
        report = evaluate(model, samples)
        kw = dict(labels=[0, 1], average="macro", zero_division=0)
        assert report.macro_f1 == pytest.approx(f1_score(labels, preds, **kw))
        assert report.macro_precision == pytest.approx(precision_score(labels, preds, **kw))
        assert report.macro_recall == pytest.approx(recall_score(labels, preds, **kw))


class TestSerialization:
    def test_round_trip_preserves_predictions(self):
        model, _ = train(
            separable_samples(seed=11, n_per_class=25),
            TrainingConfig(hidden_sizes=(8,), epochs=30, class_map=ReplicaClassMap((5, 10))),
        )
        doc = json.loads(json.dumps(model_to_dict(model)))
        back = model_from_dict(doc)
        for a, b in zip(model.weights + model.biases, back.weights + back.biases):
            assert np.array_equal(a, b)
        for rate in (3.0, 17.0, 44.0):
            np.testing.assert_array_equal(
                forward(model, FeatureVector(512, 1.0, rate)),
                forward(back, FeatureVector(512, 1.0, rate)),
            )

    def test_weights_serialized_row_major(self):
        model = tiny_model(sizes=(3, 2, 2))
        doc = model_to_dict(model)
        assert doc["weights"][0] == model.weights[0].ravel(order="C").tolist()
