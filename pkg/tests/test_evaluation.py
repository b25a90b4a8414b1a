import numpy as np
import pytest

from gancd.evaluation import (
    ConfusionCounts,
    confusion,
    downsample_features,
    frechet_distance,
    frechet_feature_distance,
    metrics,
    sweep_curves,
)


def test_confusion_examples(rng):
    truth = rng.random((8, 8)) > 0.7
    c = confusion(truth, truth)
    assert c.fp == c.fn == 0
    c = confusion(np.zeros_like(truth), truth)
    assert c.tp == 0 and c.fn == truth.sum()
    with pytest.raises(ValueError):
        confusion(truth, truth[:4])


def test_confusion_loop_oracle(rng):
    pred, truth = rng.random((32, 32)) > 0.5, rng.random((32, 32)) > 0.6
    counts = dict(tp=0, fp=0, tn=0, fn=0)
    for p, t in zip(pred.ravel(), truth.ravel()):
        key = ("t" if p == t else "f") + ("p" if p else "n")
        counts[key] += 1
    assert confusion(pred, truth) == ConfusionCounts(**counts)


def test_metrics_perfect_and_chance():
    m = metrics(ConfusionCounts(10, 0, 90, 0))
    assert m["oa"] == m["kappa"] == m["f1"] == 1.0
    m = metrics(ConfusionCounts(50, 50, 50, 50))
    assert m["oa"] == 0.5 and m["kappa"] == 0.0


def test_metrics_formula_oracle():
    tp, fp, tn, fn = 30, 10, 50, 10
    n = 100
    p_obs = 0.8
    p_yes = (40 / n) * (40 / n)
    p_no = (60 / n) * (60 / n)
    kappa = (p_obs - (p_yes + p_no)) / (1 - (p_yes + p_no))
    m = metrics(ConfusionCounts(tp, fp, tn, fn))
    assert m["oa"] == pytest.approx(0.8, abs=1e-12)
    assert m["precision"] == pytest.approx(0.75, abs=1e-12)
    assert m["recall"] == pytest.approx(0.75, abs=1e-12)
    assert m["f1"] == pytest.approx(0.75, abs=1e-12)
    assert m["kappa"] == pytest.approx(kappa, abs=1e-12)


def test_metrics_zero_denominators():
    m = metrics(ConfusionCounts(0, 0, 100, 0))
    assert m["oa"] == 1.0
    assert m["precision"] == m["recall"] == m["f1"] == m["kappa"] == 0.0
    with pytest.raises(ValueError):
        metrics(ConfusionCounts(0, 0, 0, 0))


def test_metric_ranges(rng):
    for _ in range(50):
        pred, truth = rng.random((10, 10)) > rng.random(), rng.random((10, 10)) > rng.random()
        m = metrics(confusion(pred, truth))
        for k in ("oa", "precision", "recall", "f1"):
            assert 0 <= m[k] <= 1
        assert -1 <= m["kappa"] <= 1


def test_sweep_perfect_map(rng):
    truth = rng.random((16, 16)) > 0.7
    sweep = sweep_curves(truth.astype(float), truth, np.linspace(0, 1, 11))
    assert any(p.fpr == 0 and p.tpr == 1 for p in sweep.points)
    assert sweep.roc_auc == pytest.approx(1.0)


def test_sweep_constant_map(rng):
    truth = rng.random((8, 8)) > 0.5
    sweep = sweep_curves(np.full((8, 8), 0.4), truth, [0.0, 0.1, 0.3, 0.5, 0.9])
    below = {(p.tpr, p.fpr) for p in sweep.points if p.threshold <= 0.4}
    above = {(p.tpr, p.fpr) for p in sweep.points if p.threshold > 0.4}
    assert below == {(1.0, 1.0)} and above == {(0.0, 0.0)}
    assert sweep.roc_auc == pytest.approx(0.5)


def mann_whitney_auc(scores, truth):
    pos, neg = scores[truth], scores[~truth]
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (greater + 0.5 * ties) / (pos.size * neg.size)


def test_sweep_auc_matches_rank_statistic(rng):
    scores = np.round(rng.random((32, 32)), 2)
    truth = rng.random((32, 32)) < 0.3 + 0.3 * scores
    sweep = sweep_curves(scores, truth, np.unique(scores))
    assert abs(sweep.roc_auc - mann_whitney_auc(scores.ravel(), truth.ravel())) <= 1e-6


def test_sweep_points_reproducible_from_counts(rng):
    scores, truth = rng.random((16, 16)), rng.random((16, 16)) > 0.6
    for p in sweep_curves(scores, truth, np.linspace(0, 1, 21)).points:
        m = metrics(confusion(scores >= p.threshold, truth))
        assert (p.precision, p.recall) == (m["precision"], m["recall"])


def test_frechet_identical_sets(rng):
    imgs = [rng.random((8, 8, 3)) for _ in range(10)]
    assert abs(frechet_feature_distance(imgs, imgs)) <= 1e-8


def test_frechet_diagonal_closed_form(rng):
    mu1, mu2 = np.array([0.0, 1.0, -2.0]), np.array([1.0, 1.5, 0.0])
    s1, s2 = np.array([1.0, 4.0, 0.25]), np.array([2.0, 1.0, 0.5])
    closed = np.sum((mu1 - mu2) ** 2) + np.sum(s1 + s2 - 2 * np.sqrt(s1 * s2))
    assert frechet_distance(mu1, np.diag(s1), mu2, np.diag(s2)) == pytest.approx(closed, abs=1e-6)
    a = rng.normal(mu1, np.sqrt(s1), size=(200000, 3))
    b = rng.normal(mu2, np.sqrt(s2), size=(200000, 3))
    ident = lambda x: x
    assert frechet_feature_distance(a, b, ident) == pytest.approx(closed, abs=0.05)


def test_frechet_symmetric_and_nonnegative(rng):
    a = [rng.random((8, 8, 3)) for _ in range(12)]
    b = [rng.random((8, 8, 3)) ** 2 for _ in range(9)]
    ab, ba = frechet_feature_distance(a, b), frechet_feature_distance(b, a)
    assert abs(ab - ba) <= 1e-9
    assert ab >= -1e-8
    with pytest.raises(ValueError):
        frechet_feature_distance(a[:1], b)


def test_default_extractor_shape(rng):
    assert downsample_features(rng.random((128, 128, 3))).shape == (192,)
