"""Scoring of change maps and a Frechet distance between image sets."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .core import bilinear_resize


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    precision: float
    recall: float
    tpr: float
    fpr: float


@dataclass
class CurveSweep:
    points: list[CurvePoint]
    roc_auc: float

    def best_f1(self) -> tuple[CurvePoint, float]:
        def f1(p: CurvePoint) -> float:
            s = p.precision + p.recall
            return 2 * p.precision * p.recall / s if s > 0 else 0.0

        best = max(self.points, key=f1)
        return best, f1(best)


def confusion(pred, truth) -> ConfusionCounts:
    """Pixel counts with "changed" as the positive class."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    return ConfusionCounts(tp, fp, pred.size - tp - fp - fn, fn)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def metrics(c: ConfusionCounts) -> dict[str, float]:
    """OA, precision, recall, Cohen's kappa and F1; undefined ratios are 0."""
    n = c.total
    if n <= 0:
        raise ValueError("confusion counts are empty")
    oa = (c.tp + c.tn) / n
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    pe = ((c.tp + c.fp) * (c.tp + c.fn) + (c.fn + c.tn) * (c.fp + c.tn)) / (n * n)
    kappa = _ratio(oa - pe, 1 - pe)
    return {"oa": oa, "precision": precision, "recall": recall, "kappa": kappa, "f1": f1}


def sweep_curves(intensity, truth, thresholds: Sequence[float]) -> CurveSweep:
    """Binarize at each threshold (``value >= t``) and collect PR/ROC points.

    The ROC area is the trapezoid rule over the swept (fpr, tpr) points with
    the (0, 0) and (1, 1) corners added.
    """
    intensity = np.asarray(intensity, dtype=np.float64)
    truth = np.asarray(truth, dtype=bool)
    ts = np.asarray(thresholds, dtype=np.float64)
    if ts.size and (ts.min() < 0 or ts.max() > 1):
        raise ValueError("thresholds must lie in [0, 1]")
    points = []
    for t in ts:
        c = confusion(intensity >= t, truth)
        m = metrics(c)
        points.append(CurvePoint(float(t), m["precision"], m["recall"], m["recall"], _ratio(c.fp, c.fp + c.tn)))
    roc = sorted({(0.0, 0.0), (1.0, 1.0), *((p.fpr, p.tpr) for p in points)})
    fpr, tpr = np.array(roc).T
    return CurveSweep(points, float(np.trapezoid(tpr, fpr)))


def write_curves_csv(sweep: CurveSweep, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["threshold", "precision", "recall", "tpr", "fpr"])
        writer.writeheader()
        for p in sweep.points:
            writer.writerow(asdict(p))


def downsample_features(img, size: int = 8) -> np.ndarray:
    """Default feature extractor: bilinear ``size x size`` thumbnail, flattened."""
    return bilinear_resize(np.asarray(img, dtype=np.float64), size, size).ravel()


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.T


def frechet_distance(mu1, sigma1, mu2, sigma2) -> float:
    """``|mu1-mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2))`` for Gaussian fits.

    The cross term is the nuclear norm of ``S1^(1/2) S2^(1/2)``, which equals
    ``tr((S1^(1/2) S2 S1^(1/2))^(1/2))`` and keeps the result symmetric in the
    two arguments to rounding.
    """
    sigma1 = np.atleast_2d(np.asarray(sigma1, dtype=np.float64))
    sigma2 = np.atleast_2d(np.asarray(sigma2, dtype=np.float64))
    cross = np.linalg.svd(_sqrtm_psd(sigma1) @ _sqrtm_psd(sigma2), compute_uv=False).sum()
    diff = np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64)
    return float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2 * cross)


def gaussian_fit(features) -> tuple[np.ndarray, np.ndarray]:
    feats = np.asarray(features, dtype=np.float64)
    return feats.mean(axis=0), np.atleast_2d(np.cov(feats, rowvar=False))


def frechet_feature_distance(
    set_a, set_b, extractor: Callable[[np.ndarray], np.ndarray] = downsample_features
) -> float:
    if len(set_a) < 2 or len(set_b) < 2:
        raise ValueError("each image set needs at least 2 images")
    mu_a, cov_a = gaussian_fit([extractor(x) for x in set_a])
    mu_b, cov_b = gaussian_fit([extractor(x) for x in set_b])
    return frechet_distance(mu_a, cov_a, mu_b, cov_b)
