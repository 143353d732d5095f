"""Ranking, regression, and classification metrics for the evaluation protocol.

Ranking metrics compare a predicted model ordering against the ground-truth
ordering but only look at the five best models on each side: downstream users
pick from the head of the list, so tail order is noise here. Score maps are
ordinary dicts; their insertion order is the tie-breaking order.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from math import comb

import numpy as np

from .errors import TableError

TOP_K = 5


def top_k_set(scores: Mapping, k: int = TOP_K) -> frozenset:
    """Keys of the k highest scores. Ties break toward earlier map insertion."""
    if len(scores) < k:
        raise TableError(f"need at least {k} entries to take a top-{k}, got {len(scores)}")
    order = {key: i for i, key in enumerate(scores)}
    ranked = sorted(scores, key=lambda m: (-scores[m], order[m]))
    return frozenset(ranked[:k])


def _check_same_universe(predicted: Mapping, actual: Mapping) -> None:
    if set(predicted) != set(actual):
        raise TableError("predicted and actual score maps must cover the same models")


def top5_recall(predicted: Mapping, actual: Mapping) -> float:
    """|top5(predicted) ∩ top5(actual)| / 5."""
    _check_same_universe(predicted, actual)
    return len(top_k_set(predicted) & top_k_set(actual)) / TOP_K


def kendall_tau_a(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Tau-a over parallel score sequences: (concordant - discordant) / C(n, 2).

    Ties in either sequence contribute zero to the numerator while the
    denominator stays C(n, 2), so heavily tied inputs pull tau toward 0.
    """
    n = len(xs)
    if n != len(ys):
        raise TableError(f"tau inputs must be parallel, got {n} vs {len(ys)}")
    if n < 2:
        raise TableError(f"tau needs at least 2 items, got {n}")
    num = 0
    for i in range(n):
        for j in range(i + 1, n):
            num += int(np.sign((xs[i] - xs[j]) * (ys[i] - ys[j])))
    return num / comb(n, 2)


def top5_tau(predicted: Mapping, actual: Mapping, *, exclude_small: bool = False) -> float | None:
    """Tau-a restricted to models ranked top-5 by both sides.

    The intersection can be tiny. With fewer than 2 shared models the
    statistic is undefined; it reports 0.0 by default, or None when
    ``exclude_small`` is set so callers can drop the case from an average.
    """
    _check_same_universe(predicted, actual)
    shared = [m for m in predicted if m in top_k_set(predicted) & top_k_set(actual)]
    if len(shared) < 2:
        return None if exclude_small else 0.0
    return kendall_tau_a([predicted[m] for m in shared], [actual[m] for m in shared])


def mean_abs_error(predicted: Sequence[float], actual: Sequence[float]) -> float:
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(actual, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise TableError(f"L1 inputs must be parallel non-empty vectors, got {p.shape} vs {t.shape}")
    return float(np.mean(np.abs(p - t)))


def r_squared(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """1 - SS_res / SS_tot against the mean of ``actual``; no refitting.

    Negative when predictions do worse than the constant mean predictor.
    """
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(actual, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size < 2:
        raise TableError(f"R2 needs parallel vectors of >= 2 points, got {p.shape} vs {t.shape}")
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise TableError("R2 undefined: all actual values are equal")
    ss_res = float(np.sum((t - p) ** 2))
    return 1.0 - ss_res / ss_tot


def accuracy(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.size == 0:
        raise TableError("accuracy inputs must be parallel non-empty label vectors")
    return float(np.mean(t == p))


def macro_f1(y_true: Sequence[int], y_pred: Sequence[int], num_classes: int) -> float:
    """Unweighted mean of per-class F1 over all ``num_classes`` classes.

    A class with zero precision+recall mass contributes F1 = 0 rather than
    raising, so missing predictions degrade the score instead of crashing.
    """
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.size == 0:
        raise TableError("macro F1 inputs must be parallel non-empty label vectors")
    if num_classes < 2:
        raise TableError(f"macro F1 needs at least 2 classes, got {num_classes}")
    f1s = []
    for c in range(num_classes):
        tp = int(np.sum((p == c) & (t == c)))
        fp = int(np.sum((p == c) & (t != c)))
        fn = int(np.sum((p != c) & (t == c)))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(f1s))
