"""Linear accuracy prediction and the two hold-out evaluation protocols.

The model is plain least squares over raw features: accuracy ~ w . features
+ b. Features are deliberately not standardized, so coefficients stay
interpretable against the published feature scales and hold-out fits are
exactly reproducible from the cached score tables.

The single-feature ImageNet baseline is special-cased: its prediction is the
table value itself, no fit involved, in both protocols.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .datastore import GroundTruthTable, ModelId
from .errors import LovmError, TableError
from .metrics import r_squared, top5_recall, top5_tau
from .scores import ScoreTable

RIDGE_EPS = 1e-8

INB_ONLY = ("inb",)


@dataclass(frozen=True)
class FeatureTable:
    """Design-matrix view of a score table: one row per (model, dataset).

    Row values are aligned with ``feature_names``. Rows keep the ground-truth
    table's (model, dataset) order; that order is the tie-breaking order
    everywhere downstream.
    """

    feature_names: tuple[str, ...]
    target: str
    rows: tuple[tuple[ModelId, str, tuple[float, ...]], ...]

    def __post_init__(self):
        if len(set(self.feature_names)) != len(self.feature_names):
            raise TableError("feature names must be unique")
        if self.target not in ("top1", "mpcr"):
            raise TableError(f"target must be top1 or mpcr, got {self.target!r}")
        index = {(m, d): vals for m, d, vals in self.rows}
        if len(index) != len(self.rows):
            raise TableError("duplicate (model, dataset) feature rows")
        object.__setattr__(self, "_index", index)

    def values(self, model: ModelId, dataset: str) -> tuple[float, ...]:
        try:
            return self._index[(model, dataset)]
        except KeyError:
            raise TableError(f"no feature row for {model} on {dataset}") from None


def build_feature_table(
    scores: ScoreTable, gt: GroundTruthTable, feature_names: tuple[str, ...], target: str
) -> FeatureTable:
    """Assemble feature rows for every grid cell, in table order."""
    if not feature_names:
        raise TableError("empty feature subset")
    rows = []
    for model in gt.models:
        for dataset in gt.datasets:
            vals = tuple(scores.value(model, dataset, f) for f in feature_names)
            rows.append((model, dataset, vals))
    return FeatureTable(feature_names=tuple(feature_names), target=target, rows=tuple(rows))


@dataclass(frozen=True)
class LinearModel:
    """Fitted affine map; weights are keyed by feature name."""

    feature_names: tuple[str, ...]
    weights: dict[str, float]
    bias: float
    regularized: bool = False

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights[f] for f in self.feature_names], dtype=np.float64)

    def predict_raw(self, features: np.ndarray) -> np.ndarray:
        """Unclamped scores; use these for ranking."""
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != len(self.feature_names):
            raise LovmError(f"model takes {len(self.feature_names)} features, got {x.shape[1]}")
        return x @ self.weight_vector() + self.bias


def fit_linear(
    features: np.ndarray, targets: np.ndarray, feature_names: tuple[str, ...]
) -> LinearModel:
    """Least-squares fit of targets = features @ w + b via the normal equations.

    Needs at least k+1 rows for k features. If the normal system is rank
    deficient (collinear or constant columns) a 1e-8 ridge on the diagonal
    makes it solvable and the result is flagged ``regularized``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise LovmError(f"bad fit shapes: features {x.shape}, targets {y.shape}")
    if x.shape[1] != len(feature_names):
        raise LovmError(f"{x.shape[1]} columns for {len(feature_names)} feature names")
    if x.shape[0] < x.shape[1] + 1:
        raise LovmError(
            f"too few rows to fit: {x.shape[0]} rows for {x.shape[1]} features"
        )
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise LovmError("fit inputs must be finite")

    design = np.hstack([x, np.ones((x.shape[0], 1))])
    gram = design.T @ design
    rhs = design.T @ y
    regularized = bool(np.linalg.matrix_rank(gram) < gram.shape[0])
    if regularized:
        gram = gram + RIDGE_EPS * np.eye(gram.shape[0])
    beta = np.linalg.solve(gram, rhs)
    weights = {f: float(beta[i]) for i, f in enumerate(feature_names)}
    return LinearModel(
        feature_names=tuple(feature_names),
        weights=weights,
        bias=float(beta[-1]),
        regularized=regularized,
    )


def predict(model: LinearModel, features: Mapping[str, float]) -> float:
    """One clamped accuracy prediction from named feature values."""
    missing = [f for f in model.feature_names if f not in features]
    if missing:
        raise LovmError(f"missing feature {missing[0]!r}")
    row = np.array([[features[f] for f in model.feature_names]], dtype=np.float64)
    return float(np.clip(model.predict_raw(row), 0.0, 1.0)[0])


def _require_dense(gt: GroundTruthTable) -> None:
    if not gt.dense:
        raise TableError("hold-out protocols need a dense (model x dataset) grid")


def _fit_rows(
    table: FeatureTable, gt: GroundTruthTable, keep
) -> LinearModel:
    train = [(m, d, v) for m, d, v in table.rows if keep(m, d)]
    x = np.array([v for _, _, v in train], dtype=np.float64)
    y = np.array([gt.value(m, d, table.target) for m, d, _ in train], dtype=np.float64)
    return fit_linear(x, y, table.feature_names)


def rank_models(
    table: FeatureTable, gt: GroundTruthTable, target_dataset: str
) -> list[tuple[ModelId, float]]:
    """Rank all models on one dataset, fitted on every other dataset.

    Returns (model, raw predicted score) sorted descending; ties keep the
    ground-truth table's model order. Scores stay unclamped so the clamp
    cannot manufacture ties at 0 or 1.
    """
    _require_dense(gt)
    if target_dataset not in gt.datasets:
        raise TableError(f"unknown dataset {target_dataset!r}")
    if table.feature_names == INB_ONLY:
        pairs = [(m, table.values(m, target_dataset)[0]) for m in gt.models]
    else:
        model_fit = _fit_rows(table, gt, lambda m, d: d != target_dataset)
        x = np.array([table.values(m, target_dataset) for m in gt.models], dtype=np.float64)
        preds = model_fit.predict_raw(x)
        pairs = list(zip(gt.models, (float(p) for p in preds)))
    return sorted(pairs, key=lambda p: -p[1])


def predict_performance(
    table: FeatureTable, gt: GroundTruthTable, model: ModelId, dataset: str
) -> float:
    """Clamped accuracy prediction for one cell, fitted with that cell's whole
    model row and dataset column held out."""
    _require_dense(gt)
    if model not in gt.models:
        raise TableError(f"unknown model {model}")
    if dataset not in gt.datasets:
        raise TableError(f"unknown dataset {dataset!r}")
    if table.feature_names == INB_ONLY:
        raw = table.values(model, dataset)[0]
    else:
        model_fit = _fit_rows(table, gt, lambda m, d: m != model and d != dataset)
        raw = float(model_fit.predict_raw(np.array([table.values(model, dataset)]))[0])
    return float(np.clip(raw, 0.0, 1.0))


@dataclass(frozen=True)
class SubsetEval:
    """Hold-out metrics for one feature subset, per dataset and averaged."""

    feature_names: tuple[str, ...]
    per_dataset_r5: dict[str, float]
    per_dataset_tau: dict[str, float]
    per_dataset_l1: dict[str, float]
    r2: float

    @property
    def mean_r5(self) -> float:
        return float(np.mean(list(self.per_dataset_r5.values())))

    @property
    def mean_tau(self) -> float:
        return float(np.mean(list(self.per_dataset_tau.values())))

    @property
    def mean_l1(self) -> float:
        return float(np.mean(list(self.per_dataset_l1.values())))


def evaluate_subset(
    scores: ScoreTable, gt: GroundTruthTable, feature_names: tuple[str, ...], target: str
) -> SubsetEval:
    """Run both protocols for one feature subset over the whole grid."""
    _require_dense(gt)
    table = build_feature_table(scores, gt, feature_names, target)
    r5s: dict[str, float] = {}
    taus: dict[str, float] = {}
    l1s: dict[str, float] = {}
    all_preds: list[float] = []
    all_actual: list[float] = []
    for dataset in gt.datasets:
        ranked = dict(rank_models(table, gt, dataset))
        predicted = {m: ranked[m] for m in gt.models}
        actual = {m: gt.value(m, dataset, target) for m in gt.models}
        r5s[dataset] = top5_recall(predicted, actual)
        taus[dataset] = top5_tau(predicted, actual)
        errs = []
        for m in gt.models:
            pred = predict_performance(table, gt, m, dataset)
            truth = gt.value(m, dataset, target)
            errs.append(abs(pred - truth))
            all_preds.append(pred)
            all_actual.append(truth)
        l1s[dataset] = float(np.mean(errs))
    return SubsetEval(
        feature_names=tuple(feature_names),
        per_dataset_r5=r5s,
        per_dataset_tau=taus,
        per_dataset_l1=l1s,
        r2=r_squared(all_preds, all_actual),
    )


def ablate_subsets(
    scores: ScoreTable, gt: GroundTruthTable, feature_pool: tuple[str, ...], target: str
) -> list[SubsetEval]:
    """Evaluate every non-empty subset of the pool: 2^k - 1 rows.

    Rows are ordered by subset size, then by combination order within the
    pool, so the output is stable for a given pool.
    """
    if not feature_pool:
        raise TableError("empty feature pool")
    if len(feature_pool) > 10:
        raise TableError(f"feature pool too large ({len(feature_pool)} > 10)")
    if len(set(feature_pool)) != len(feature_pool):
        raise TableError("feature pool has duplicates")
    out = []
    for size in range(1, len(feature_pool) + 1):
        for subset in combinations(feature_pool, size):
            out.append(evaluate_subset(scores, gt, subset, target))
    return out
