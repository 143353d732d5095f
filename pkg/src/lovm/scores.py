"""Text-derived model scores: classification proxies and class-geometry stats.

Six per-(model, dataset) features are computed from a bundle of text
embeddings alone, plus an optional seventh joined from a per-model ImageNet
accuracy table. The classification proxies treat noisy caption embeddings as
stand-in images; the geometry stats summarize how the class weights and
captions sit relative to each other on the unit sphere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datastore import EmbeddingBundle, EmbeddingMatrix, ModelId, l2_normalize
from .ensemble import ensemble_class_weights
from .errors import LovmError, TableError
from .metrics import accuracy, macro_f1

# Canonical feature order; every subset is emitted in this order.
TEXT_FEATURES = ("text_acc1", "text_f1", "fisher", "silhouette", "dispersion", "synonym")
ALL_FEATURES = ("inb",) + TEXT_FEATURES

FEATURE_GROUPS = {
    "INB": ("inb",),
    "C": ("text_acc1", "text_f1"),
    "G": ("fisher", "silhouette", "dispersion", "synonym"),
}

# Features bounded [0,1]; the cosine-based rest live in [-1,1].
_UNIT_RANGE = {"text_acc1", "text_f1", "inb"}

SCORES_HEADER = ["model_name", "pretrain", "dataset"] + list(TEXT_FEATURES)

_MASK64 = (1 << 64) - 1


def parse_feature_subset(spec: str) -> tuple[str, ...]:
    """Expand a '+'-joined group list (e.g. "INB+G+C") into feature names.

    Groups may appear in any order; the result is always in canonical
    feature order so equal subsets compare equal.
    """
    names: set[str] = set()
    for token in spec.split("+"):
        if token not in FEATURE_GROUPS:
            raise TableError(
                f"unknown feature group {token!r}, expected one of {'/'.join(FEATURE_GROUPS)}"
            )
        group = FEATURE_GROUPS[token]
        if names & set(group):
            raise TableError(f"feature group {token!r} listed twice")
        names.update(group)
    return tuple(f for f in ALL_FEATURES if f in names)


@dataclass(frozen=True)
class NoiseConfig:
    """Gaussian corruption parameters for the classification proxies."""

    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise LovmError(f"noise level must be finite and >= 0, got {self.sigma}")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; errors on zero vectors or dim mismatch."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise LovmError(f"cosine needs two vectors of one shape, got {a.shape} vs {b.shape}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise LovmError("cosine of a zero vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def corrupt(m: EmbeddingMatrix, cfg: NoiseConfig) -> EmbeddingMatrix:
    """Add i.i.d. Gaussian(0, sigma^2) noise from a per-row counter-based stream.

    Row r draws from a Philox stream keyed by (r, seed), so the noise a row
    receives does not depend on how many rows precede it or on execution
    order. sigma = 0 returns the input untouched, bit for bit.
    """
    if cfg.sigma == 0.0:
        return m
    out = np.empty(m.rows.shape, dtype=np.float64)
    for r in range(m.num_rows):
        key = (r << 64) | (cfg.seed & _MASK64)
        gen = np.random.Generator(np.random.Philox(key=key))
        out[r] = m.rows[r] + cfg.sigma * gen.standard_normal(m.dim)
    return EmbeddingMatrix(dim=m.dim, rows=out, row_labels=m.row_labels, unit_norm=False)


def cosine_to_weights(rows: np.ndarray, weights: EmbeddingMatrix) -> np.ndarray:
    """Cosine similarity of each row against each unit class weight."""
    norms = np.linalg.norm(rows, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise LovmError(f"cannot take cosine of zero vector at row {int(zero[0])}")
    return np.clip((rows / norms[:, None]) @ weights.rows.T, -1.0, 1.0)


@dataclass(frozen=True)
class ScoreVector:
    text_acc1: float
    text_f1: float
    fisher: float
    silhouette: float
    dispersion: float
    synonym: float
    inb: float | None = None

    def __post_init__(self):
        for name in ALL_FEATURES:
            v = getattr(self, name)
            if v is None:
                continue
            lo = 0.0 if name in _UNIT_RANGE else -1.0
            if not np.isfinite(v) or not lo <= v <= 1.0:
                raise LovmError(f"score {name}={v} outside [{lo}, 1]")

    def as_dict(self) -> dict[str, float]:
        return {f: getattr(self, f) for f in TEXT_FEATURES}


def text_classification(
    captions: EmbeddingMatrix, weights: EmbeddingMatrix, cfg: NoiseConfig
) -> tuple[float, float]:
    """Top-1 accuracy and macro F1 of nearest-class-by-cosine on noisy captions.

    Captions are normalized before corruption so sigma means the same thing
    for every model's embedding scale; they are deliberately not renormalized
    afterwards because cosine ignores the norm anyway. Argmax ties go to the
    lowest class index.
    """
    if captions.num_rows == 0:
        raise LovmError("cannot classify an empty caption set")
    noisy = corrupt(l2_normalize(captions), cfg)
    sims = cosine_to_weights(noisy.rows, weights)
    preds = np.argmax(sims, axis=1)
    labels = noisy.class_indices()
    return accuracy(labels, preds), macro_f1(labels, preds, weights.num_rows)


def fisher_score(weights: EmbeddingMatrix) -> float:
    """Mean over classes of the highest cosine to any other class weight.

    High values mean crowded class weights, which predicts confusable
    classes regardless of how good the captions are.
    """
    if weights.num_rows < 2:
        raise LovmError(f"need at least 2 class weights, got {weights.num_rows}")
    sims = np.clip(weights.rows @ weights.rows.T, -1.0, 1.0)
    np.fill_diagonal(sims, -np.inf)
    return float(np.mean(np.max(sims, axis=1)))


def _per_class_mean_cosines(rows_matrix: EmbeddingMatrix, weights: EmbeddingMatrix) -> np.ndarray:
    """M[j, c] = mean cosine of class-j rows against class weight c."""
    unit = l2_normalize(rows_matrix)
    sims = cosine_to_weights(unit.rows, weights)
    indices = unit.class_indices()
    num_classes = weights.num_rows
    out = np.full((num_classes, num_classes), np.nan, dtype=np.float64)
    for j in range(num_classes):
        block = sims[indices == j]
        if block.shape[0] == 0:
            raise LovmError(f"no rows for class index {j}")
        out[j] = block.mean(axis=0)
    return out


def silhouette_score(captions: EmbeddingMatrix, weights: EmbeddingMatrix) -> float:
    """Mean over classes of the strongest pull toward a *wrong* class weight.

    Uses clean captions: this measures geometry, not noise robustness.
    """
    if weights.num_rows < 2:
        raise LovmError(f"need at least 2 class weights, got {weights.num_rows}")
    m = _per_class_mean_cosines(captions, weights)
    np.fill_diagonal(m, -np.inf)
    return float(np.mean(np.max(m, axis=1)))


def dispersion_score(captions: EmbeddingMatrix, weights: EmbeddingMatrix) -> float:
    """Mean over classes of the mean cosine between class-j captions and weight j.

    Per-class means are averaged with equal class weight, so a class with
    many captions does not drown out one with few.
    """
    m = _per_class_mean_cosines(captions, weights)
    return float(np.mean(np.diagonal(m)))


def synonym_score(synonyms: EmbeddingMatrix, weights: EmbeddingMatrix) -> float:
    """Dispersion computed over synonym embeddings instead of captions."""
    m = _per_class_mean_cosines(synonyms, weights)
    return float(np.mean(np.diagonal(m)))


def score_pair(
    bundle: EmbeddingBundle,
    weights: EmbeddingMatrix,
    cfg: NoiseConfig = NoiseConfig(),
    inb: float | None = None,
) -> ScoreVector:
    """All six text features for one (model, dataset) bundle, plus optional inb."""
    acc1, f1 = text_classification(bundle.captions, weights, cfg)
    return ScoreVector(
        text_acc1=acc1,
        text_f1=f1,
        fisher=fisher_score(weights),
        silhouette=silhouette_score(bundle.captions, weights),
        dispersion=dispersion_score(bundle.captions, weights),
        synonym=synonym_score(bundle.synonyms, weights),
        inb=inb,
    )


def compute_scores(
    bundle: EmbeddingBundle, cfg: NoiseConfig = NoiseConfig(), inb: float | None = None
) -> ScoreVector:
    """Build class weights from the bundle's templates, then score it."""
    weights = ensemble_class_weights(bundle.class_prompts, bundle.task.num_classes)
    return score_pair(bundle, weights, cfg, inb)


@dataclass(frozen=True)
class ScoreTable:
    """Computed text features per (model, dataset), plus the ImageNet join."""

    rows: dict[tuple[ModelId, str], ScoreVector]
    imagenet_top1: dict[ModelId, float]

    def value(self, model: ModelId, dataset: str, feature: str) -> float:
        if feature == "inb":
            if model not in self.imagenet_top1:
                raise TableError(f"no imagenet accuracy for {model}")
            return self.imagenet_top1[model]
        key = (model, dataset)
        if key not in self.rows:
            raise TableError(f"no scores for {model} on {dataset}")
        return getattr(self.rows[key], feature)


def write_scores_csv(table: ScoreTable, path: str | Path) -> None:
    """Emit the text-feature cache, rows sorted by (model, pretrain, dataset)."""
    p = Path(path)
    keys = sorted(table.rows, key=lambda k: (k[0].name, k[0].pretrain, k[1]))
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORES_HEADER)
        for model, dataset in keys:
            vec = table.rows[(model, dataset)]
            w.writerow(
                [model.name, model.pretrain, dataset]
                + [repr(getattr(vec, f)) for f in TEXT_FEATURES]
            )


def load_scores_csv(
    path: str | Path, imagenet_top1: dict[ModelId, float] | None = None
) -> ScoreTable:
    p = Path(path)
    if not p.is_file():
        raise TableError(f"scores file {p} is missing")
    rows: dict[tuple[ModelId, str], ScoreVector] = {}
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SCORES_HEADER:
            raise TableError(f"scores header must be {','.join(SCORES_HEADER)}")
        for i, row in enumerate(reader, start=2):
            if len(row) != len(SCORES_HEADER):
                raise TableError(f"line {i}: expected {len(SCORES_HEADER)} fields, got {len(row)}")
            model = ModelId(row[0], row[1])
            dataset = row[2]
            if not dataset:
                raise TableError(f"line {i}: empty dataset id")
            key = (model, dataset)
            if key in rows:
                raise TableError(f"line {i}: duplicate scores for {model} on {dataset}")
            try:
                values = [float(x) for x in row[3:]]
            except ValueError as e:
                raise TableError(f"line {i}: non-numeric feature value") from e
            try:
                rows[key] = ScoreVector(*values)
            except LovmError as e:
                raise TableError(f"line {i}: {e}") from e
    return ScoreTable(rows=rows, imagenet_top1=dict(imagenet_top1 or {}))
