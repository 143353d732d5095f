"""Dataset difficulty and domain-shift estimators over ingested embeddings.

Each estimator compares a downstream dataset to the pre-training corpus (or
measures the dataset's own class geometry) and the datasets are then ranked:
the report's tau values say how well each estimator's ordering matches the
ground-truth accuracy ordering. Image embeddings arrive precomputed; nothing
here touches an encoder.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datastore import EmbeddingMatrix, read_tensor_file
from .ensemble import ensemble_class_weights
from .errors import BundleError, LovmError
from .metrics import kendall_tau_a
from .scores import cosine

DEFAULT_TEMPERATURE = 100.0

# metric -> method family, in report order
METRICS = {
    "desc_sim": "description",
    "prompt_sim": "prompts",
    "entropy": "logits",
    "max_logit": "logits",
    "l2_min": "distance",
    "l2_mean": "distance",
    "l2_max": "distance",
}

REPORT_HEADER = ["method", "metric", "dataset", "value", "rank", "tau"]


def description_similarity(target_desc: np.ndarray, pretrain_desc: np.ndarray) -> float:
    """Cosine between the two dataset-description embeddings."""
    return cosine(target_desc, pretrain_desc)


def prompt_similarity(specific: EmbeddingMatrix, generic: EmbeddingMatrix) -> float:
    """Mean cosine over matched (dataset-specific, generic) prompt pairs.

    Rows are matched by class index, in row order within each class; both
    matrices must cover the same classes with the same counts.
    """
    by_class_s = _rows_by_class(specific)
    by_class_g = _rows_by_class(generic)
    if set(by_class_s) != set(by_class_g):
        raise LovmError("prompt sets cover different classes")
    sims = []
    for c in sorted(by_class_s):
        rows_s, rows_g = by_class_s[c], by_class_g[c]
        if len(rows_s) != len(rows_g):
            raise LovmError(
                f"class index {c} has {len(rows_s)} specific vs {len(rows_g)} generic prompts"
            )
        sims.extend(cosine(a, b) for a, b in zip(rows_s, rows_g))
    return float(np.mean(sims))


def _rows_by_class(m: EmbeddingMatrix) -> dict[int, list[np.ndarray]]:
    out: dict[int, list[np.ndarray]] = {}
    for row, (ci, _tag) in zip(m.rows, m.row_labels):
        out.setdefault(ci, []).append(row)
    return out


def distribution_stats(probs: np.ndarray) -> tuple[float, float]:
    """Mean Shannon entropy (base 2) and mean max probability over rows.

    Rows are probability distributions; zero entries contribute zero
    entropy mass (the p log p limit).
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise LovmError("need at least one distribution row")
    terms = np.where(p > 0.0, -p * np.log2(np.maximum(p, 1e-300)), 0.0)
    return float(np.mean(terms.sum(axis=1))), float(np.mean(p.max(axis=1)))


def logit_difficulty(
    images: EmbeddingMatrix,
    weights: EmbeddingMatrix,
    temperature: float = DEFAULT_TEMPERATURE,
) -> tuple[float, float]:
    """Mean prediction entropy and mean max softmax probability over images.

    Logits are temperature-scaled cosines against the class weights; no
    learned temperature exists, the scale is a config knob.
    """
    if images.num_rows == 0:
        raise LovmError("no image embeddings")
    if not np.isfinite(temperature) or temperature <= 0:
        raise LovmError(f"temperature must be finite and > 0, got {temperature}")
    unit = images.rows / np.linalg.norm(images.rows, axis=1, keepdims=True)
    logits = temperature * (unit @ weights.rows.T)
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return distribution_stats(probs)


def embedding_distance(
    target: np.ndarray, pretrain: np.ndarray
) -> tuple[float, float, float]:
    """Min/mean/max Euclidean distance over all cross pairs."""
    a = np.atleast_2d(np.asarray(target, dtype=np.float64))
    b = np.atleast_2d(np.asarray(pretrain, dtype=np.float64))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise LovmError("embedding distance needs non-empty sets")
    if a.shape[1] != b.shape[1]:
        raise LovmError(f"dim mismatch: {a.shape[1]} vs {b.shape[1]}")
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * (a @ b.T)
    dists = np.sqrt(np.maximum(sq, 0.0))
    return float(dists.min()), float(dists.mean()), float(dists.max())


def difficulty_rank_eval(
    metric_values: Mapping[str, float], gt_accuracies: Mapping[str, float]
) -> float:
    """Full Kendall tau-a between a metric's dataset ordering and ground truth.

    This is the all-pairs tau over every dataset, not the top-5 variant used
    for model ranking. Distance-like metrics are expected to come out
    negative; no sign flipping is applied.
    """
    if set(metric_values) != set(gt_accuracies):
        raise LovmError("metric and ground-truth cover different datasets")
    keys = sorted(metric_values)
    if len(keys) < 2:
        raise LovmError(f"need at least 2 datasets, got {len(keys)}")
    return kendall_tau_a([metric_values[k] for k in keys], [gt_accuracies[k] for k in keys])


@dataclass(frozen=True)
class DifficultyInputs:
    """Per-dataset embeddings for the estimators; images are optional."""

    dataset: str
    desc: np.ndarray
    prompts_specific: EmbeddingMatrix
    prompts_generic: EmbeddingMatrix
    images: EmbeddingMatrix | None = None


@dataclass(frozen=True)
class PretrainReference:
    """Pre-training corpus stand-ins: description plus optional sample rows."""

    desc: np.ndarray
    samples: EmbeddingMatrix | None = None


@dataclass(frozen=True)
class DifficultyReport:
    temperature: float
    datasets: tuple[str, ...]
    values: dict[str, dict[str, float]]  # metric -> dataset -> value
    tau_vs_gt: dict[str, float]  # metric -> tau, only where >= 2 datasets have it


def build_report(
    inputs: list[DifficultyInputs],
    pretrain: PretrainReference,
    gt_accuracies: Mapping[str, float],
    temperature: float = DEFAULT_TEMPERATURE,
) -> DifficultyReport:
    """Compute every applicable metric per dataset and rank-correlate with GT."""
    if not inputs:
        raise LovmError("no difficulty inputs")
    seen = set()
    for inp in inputs:
        if inp.dataset in seen:
            raise LovmError(f"duplicate difficulty inputs for dataset {inp.dataset!r}")
        seen.add(inp.dataset)
        if inp.dataset not in gt_accuracies:
            raise LovmError(f"no ground-truth accuracy for dataset {inp.dataset!r}")

    values: dict[str, dict[str, float]] = {m: {} for m in METRICS}
    for inp in inputs:
        d = inp.dataset
        values["desc_sim"][d] = description_similarity(inp.desc, pretrain.desc)
        values["prompt_sim"][d] = prompt_similarity(inp.prompts_specific, inp.prompts_generic)
        if inp.images is not None:
            num_classes = max(ci for ci, _ in inp.prompts_specific.row_labels) + 1
            weights = ensemble_class_weights(inp.prompts_specific, num_classes)
            entropy, max_logit = logit_difficulty(inp.images, weights, temperature)
            values["entropy"][d] = entropy
            values["max_logit"][d] = max_logit
            if pretrain.samples is not None:
                l2_min, l2_mean, l2_max = embedding_distance(
                    inp.images.rows, pretrain.samples.rows
                )
                values["l2_min"][d] = l2_min
                values["l2_mean"][d] = l2_mean
                values["l2_max"][d] = l2_max

    taus = {}
    for metric, per_dataset in values.items():
        if len(per_dataset) >= 2:
            gt_sub = {d: gt_accuracies[d] for d in per_dataset}
            taus[metric] = difficulty_rank_eval(per_dataset, gt_sub)
    return DifficultyReport(
        temperature=temperature,
        datasets=tuple(inp.dataset for inp in inputs),
        values={m: v for m, v in values.items() if v},
        tau_vs_gt=taus,
    )


def write_report_csv(report: DifficultyReport, path: str | Path) -> None:
    """Long-format report: one row per (metric, dataset), plus rank and tau.

    Rank 1 is the dataset with the highest raw value under that metric; ties
    keep input dataset order. The tau column repeats the metric's tau so each
    row is self-contained.
    """
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for metric in METRICS:
            if metric not in report.values:
                continue
            per_dataset = report.values[metric]
            datasets = [d for d in report.datasets if d in per_dataset]
            by_value = sorted(datasets, key=lambda d: -per_dataset[d])
            ranks = {d: i + 1 for i, d in enumerate(by_value)}
            tau = report.tau_vs_gt.get(metric)
            for d in datasets:
                w.writerow(
                    [
                        METRICS[metric],
                        metric,
                        d,
                        repr(per_dataset[d]),
                        ranks[d],
                        "" if tau is None else repr(tau),
                    ]
                )


def _load_matrix(root: Path, spec: dict, dim: int, source: str) -> EmbeddingMatrix:
    try:
        rows = int(spec["rows"])
        labels = tuple((int(ci), str(tag)) for ci, tag in spec["labels"])
        file = spec["file"]
        name = spec["name"]
    except KeyError as e:
        raise BundleError(f"{source}: tensor entry missing key {e}") from e
    data = read_tensor_file(root / file, f"{source}:{name}", rows, dim)
    m = EmbeddingMatrix(dim=dim, rows=data, row_labels=labels)
    m.validate(f"{source}:{name}")
    return m


def _load_manifest(path: Path, allowed: tuple[str, ...]) -> dict[str, EmbeddingMatrix]:
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise BundleError(f"{path.name} is not valid JSON: {e}") from e
    dim = int(manifest.get("dim", 0))
    if dim <= 0:
        raise BundleError(f"{path.name}: missing or bad dim")
    out: dict[str, EmbeddingMatrix] = {}
    for spec in manifest.get("tensors", []):
        name = spec.get("name")
        if name not in allowed:
            raise BundleError(f"{path.name}: unknown tensor name {name!r}")
        if name in out:
            raise BundleError(f"{path.name}: duplicate tensor {name!r}")
        out[name] = _load_matrix(path.parent, spec, dim, path.stem)
    return out


def _single_row(matrices: dict[str, EmbeddingMatrix], name: str, source: str) -> np.ndarray:
    if name not in matrices:
        raise BundleError(f"{source}: missing {name!r} tensor")
    m = matrices[name]
    if m.num_rows != 1:
        raise BundleError(f"{source}: {name!r} must have exactly 1 row, has {m.num_rows}")
    return m.rows[0]


def load_difficulty_inputs(root: str | Path) -> tuple[list[DifficultyInputs], PretrainReference]:
    """Read a difficulty input directory.

    Layout: ``pretrain.json`` describes the pre-training reference (tensors
    named desc and optionally samples); every other ``*.json`` describes one
    dataset (tensors desc, prompts_specific, prompts_generic, optionally
    images), with a top-level "dataset" id. Tensor files are the standard raw
    float32 format, referenced relative to the directory.
    """
    rootp = Path(root)
    pretrain_path = rootp / "pretrain.json"
    if not pretrain_path.is_file():
        raise BundleError(f"no pretrain.json under {rootp}")
    pre = _load_manifest(pretrain_path, ("desc", "samples"))
    pretrain = PretrainReference(
        desc=_single_row(pre, "desc", "pretrain"), samples=pre.get("samples")
    )

    inputs = []
    for path in sorted(rootp.glob("*.json")):
        if path.name == "pretrain.json":
            continue
        dataset = json.loads(path.read_text()).get("dataset")
        if not dataset:
            raise BundleError(f"{path.name}: missing dataset id")
        mats = _load_manifest(path, ("desc", "prompts_specific", "prompts_generic", "images"))
        for required in ("prompts_specific", "prompts_generic"):
            if required not in mats:
                raise BundleError(f"{path.name}: missing {required!r} tensor")
        inputs.append(
            DifficultyInputs(
                dataset=dataset,
                desc=_single_row(mats, "desc", path.stem),
                prompts_specific=mats["prompts_specific"],
                prompts_generic=mats["prompts_generic"],
                images=mats.get("images"),
            )
        )
    if not inputs:
        raise BundleError(f"no dataset manifests under {rootp}")
    return inputs, pretrain
