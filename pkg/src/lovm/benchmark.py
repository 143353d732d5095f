"""Full benchmark runs: every baseline subset through both hold-out protocols.

Scores are expected to be precomputed (see the scores cache CSV); a full run
over b baselines costs b * (datasets + grid cells) small linear fits, which
keeps even the exhaustive ablation sweep cheap. All evaluation is pure, so
baselines can be fanned out across threads without changing any byte of the
output.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datastore import EmbeddingBundle, GroundTruthTable, ModelId
from .errors import TableError
from .metrics import kendall_tau_a
from .predictor import SubsetEval, ablate_subsets, evaluate_subset
from .scores import (
    NoiseConfig,
    ScoreTable,
    compute_scores,
    parse_feature_subset,
)

EVAL_HEADER = ["baseline", "dataset", "r5", "tau", "l1", "r2"]
ABLATION_HEADER = ["subset", "features", "R5", "tau", "L1"]
GROUPING_HEADER = ["model_name", "pretrain", "family", "pretrain_class", "size_class"]
SWEEP_HEADER = ["sigma", "kendall_tau", "pearson_r", "cells"]
TRENDS_FEATURES = ("text_acc1", "text_f1", "fisher", "silhouette", "dispersion", "synonym")
TRENDS_HEADER = ["family", "pretrain_class"] + list(TRENDS_FEATURES)

MEAN_ROW = "mean"


@dataclass(frozen=True)
class EvalReport:
    """Per-dataset and mean metrics for every requested baseline subset."""

    target: str
    baselines: tuple[str, ...]
    results: dict[str, SubsetEval]


def run_benchmark(
    scores: ScoreTable,
    gt: GroundTruthTable,
    baselines: tuple[str, ...],
    target: str,
    jobs: int = 1,
) -> EvalReport:
    """Evaluate each baseline label (e.g. "INB+G") over the whole grid."""
    if not baselines:
        raise TableError("no baselines requested")
    if len(set(baselines)) != len(baselines):
        raise TableError("duplicate baseline labels")
    subsets = {label: parse_feature_subset(label) for label in baselines}

    def run(label: str) -> SubsetEval:
        return evaluate_subset(scores, gt, subsets[label], target)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            evals = list(pool.map(run, baselines))
    else:
        evals = [run(label) for label in baselines]
    return EvalReport(
        target=target,
        baselines=tuple(baselines),
        results=dict(zip(baselines, evals)),
    )


def write_eval_csv(report: EvalReport, path: str | Path) -> None:
    """One row per (baseline, dataset), then a mean row per baseline.

    R2 is a global statistic over all predicted cells, so it appears only on
    the mean rows.
    """
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVAL_HEADER)
        for label in report.baselines:
            ev = report.results[label]
            for dataset in ev.per_dataset_r5:
                w.writerow(
                    [
                        label,
                        dataset,
                        repr(ev.per_dataset_r5[dataset]),
                        repr(ev.per_dataset_tau[dataset]),
                        repr(ev.per_dataset_l1[dataset]),
                        "",
                    ]
                )
            w.writerow(
                [label, MEAN_ROW, repr(ev.mean_r5), repr(ev.mean_tau), repr(ev.mean_l1), repr(ev.r2)]
            )


def run_ablation(
    scores: ScoreTable,
    gt: GroundTruthTable,
    feature_pool: tuple[str, ...],
    target: str,
) -> list[SubsetEval]:
    return ablate_subsets(scores, gt, feature_pool, target)


def write_ablation_csv(rows: list[SubsetEval], path: str | Path) -> None:
    """Rows in sweep order: 1-based index, '+'-joined feature names, means."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ABLATION_HEADER)
        for i, ev in enumerate(rows, start=1):
            w.writerow(
                [
                    i,
                    "+".join(ev.feature_names),
                    repr(ev.mean_r5),
                    repr(ev.mean_tau),
                    repr(ev.mean_l1),
                ]
            )


def load_grouping_csv(path: str | Path) -> dict[ModelId, tuple[str, str, str]]:
    """Model -> (family, pretrain_class, size_class) for trend aggregation."""
    p = Path(path)
    if not p.is_file():
        raise TableError(f"grouping file {p} is missing")
    out: dict[ModelId, tuple[str, str, str]] = {}
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GROUPING_HEADER:
            raise TableError(f"grouping header must be {','.join(GROUPING_HEADER)}")
        for i, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise TableError(f"line {i}: expected 5 fields, got {len(row)}")
            model = ModelId(row[0], row[1])
            if model in out:
                raise TableError(f"line {i}: duplicate grouping for {model}")
            if not all(row[2:]):
                raise TableError(f"line {i}: empty grouping field")
            out[model] = (row[2], row[3], row[4])
    return out


def score_trends(
    scores: ScoreTable, grouping: dict[ModelId, tuple[str, str, str]]
) -> list[tuple[str, str, dict[str, float]]]:
    """Mean of each text score per (family, pretrain_class) group.

    Averages pool every (model, dataset) row of every model in the group.
    Every scored model must appear in the grouping.
    """
    buckets: dict[tuple[str, str], list] = {}
    for (model, _dataset), vec in scores.rows.items():
        if model not in grouping:
            raise TableError(f"model {model} missing from grouping table")
        family, pretrain_class, _size = grouping[model]
        buckets.setdefault((family, pretrain_class), []).append(vec)
    out = []
    for (family, pretrain_class) in sorted(buckets):
        vecs = buckets[(family, pretrain_class)]
        means = {
            f: float(np.mean([getattr(v, f) for v in vecs])) for f in TRENDS_FEATURES
        }
        out.append((family, pretrain_class, means))
    return out


def write_trends_csv(rows: list[tuple[str, str, dict[str, float]]], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRENDS_HEADER)
        for family, pretrain_class, means in rows:
            w.writerow([family, pretrain_class] + [repr(means[f]) for f in TRENDS_FEATURES])


def sigma_sweep(
    bundles: list[tuple[ModelId, str, EmbeddingBundle]],
    gt: GroundTruthTable,
    sigmas: tuple[float, ...],
    seed: int,
    target: str,
) -> list[tuple[float, float, float, int]]:
    """Correlation of the text top-1 proxy with ground truth at each noise level.

    Returns (sigma, kendall tau-a, pearson r, cell count) rows. Both
    correlations are over all (model, dataset) cells present in both inputs.
    """
    if not sigmas:
        raise TableError("no sigma values given")
    if not bundles:
        raise TableError("no bundles given")
    rows = []
    for sigma in sigmas:
        proxies = []
        truths = []
        for model, dataset, bundle in bundles:
            if (model, dataset) not in gt.entries:
                raise TableError(f"no ground truth for {model} on {dataset}")
            vec = compute_scores(bundle, NoiseConfig(sigma=sigma, seed=seed))
            proxies.append(vec.text_acc1)
            truths.append(gt.value(model, dataset, target))
        tau = kendall_tau_a(proxies, truths)
        if np.std(proxies) == 0.0 or np.std(truths) == 0.0:
            pearson = 0.0
        else:
            pearson = float(np.corrcoef(proxies, truths)[0, 1])
        rows.append((float(sigma), tau, pearson, len(proxies)))
    return rows


def write_sweep_csv(rows: list[tuple[float, float, float, int]], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for sigma, tau, pearson, cells in rows:
            w.writerow([repr(sigma), repr(tau), repr(pearson), cells])
