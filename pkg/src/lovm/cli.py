"""Command-line front end: text generation, scoring, ranking, and reports.

Exit codes: 0 success, 1 domain error (single-line message on stderr),
2 usage error. With LOVM_CI=1 every noise-drawing command demands an explicit
--seed so CI runs cannot silently depend on a default.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import NoReturn

from . import benchmark, datastore, difficulty, predictor, scores, textgen
from .errors import LovmError

CI_ENV = "LOVM_CI"

TABLE1_BASELINES = "INB,C,G,C+G,INB+C,INB+G,INB+C+G"
DEFAULT_POOL = ",".join(scores.ALL_FEATURES)


def _fail(msg: str) -> NoReturn:
    raise LovmError(msg)


def _parse_model(text: str) -> datastore.ModelId:
    if ":" not in text:
        _fail(f"model must be name:pretrain, got {text!r}")
    name, pretrain = text.split(":", 1)
    return datastore.ModelId(name, pretrain)


def _parse_sigmas(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        _fail(f"bad sigma list {text!r}")
    if not values:
        _fail("empty sigma list")
    if any(v < 0 for v in values):
        _fail("sigma values must be >= 0")
    return values


def _require_seed(seed: int | None, randomized: bool) -> int:
    """Default the seed to 0, unless CI mode demands it be explicit."""
    if seed is None:
        if randomized and os.environ.get(CI_ENV) == "1":
            _fail(f"{CI_ENV}=1 requires an explicit --seed on randomized commands")
        return 0
    return seed


def _bundle_dirs(root: Path) -> list[Path]:
    if not root.is_dir():
        _fail(f"bundle root {root} is not a directory")
    dirs = sorted(p for p in root.iterdir() if (p / "manifest.json").is_file())
    if not dirs:
        _fail(f"no bundle directories under {root}")
    return dirs


def _bundle_identity(bundle) -> tuple[datastore.ModelId, str]:
    prov = bundle.provenance
    name, pretrain = prov.get("model_name"), prov.get("pretrain")
    if not name or not pretrain:
        _fail(
            f"bundle for dataset {bundle.task.dataset!r} has no model_name/pretrain provenance"
        )
    return datastore.ModelId(name, pretrain), bundle.task.dataset


def _load_bundles(root: Path) -> list[tuple[datastore.ModelId, str, object]]:
    out = []
    seen = set()
    for path in _bundle_dirs(root):
        bundle = datastore.load_bundle(path)
        model, dataset = _bundle_identity(bundle)
        if (model, dataset) in seen:
            _fail(f"two bundles for {model} on {dataset}")
        seen.add((model, dataset))
        out.append((model, dataset, bundle))
    return out


def _load_score_table(args) -> scores.ScoreTable:
    imagenet = (
        datastore.load_imagenet_csv(args.imagenet) if getattr(args, "imagenet", None) else None
    )
    return scores.load_scores_csv(args.scores, imagenet)


def cmd_gen_text(args) -> int:
    spec = datastore.load_task_spec(args.task_spec)
    config = textgen.ClientConfig(
        endpoint=args.endpoint,
        model=args.model,
        timeout=args.timeout,
        max_retries=args.retries,
        backoff=args.backoff,
        parallelism=args.jobs,
    )
    dataset = textgen.generate_text_dataset(spec, args.kind, config)
    textgen.write_text_dataset(dataset, args.out)
    return 0


def cmd_score(args) -> int:
    seed = _require_seed(args.seed, randomized=args.sigma > 0)
    cfg = scores.NoiseConfig(sigma=args.sigma, seed=seed)
    bundles = _load_bundles(Path(args.bundle))
    gt = datastore.load_gt_table(args.gt) if args.gt else None
    if gt is not None:
        for model, dataset, _ in bundles:
            if (model, dataset) not in gt.entries:
                _fail(f"bundle {model} on {dataset} has no ground-truth row")

    def work(item):
        model, dataset, bundle = item
        return (model, dataset), scores.compute_scores(bundle, cfg)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = dict(pool.map(work, bundles))
    else:
        rows = dict(work(item) for item in bundles)
    scores.write_scores_csv(scores.ScoreTable(rows=rows, imagenet_top1={}), args.out)
    return 0


def cmd_rank(args) -> int:
    table = _load_score_table(args)
    gt = datastore.load_gt_table(args.gt)
    names = scores.parse_feature_subset(args.features)
    ft = predictor.build_feature_table(table, gt, names, args.target)
    ranking = predictor.rank_models(ft, gt, args.dataset)[: args.top]
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["model_name", "pretrain", "predicted_score"])
    for model, score in ranking:
        writer.writerow([model.name, model.pretrain, repr(score)])
    return 0


def cmd_predict(args) -> int:
    table = _load_score_table(args)
    gt = datastore.load_gt_table(args.gt)
    names = scores.parse_feature_subset(args.features)
    ft = predictor.build_feature_table(table, gt, names, args.target)
    value = predictor.predict_performance(ft, gt, _parse_model(args.model), args.dataset)
    print(repr(value))
    return 0


def cmd_eval(args) -> int:
    table = _load_score_table(args)
    gt = datastore.load_gt_table(args.gt)
    baselines = tuple(tok for tok in args.baselines.split(",") if tok)
    report = benchmark.run_benchmark(table, gt, baselines, args.target, jobs=args.jobs)
    benchmark.write_eval_csv(report, args.out)
    return 0


def cmd_ablate(args) -> int:
    table = _load_score_table(args)
    gt = datastore.load_gt_table(args.gt)
    pool = tuple(tok for tok in args.pool.split(",") if tok)
    for name in pool:
        if name not in scores.ALL_FEATURES:
            _fail(f"unknown feature {name!r}, expected one of {','.join(scores.ALL_FEATURES)}")
    rows = benchmark.run_ablation(table, gt, pool, args.target)
    benchmark.write_ablation_csv(rows, args.out)
    return 0


def cmd_sigma_sweep(args) -> int:
    sigmas = _parse_sigmas(args.sigmas)
    seed = _require_seed(args.seed, randomized=any(s > 0 for s in sigmas))
    bundles = _load_bundles(Path(args.bundle))
    gt = datastore.load_gt_table(args.gt)
    rows = benchmark.sigma_sweep(bundles, gt, sigmas, seed, args.target)
    benchmark.write_sweep_csv(rows, args.out)
    return 0


def cmd_difficulty(args) -> int:
    inputs, pretrain = difficulty.load_difficulty_inputs(args.bundle)
    gt = datastore.load_gt_table(args.gt)
    if args.gt_model:
        model = _parse_model(args.gt_model)
        if model not in gt.models:
            _fail(f"model {model} not in ground-truth table")
    elif len(gt.models) == 1:
        model = gt.models[0]
    else:
        _fail("ground truth has several models; pick one with --gt-model name:pretrain")
    accuracies = {}
    for inp in inputs:
        if (model, inp.dataset) not in gt.entries:
            _fail(f"no ground truth for {model} on {inp.dataset}")
        accuracies[inp.dataset] = gt.value(model, inp.dataset, args.target)
    report = difficulty.build_report(inputs, pretrain, accuracies, args.temperature)
    difficulty.write_report_csv(report, args.out)
    return 0


def cmd_trends(args) -> int:
    table = scores.load_scores_csv(args.scores)
    grouping = benchmark.load_grouping_csv(args.grouping)
    rows = benchmark.score_trends(table, grouping)
    benchmark.write_trends_csv(rows, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lovm",
        description="Rank vision-language models and predict their accuracy from text alone.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-text", help="generate captions or synonyms via an LLM")
    p.add_argument("--task-spec", required=True, help="task spec JSON file")
    p.add_argument("--kind", required=True, choices=textgen.KINDS)
    p.add_argument("--out", required=True)
    p.add_argument("--endpoint", required=True, help="chat-completions API base URL")
    p.add_argument("--model", required=True, help="LLM model name")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=5)
    p.add_argument("--backoff", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=4, help="concurrent class requests")
    p.set_defaults(func=cmd_gen_text)

    p = sub.add_parser("score", help="compute text scores for every bundle under a directory")
    p.add_argument("--bundle", required=True, help="directory of bundle subdirectories")
    p.add_argument("--gt", default=None, help="ground-truth CSV used to validate coverage")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    for name, help_text in (
        ("rank", "rank models on one dataset"),
        ("predict", "predict one model's accuracy on one dataset"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scores", required=True, help="scores cache CSV")
        p.add_argument("--gt", required=True)
        p.add_argument("--imagenet", default=None, help="per-model imagenet accuracy CSV")
        p.add_argument("--features", required=True, help='feature subset, e.g. "INB+G+C"')
        p.add_argument("--dataset", required=True)
        p.add_argument("--target", choices=("top1", "mpcr"), default="top1")
        if name == "rank":
            p.add_argument("--top", type=int, default=5)
            p.set_defaults(func=cmd_rank)
        else:
            p.add_argument("--model", required=True, help="name:pretrain")
            p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="full benchmark report over baseline subsets")
    p.add_argument("--scores", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--imagenet", default=None)
    p.add_argument("--baselines", default=TABLE1_BASELINES)
    p.add_argument("--target", choices=("top1", "mpcr"), default="top1")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="evaluate every non-empty feature subset")
    p.add_argument("--scores", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--imagenet", default=None)
    p.add_argument("--pool", default=DEFAULT_POOL, help="comma-separated feature names")
    p.add_argument("--target", choices=("top1", "mpcr"), default="top1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sigma-sweep", help="correlation of the text proxy with GT per noise level")
    p.add_argument("--bundle", required=True, help="directory of bundle subdirectories")
    p.add_argument("--gt", required=True)
    p.add_argument("--sigmas", required=True, help="comma-separated noise levels")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--target", choices=("top1", "mpcr"), default="top1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sigma_sweep)

    p = sub.add_parser("difficulty", help="dataset difficulty estimators report")
    p.add_argument("--bundle", required=True, help="difficulty input directory")
    p.add_argument("--gt", required=True)
    p.add_argument("--gt-model", default=None, help="name:pretrain whose accuracy to rank against")
    p.add_argument("--temperature", type=float, default=difficulty.DEFAULT_TEMPERATURE)
    p.add_argument("--target", choices=("top1", "mpcr"), default="top1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_difficulty)

    p = sub.add_parser("trends", help="mean scores per model family and pretrain class")
    p.add_argument("--scores", required=True)
    p.add_argument("--grouping", required=True, help="model grouping CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trends)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LovmError as e:
        message = " ".join(str(e).split())
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
