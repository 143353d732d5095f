"""Acceptance gate: one test per release criterion.

Each test carries an ``acceptance`` marker; the terminal summary prints one
PASS/FAIL line per criterion. Tolerances here are pinned and must not be
loosened without a decision-log entry.
"""

from __future__ import annotations

import itertools
import os
import time
from math import comb
from pathlib import Path

import numpy as np
import pytest

from lovm.benchmark import run_benchmark
from lovm.cli import main
from lovm.datastore import (
    EmbeddingBundle,
    EmbeddingMatrix,
    GroundTruthTable,
    GtCell,
    TaskSpec,
    load_gt_table,
    write_bundle,
)
from lovm.difficulty import difficulty_rank_eval
from lovm.ensemble import ensemble_class_weights
from lovm.metrics import top5_recall, top5_tau
from lovm.predictor import (
    ablate_subsets,
    build_feature_table,
    evaluate_subset,
    fit_linear,
    predict_performance,
    rank_models,
)
from lovm.scores import (
    ALL_FEATURES,
    TEXT_FEATURES,
    NoiseConfig,
    compute_scores,
    cosine,
    corrupt,
    dispersion_score,
    fisher_score,
    score_pair,
    silhouette_score,
    synonym_score,
    text_classification,
)

from _synth import (
    dataset_ids,
    linear_fixture,
    make_gt,
    model_ids,
    orthogonal_bundle,
    permute_bundle_classes,
    quality_bundle,
    random_bundle,
    random_rotation,
    rotate_bundle,
)
from test_cli import write_gt_csv, write_imagenet_csv

SILENT = NoiseConfig(sigma=0.0)


def matrix(rows, labels):
    rows = np.asarray(rows, dtype=np.float64)
    return EmbeddingMatrix(rows.shape[1], rows, tuple(labels))


def unit_weights(rows):
    rows = np.asarray(rows, dtype=np.float64)
    labels = tuple((i, f"class_{i}") for i in range(rows.shape[0]))
    return EmbeddingMatrix(rows.shape[1], rows, labels, unit_norm=True)


def score_tuple(vec):
    return np.array([getattr(vec, f) for f in TEXT_FEATURES])


def brute_force_tau(xs, ys):
    num = 0
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            prod = (xs[i] - xs[j]) * (ys[i] - ys[j])
            num += (prod > 0) - (prod < 0)
    return num / comb(len(xs), 2)


def brute_force_top5_tau(predicted, actual):
    def top5(scores):
        order = list(scores)
        return sorted(order, key=lambda k: (-scores[k], order.index(k)))[:5]

    shared = [k for k in top5(predicted) if k in set(top5(actual))]
    if len(shared) < 2:
        return 0.0
    return brute_force_tau([predicted[k] for k in shared], [actual[k] for k in shared])


@pytest.mark.acceptance("metric oracle equivalence (exhaustive, sizes 5-7)")
def test_metric_oracle_equivalence():
    start = time.monotonic()
    for n in (5, 6, 7):
        actual_scores = [float(n - i) for i in range(n)]
        actual_map = {f"m{i}": actual_scores[i] for i in range(n)}
        for perm in itertools.permutations(range(n)):
            pred_map = {f"m{i}": float(perm[i]) for i in range(n)}
            got = top5_tau(pred_map, actual_map)
            want = brute_force_top5_tau(pred_map, actual_map)
            assert got == pytest.approx(want, abs=1e-12), (n, perm)

            keys = sorted(pred_map)
            ranked = difficulty_rank_eval(
                {k: pred_map[k] for k in keys}, {k: actual_map[k] for k in keys}
            )
            assert ranked == pytest.approx(
                brute_force_tau([pred_map[k] for k in keys], [actual_map[k] for k in keys]),
                abs=1e-12,
            )
    assert time.monotonic() - start < 10.0


@pytest.mark.acceptance("tau value-set over 10,000 random score maps")
def test_tau_value_set():
    rng = np.random.default_rng(42)
    allowed = {0.0}
    for m in range(2, 6):
        c = comb(m, 2)
        allowed.update(k / c for k in range(-c, c + 1))
    for _ in range(10_000):
        n = int(rng.integers(5, 10))
        pred = {f"m{i}": float(v) for i, v in enumerate(rng.normal(size=n))}
        act = {f"m{i}": float(v) for i, v in enumerate(rng.normal(size=n))}
        assert top5_tau(pred, act) in allowed


@pytest.mark.acceptance("score invariance: rotation, class permutation, scaling")
def test_score_invariance_suite():
    for instance in range(100):
        rng = np.random.default_rng(1000 + instance)
        dim = int(rng.integers(5, 10))
        bundle = random_bundle(
            rng,
            num_classes=int(rng.integers(2, 5)),
            templates_per_class=int(rng.integers(1, 3)),
            captions_per_class=int(rng.integers(2, 5)),
            dim=dim,
        )
        base = score_tuple(compute_scores(bundle, SILENT))

        for rotation in range(20):
            q = random_rotation(np.random.default_rng(instance * 20 + rotation), dim)
            rotated = score_tuple(compute_scores(rotate_bundle(bundle, q), SILENT))
            assert np.max(np.abs(rotated - base)) < 1e-5

        c = bundle.task.num_classes
        perm = tuple(int(x) for x in rng.permutation(c))
        permuted = score_tuple(compute_scores(permute_bundle_classes(bundle, perm), SILENT))
        assert np.max(np.abs(permuted - base)) < 1e-5

        scale = float(rng.uniform(0.1, 10.0))
        scaled_bundle = EmbeddingBundle(
            task=bundle.task,
            class_prompts=EmbeddingMatrix(
                dim, bundle.class_prompts.rows * scale, bundle.class_prompts.row_labels
            ),
            captions=EmbeddingMatrix(
                dim, bundle.captions.rows * scale, bundle.captions.row_labels
            ),
            synonyms=EmbeddingMatrix(
                dim, bundle.synonyms.rows * scale, bundle.synonyms.row_labels
            ),
        )
        scaled = score_tuple(compute_scores(scaled_bundle, SILENT))
        assert np.max(np.abs(scaled - base)) < 1e-5


@pytest.mark.acceptance("closed-form score fixtures at 1e-5")
def test_closed_form_fixtures():
    r = 1.0 / np.sqrt(2.0)

    assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(0.70711, abs=1e-5)
    assert cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-12)

    # corruption: sigma 0 identity, fixed-seed determinism, chi-square scale
    m = matrix(np.zeros((1000, 512)), [(0, f"r{i}") for i in range(1000)])
    assert corrupt(m, SILENT) is m
    noisy = corrupt(m, NoiseConfig(sigma=0.1, seed=0))
    again = corrupt(m, NoiseConfig(sigma=0.1, seed=0))
    assert np.array_equal(noisy.rows, again.rows)
    mean_sq = float(np.mean(np.sum(noisy.rows**2, axis=1)))
    assert abs(mean_sq - 5.12) <= 0.05 * 5.12

    # nearest-class accuracy 5/6 with macro F1 (0.8 + 6/7)/2
    w2 = unit_weights(np.eye(2))
    caps = matrix(
        [[1, 0], [1, 0], [0, 1], [0, 1], [0, 1], [0, 1]],
        [(0, "a"), (0, "b"), (0, "c"), (1, "a"), (1, "b"), (1, "c")],
    )
    acc1, f1 = text_classification(caps, w2, SILENT)
    assert acc1 == pytest.approx(5 / 6, abs=1e-5)
    assert f1 == pytest.approx(0.82857, abs=1e-5)

    # class-weight crowding
    assert fisher_score(unit_weights(np.eye(3))) == pytest.approx(0.0, abs=1e-12)
    assert fisher_score(unit_weights([[1, 0], [1, 0]])) == pytest.approx(1.0, abs=1e-12)
    w3 = unit_weights([[1.0, 0.0], [0.0, 1.0], [r, r]])
    assert fisher_score(w3) == pytest.approx(0.70711, abs=1e-5)

    # caption pull toward wrong classes
    sil_caps = matrix([[1.0, 0.0], [r, r], [0.0, 1.0]], [(0, "a"), (0, "b"), (1, "a")])
    assert silhouette_score(sil_caps, w2) == pytest.approx(0.17678, abs=1e-5)

    # caption and synonym tightness around own weight
    w23 = unit_weights(np.eye(2, 3))
    spread = matrix(
        [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        [(0, "a"), (0, "b"), (1, "a")],
    )
    assert dispersion_score(spread, w23) == pytest.approx(0.75, abs=1e-5)
    assert synonym_score(spread, w23) == pytest.approx(0.75, abs=1e-5)

    # composition on a perfectly separable bundle
    vec = compute_scores(orthogonal_bundle(), SILENT)
    assert score_tuple(vec) == pytest.approx([1.0, 1.0, 0.0, 0.0, 1.0, 1.0], abs=1e-12)

    # captions equal to the class weights collapse silhouette onto fisher
    rng = np.random.default_rng(3)
    base = random_bundle(rng, num_classes=4)
    weights = ensemble_class_weights(base.class_prompts, 4)
    degenerate = EmbeddingBundle(
        task=base.task,
        class_prompts=base.class_prompts,
        captions=EmbeddingMatrix(weights.dim, weights.rows, weights.row_labels),
        synonyms=EmbeddingMatrix(weights.dim, weights.rows, weights.row_labels),
    )
    dvec = score_pair(degenerate, weights, SILENT)
    assert dvec.silhouette == pytest.approx(fisher_score(weights), abs=1e-12)


@pytest.mark.acceptance("OLS: exact recovery, hand case, residual orthogonality")
def test_ols_correctness():
    model = fit_linear(np.array([[1.0], [2.0], [3.0]]), np.array([2.0, 4.0, 6.0]), ("f",))
    assert model.weights["f"] == pytest.approx(2.0, abs=1e-9)
    assert model.bias == pytest.approx(0.0, abs=1e-9)

    model = fit_linear(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 2.0]), ("f",))
    assert model.weights["f"] == pytest.approx(0.5, abs=1e-9)
    assert model.bias == pytest.approx(2.0 / 3.0, abs=1e-9)

    for instance in range(100):
        rng = np.random.default_rng(2000 + instance)
        n, k = int(rng.integers(8, 30)), int(rng.integers(1, 5))
        names = tuple(f"f{i}" for i in range(k))
        x = rng.normal(size=(n, k))

        w, b = rng.normal(size=k), float(rng.normal())
        exact = fit_linear(x, x @ w + b, names)
        np.testing.assert_allclose(exact.weight_vector(), w, atol=1e-9)
        assert exact.bias == pytest.approx(b, abs=1e-9)

        y = rng.uniform(size=n)
        fitted = fit_linear(x, y, names)
        resid = y - fitted.predict_raw(x)
        design = np.hstack([x, np.ones((n, 1))])
        for col in design.T:
            bound = 1e-6 * (np.linalg.norm(col) * np.linalg.norm(y) + 1.0)
            assert abs(float(col @ resid)) <= bound


@pytest.mark.acceptance("no-leakage sentinels leave outputs bit-identical")
def test_no_leakage_sentinels():
    rng = np.random.default_rng(5)
    models = model_ids(6)
    datasets = dataset_ids(4)
    feats = {(m, d): float(rng.uniform(0, 1)) for m in models for d in datasets}
    top1 = {k: float(np.clip(0.4 * v + 0.2 + rng.normal(0, 0.05), 0, 1)) for k, v in feats.items()}
    gt = make_gt(models, datasets, top1)

    from lovm.scores import ScoreTable, ScoreVector

    rows = {
        k: ScoreVector(v, 0.0, 0.0, 0.0, 0.0, 0.0) for k, v in feats.items()
    }
    scores = ScoreTable(rows=rows, imagenet_top1={})
    table = build_feature_table(scores, gt, ("text_acc1",), "top1")

    target = datasets[2]
    base_ranking = rank_models(table, gt, target)
    ranking_poisoned = GroundTruthTable(
        entries={
            k: (GtCell(99.0, 99.0) if k[1] == target else cell)
            for k, cell in gt.entries.items()
        },
        models=gt.models,
        datasets=gt.datasets,
        imagenet_top1={},
    )
    assert rank_models(table, ranking_poisoned, target) == base_ranking

    m, d = models[1], datasets[3]
    base_pred = predict_performance(table, gt, m, d)
    cell_poisoned = GroundTruthTable(
        entries={
            k: (GtCell(99.0, 99.0) if k[0] == m or k[1] == d else cell)
            for k, cell in gt.entries.items()
        },
        models=gt.models,
        datasets=gt.datasets,
        imagenet_top1={},
    )
    assert predict_performance(table, cell_poisoned, m, d) == base_pred


@pytest.mark.acceptance("end-to-end synthetic benchmark: L1 <= 0.02, R5 >= 0.8")
def test_end_to_end_synthetic():
    start = time.monotonic()
    scores, gt = linear_fixture(seed=0, n_models=6, n_datasets=5, noise=0.01)
    ev = evaluate_subset(scores, gt, ("text_acc1", "text_f1"), "top1")
    assert ev.mean_l1 <= 0.02
    assert ev.mean_r5 >= 0.8
    assert time.monotonic() - start < 30.0


@pytest.mark.acceptance("sigma sweep: mean text_acc1 non-increasing over {0, 0.1, 0.5}")
def test_sigma_sweep_monotone_degradation():
    bundle = quality_bundle(0.9, seed=0)
    means = []
    for sigma in (0.0, 0.1, 0.5):
        accs = [
            compute_scores(bundle, NoiseConfig(sigma=sigma, seed=seed)).text_acc1
            for seed in range(50)
        ]
        means.append(float(np.mean(accs)))
    assert means[0] >= means[1] - 1e-12
    assert means[1] >= means[2] - 1e-12


@pytest.mark.acceptance("ablation: 7-feature pool emits 127 rows matching direct eval")
def test_ablation_shape_and_cross_check():
    scores, gt = linear_fixture(seed=1)
    rows = ablate_subsets(scores, gt, ALL_FEATURES, "top1")
    assert len(rows) == 127

    # independent re-evaluation: drive the protocols directly per subset
    for ev in rows:
        table = build_feature_table(scores, gt, ev.feature_names, "top1")
        r5s, taus, l1s = [], [], []
        for d in gt.datasets:
            ranked = dict(rank_models(table, gt, d))
            predicted = {m: ranked[m] for m in gt.models}
            actual = {m: gt.value(m, d, "top1") for m in gt.models}
            r5s.append(top5_recall(predicted, actual))
            taus.append(top5_tau(predicted, actual))
            l1s.append(
                np.mean(
                    [
                        abs(predict_performance(table, gt, m, d) - gt.value(m, d, "top1"))
                        for m in gt.models
                    ]
                )
            )
        assert ev.mean_r5 == pytest.approx(np.mean(r5s), abs=1e-9)
        assert ev.mean_tau == pytest.approx(np.mean(taus), abs=1e-9)
        assert ev.mean_l1 == pytest.approx(np.mean(l1s), abs=1e-9)


@pytest.mark.acceptance("CLI determinism: --jobs 1 vs --jobs 8 byte-identical")
def test_cli_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("LOVM_CI", raising=False)
    scores, gt = linear_fixture(seed=2)
    from lovm.scores import write_scores_csv

    write_scores_csv(scores, tmp_path / "scores.csv")
    write_gt_csv(tmp_path / "gt.csv", gt)
    write_imagenet_csv(tmp_path / "imagenet.csv", scores.imagenet_top1)

    bundles = tmp_path / "bundles"
    bundles.mkdir()
    gt_rows = {}
    for i, m in enumerate(gt.models[:3]):
        for j, d in enumerate(("bd-0", "bd-1")):
            base = quality_bundle(0.85 - 0.2 * i - 0.05 * j, seed=7 * i + j)
            bundle = EmbeddingBundle(
                task=TaskSpec(d, base.task.class_names, base.task.domain, base.task.task),
                class_prompts=base.class_prompts,
                captions=base.captions,
                synonyms=base.synonyms,
                provenance={"model_name": m.name, "pretrain": m.pretrain},
            )
            write_bundle(bundle, bundles / f"{m.name}_{d}")
            gt_rows[(m, d)] = 0.8 - 0.2 * i

    for jobs, out in (("1", "score1.csv"), ("8", "score8.csv")):
        assert main([
            "score", "--bundle", str(bundles), "--sigma", "0.1", "--seed", "11",
            "--jobs", jobs, "--out", str(tmp_path / out),
        ]) == 0
    assert (tmp_path / "score1.csv").read_bytes() == (tmp_path / "score8.csv").read_bytes()

    for jobs, out in (("1", "eval1.csv"), ("8", "eval8.csv")):
        assert main([
            "eval", "--scores", str(tmp_path / "scores.csv"), "--gt", str(tmp_path / "gt.csv"),
            "--imagenet", str(tmp_path / "imagenet.csv"),
            "--jobs", jobs, "--out", str(tmp_path / out),
        ]) == 0
    assert (tmp_path / "eval1.csv").read_bytes() == (tmp_path / "eval8.csv").read_bytes()


@pytest.mark.acceptance("encoder bundles load cleanly, rerun byte-identical")
def test_encoder_output_contract(tmp_path):
    pytest.importorskip("pyembed")
    import json

    from lovm.datastore import load_bundle
    from pyembed.encode import encode_bundle

    (tmp_path / "task.json").write_text(json.dumps({
        "dataset": "pets", "classes": ["dog", "cat"],
        "domain": "pet photos", "task": "animal classification",
    }))
    (tmp_path / "captions.json").write_text(json.dumps({
        "kind": "captions",
        "classes": {"dog": ["a dog outside", "a dog asleep"], "cat": ["a cat indoors"]},
    }))
    (tmp_path / "synonyms.json").write_text(json.dumps({
        "kind": "synonyms", "classes": {"dog": ["puppy"], "cat": ["kitten", "tabby"]},
    }))
    (tmp_path / "templates.txt").write_text(
        "a photo of a {}.\na drawing of a {}.\nthe {} in the wild.\n"
    )

    def encode(out):
        return encode_bundle(
            "ViT-B-32:laion2b_s34b_b79k",
            tmp_path / "task.json", tmp_path / "captions.json",
            tmp_path / "synonyms.json", tmp_path / "templates.txt",
            out, backend="hash", dim=512,
        )

    first, second = encode(tmp_path / "a"), encode(tmp_path / "b")
    bundle = load_bundle(first)  # raises on any validation problem
    assert bundle.class_prompts.rows.shape == (2 * 3, 512)
    for name in ("class_prompts", "captions", "synonyms"):
        assert (first / f"{name}.f32").read_bytes() == (second / f"{name}.f32").read_bytes()


@pytest.mark.acceptance("real ViT-B/32 score ranges (optional, env-gated)")
@pytest.mark.skipif(
    not os.environ.get("LOVM_REAL_CLIP_BUNDLE"),
    reason="set LOVM_REAL_CLIP_BUNDLE to a bundle directory built with real ViT-B/32 weights",
)
def test_real_clip_score_ranges():
    from lovm.datastore import load_bundle

    bundle = load_bundle(os.environ["LOVM_REAL_CLIP_BUNDLE"])
    weights = ensemble_class_weights(bundle.class_prompts, bundle.task.num_classes)
    assert 0.5 <= fisher_score(weights) <= 0.95
    assert 0.5 <= dispersion_score(bundle.captions, weights) <= 0.95


RELEASED_DIR_ENV = "LOVM_BENCHMARK_DIR"


@pytest.mark.acceptance("released-table INB reproduction (optional, env-gated)")
@pytest.mark.skipif(
    not os.environ.get(RELEASED_DIR_ENV),
    reason=f"set {RELEASED_DIR_ENV} to a directory holding the released gt.csv and imagenet.csv",
)
def test_released_table_inb_numbers():
    root = Path(os.environ[RELEASED_DIR_ENV])
    gt = load_gt_table(root / "gt.csv", root / "imagenet.csv")

    from lovm.scores import ScoreTable, ScoreVector

    filler = ScoreVector(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    scores = ScoreTable(
        rows={(m, d): filler for m in gt.models for d in gt.datasets},
        imagenet_top1=dict(gt.imagenet_top1),
    )
    expected = {"mpcr": (0.504, 0.186, 0.228), "top1": (0.452, 0.177, 0.220)}
    for target, (r5, tau, l1) in expected.items():
        report = run_benchmark(scores, gt, ("INB",), target)
        ev = report.results["INB"]
        assert ev.mean_r5 == pytest.approx(r5, abs=5e-4)
        assert ev.mean_tau == pytest.approx(tau, abs=5e-4)
        assert ev.mean_l1 == pytest.approx(l1, abs=5e-4)
