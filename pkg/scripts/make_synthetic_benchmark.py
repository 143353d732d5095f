#!/usr/bin/env python3
"""Generate a self-contained synthetic benchmark workspace.

Writes a bundle tree plus the three CSV side tables (ground truth, reference
accuracy, grouping) so every CLI subcommand can be exercised without any real
embeddings. Model strength and dataset difficulty are latent scalars; caption
tightness inside each bundle tracks their difference, so text scores computed
from the bundles genuinely correlate with the synthetic ground truth.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from lovm.datastore import EmbeddingBundle, EmbeddingMatrix, TaskSpec, write_bundle

FAMILIES = (("vit-b", "laion2b", "vit", "large-scale"), ("rn50", "openai-wit", "resnet", "mid-scale"))

CLASS_POOLS = (
    ("airliner", "biplane", "glider", "helicopter"),
    ("beagle", "siamese", "goldfish", "parrot"),
    ("sedan", "pickup", "minivan", "coupe"),
    ("oak", "willow", "cactus", "fern"),
    ("violin", "trumpet", "cello", "flute"),
    ("glacier", "dune", "marsh", "mesa"),
)


def model_grid(n: int):
    out = []
    for i in range(n):
        name, pretrain, family, pclass = FAMILIES[i % len(FAMILIES)]
        out.append((f"{name}-{i}", pretrain, family, pclass))
    return out


def build_bundle(rng, dataset, class_names, quality, dim, captions_per_class):
    c = len(class_names)
    directions = np.eye(dim)[:c]
    spread = max(1.05 - quality, 0.05)
    prompts, prompt_labels = [], []
    for cls in range(c):
        for t in range(2):
            prompts.append(directions[cls] + 0.05 * rng.normal(size=dim))
            prompt_labels.append((cls, f"t{t}"))
    caps, cap_labels = [], []
    for cls in range(c):
        for k in range(captions_per_class):
            caps.append(directions[cls] + spread * rng.normal(size=dim))
            cap_labels.append((cls, f"c{k}"))
    syns, syn_labels = [], []
    for cls in range(c):
        for k in range(2):
            syns.append(directions[cls] + 0.1 * rng.normal(size=dim))
            syn_labels.append((cls, f"s{k}"))
    task = TaskSpec(dataset=dataset, class_names=tuple(class_names),
                    domain="synthetic imagery", task="object classification")
    return EmbeddingBundle(
        task=task,
        class_prompts=EmbeddingMatrix(dim, np.stack(prompts), tuple(prompt_labels)),
        captions=EmbeddingMatrix(dim, np.stack(caps), tuple(cap_labels)),
        synonyms=EmbeddingMatrix(dim, np.stack(syns), tuple(syn_labels)),
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True, help="workspace directory to create")
    ap.add_argument("--models", type=int, default=8)
    ap.add_argument("--datasets", type=int, default=4)
    ap.add_argument("--captions", type=int, default=6, help="captions per class")
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if args.datasets > len(CLASS_POOLS):
        ap.error(f"--datasets must be <= {len(CLASS_POOLS)}")
    root = Path(args.out)
    bundles = root / "bundles"
    bundles.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    models = model_grid(args.models)
    qualities = {m[0]: float(rng.uniform(0.45, 0.95)) for m in models}
    datasets = [f"synth-{CLASS_POOLS[j][0]}" for j in range(args.datasets)]
    difficulty = {d: float(rng.uniform(0.0, 0.35)) for d in datasets}

    gt_rows, imagenet_rows, grouping_rows = [], [], []
    for name, pretrain, family, pclass in models:
        q = qualities[name]
        imagenet_rows.append([name, pretrain, repr(float(np.clip(q + rng.normal(0, 0.02), 0, 1)))])
        grouping_rows.append([name, pretrain, family, pclass, "base"])
        for j, d in enumerate(datasets):
            effective = np.clip(q - difficulty[d], 0.05, 1.0)
            bundle = build_bundle(
                rng, d, CLASS_POOLS[j], effective, args.dim, args.captions
            )
            bundle = EmbeddingBundle(
                task=bundle.task,
                class_prompts=bundle.class_prompts,
                captions=bundle.captions,
                synonyms=bundle.synonyms,
                provenance={"model_name": name, "pretrain": pretrain},
            )
            write_bundle(bundle, bundles / f"{name}_{d}")
            top1 = float(np.clip(effective + rng.normal(0, 0.02), 0, 1))
            mpcr = float(np.clip(top1 + rng.normal(0, 0.01), 0, 1))
            gt_rows.append([name, pretrain, d, repr(top1), repr(mpcr)])

    with (root / "gt.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model_name", "pretrain", "dataset", "top1_accuracy", "mean_per_class_recall"])
        w.writerows(gt_rows)
    with (root / "imagenet.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model_name", "pretrain", "imagenet_top1"])
        w.writerows(imagenet_rows)
    with (root / "grouping.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model_name", "pretrain", "family", "pretrain_class", "size_class"])
        w.writerows(grouping_rows)

    n_bundles = len(models) * len(datasets)
    print(f"wrote {n_bundles} bundles and 3 CSVs under {root}")
    print("next steps:")
    print(f"  lovm score --bundle {bundles} --sigma 0.1 --seed 0 "
          f"--out {root / 'scores.csv'}")
    print(f"  lovm eval --scores {root / 'scores.csv'} --gt {root / 'gt.csv'} "
          f"--imagenet {root / 'imagenet.csv'} --out {root / 'eval.csv'}")
    print(f"  lovm rank --scores {root / 'scores.csv'} --gt {root / 'gt.csv'} "
          f"--imagenet {root / 'imagenet.csv'} --features INB+C+G --dataset {datasets[0]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
