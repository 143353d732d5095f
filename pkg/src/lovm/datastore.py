"""On-disk formats and in-memory types shared by every other module.

An embedding bundle is a directory holding ``manifest.json`` plus one raw
tensor file per matrix. Tensor files are row-major 32-bit IEEE-754
little-endian floats, so any language can write them bit-exactly. All loaded
objects are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BundleError, TableError

TENSOR_NAMES = ("class_prompts", "captions", "synonyms", "images")

GT_HEADER = ["model_name", "pretrain", "dataset", "top1_accuracy", "mean_per_class_recall"]
IMAGENET_HEADER = ["model_name", "pretrain", "imagenet_top1"]


@dataclass(frozen=True)
class ModelId:
    name: str
    pretrain: str

    def __post_init__(self):
        if not self.name or not self.pretrain:
            raise TableError(f"model id must be non-empty, got {self!r}")

    def __str__(self) -> str:
        return f"{self.name}:{self.pretrain}"


@dataclass(frozen=True)
class TaskSpec:
    dataset: str
    class_names: tuple[str, ...]
    domain: str
    task: str

    def __post_init__(self):
        if not self.dataset:
            raise BundleError("task spec: dataset id must be non-empty")
        if len(self.class_names) < 2:
            raise BundleError(f"task spec: need at least 2 classes, got {len(self.class_names)}")
        if any(not c for c in self.class_names):
            raise BundleError("task spec: class names must be non-empty")
        if len(set(self.class_names)) != len(self.class_names):
            raise BundleError("task spec: class names must be unique")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @staticmethod
    def from_dict(d: dict) -> "TaskSpec":
        try:
            return TaskSpec(
                dataset=d["dataset"],
                class_names=tuple(d["classes"]),
                domain=d["domain"],
                task=d["task"],
            )
        except KeyError as e:
            raise BundleError(f"task spec: missing field {e}") from e

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "classes": list(self.class_names),
            "domain": self.domain,
            "task": self.task,
        }


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Labeled rows of n-dim float vectors.

    ``rows`` is kept float64 in memory; serialization truncates to float32,
    which is the storage precision of the bundle format.
    """

    dim: int
    rows: np.ndarray
    row_labels: tuple[tuple[int, str], ...]
    unit_norm: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.float64))
        self.rows.setflags(write=False)

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]

    def class_indices(self) -> np.ndarray:
        return np.array([ci for ci, _ in self.row_labels], dtype=np.int64)

    def rows_for_class(self, class_index: int) -> np.ndarray:
        mask = self.class_indices() == class_index
        return self.rows[mask]

    def validate(self, name: str, num_classes: int | None = None) -> None:
        if self.dim <= 0:
            raise BundleError(f"{name}: dim must be positive, got {self.dim}")
        if self.rows.ndim != 2 or self.rows.shape[1] != self.dim:
            raise BundleError(f"{name}: expected shape (R, {self.dim}), got {self.rows.shape}")
        if len(self.row_labels) != self.num_rows:
            raise BundleError(
                f"{name}: {len(self.row_labels)} labels for {self.num_rows} rows"
            )
        bad = np.flatnonzero(~np.isfinite(self.rows).all(axis=1))
        if bad.size:
            raise BundleError(f"{name}: non-finite value at row {int(bad[0])}")
        if num_classes is not None:
            for r, (ci, _) in enumerate(self.row_labels):
                if not 0 <= ci < num_classes:
                    raise BundleError(
                        f"{name}: class index {ci} out of range [0, {num_classes}) at row {r}"
                    )
        if self.unit_norm:
            norms = np.linalg.norm(self.rows, axis=1)
            off = np.flatnonzero(np.abs(norms - 1.0) > 1e-5)
            if off.size:
                raise BundleError(
                    f"{name}: flagged unit_norm but row {int(off[0])} has norm {norms[off[0]]:.6g}"
                )


@dataclass(frozen=True)
class EmbeddingBundle:
    task: TaskSpec
    class_prompts: EmbeddingMatrix
    captions: EmbeddingMatrix
    synonyms: EmbeddingMatrix
    images: EmbeddingMatrix | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.class_prompts.dim

    def matrices(self) -> dict[str, EmbeddingMatrix]:
        out = {
            "class_prompts": self.class_prompts,
            "captions": self.captions,
            "synonyms": self.synonyms,
        }
        if self.images is not None:
            out["images"] = self.images
        return out

    def validate(self) -> None:
        c = self.task.num_classes
        for name, m in self.matrices().items():
            m.validate(name, num_classes=c)
            if m.dim != self.dim:
                raise BundleError(f"{name}: dim {m.dim} differs from bundle dim {self.dim}")
        for name in ("captions", "synonyms"):
            covered = set(self.matrices()[name].class_indices().tolist())
            missing = sorted(set(range(c)) - covered)
            if missing:
                raise BundleError(f"{name}: no rows for class index {missing[0]}")


@dataclass(frozen=True)
class GtCell:
    top1: float
    mpcr: float


@dataclass(frozen=True)
class GroundTruthTable:
    """Grid of image-based evaluations: (model, dataset) -> accuracies in [0, 1]."""

    entries: dict[tuple[ModelId, str], GtCell]
    models: tuple[ModelId, ...]
    datasets: tuple[str, ...]
    imagenet_top1: dict[ModelId, float] = field(default_factory=dict)

    @property
    def dense(self) -> bool:
        return len(self.entries) == len(self.models) * len(self.datasets)

    def value(self, model: ModelId, dataset: str, target: str) -> float:
        cell = self.entries[(model, dataset)]
        return cell.top1 if target == "top1" else cell.mpcr

    def with_imagenet(self, imagenet_top1: dict[ModelId, float]) -> "GroundTruthTable":
        return GroundTruthTable(self.entries, self.models, self.datasets, dict(imagenet_top1))


def l2_normalize(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Rescale every row to unit L2 norm, preserving direction."""
    norms = np.linalg.norm(m.rows, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise BundleError(f"cannot normalize zero row at index {int(zero[0])}")
    return EmbeddingMatrix(
        dim=m.dim,
        rows=m.rows / norms[:, None],
        row_labels=m.row_labels,
        unit_norm=True,
    )


def read_tensor_file(path: Path, name: str, rows: int, dim: int) -> np.ndarray:
    if not path.is_file():
        raise BundleError(f"{name}: tensor file {path} is missing")
    raw = path.read_bytes()
    expected = rows * dim * 4
    if len(raw) != expected:
        raise BundleError(
            f"{name}: tensor file holds {len(raw)} bytes, expected {expected} "
            f"({rows} rows x {dim} floats)"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(rows, dim).astype(np.float64)


def load_bundle(path: str | Path) -> EmbeddingBundle:
    """Load and fully validate an embedding bundle directory."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise BundleError(f"no manifest.json under {root}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise BundleError(f"manifest.json is not valid JSON: {e}") from e

    try:
        dim = int(manifest["dim"])
        tensor_specs = manifest["tensors"]
        task = TaskSpec.from_dict(manifest["task"])
    except KeyError as e:
        raise BundleError(f"manifest.json: missing key {e}") from e

    matrices: dict[str, EmbeddingMatrix] = {}
    for spec in tensor_specs:
        name = spec.get("name")
        if name not in TENSOR_NAMES:
            raise BundleError(f"unknown tensor name {name!r} in manifest")
        if name in matrices:
            raise BundleError(f"duplicate tensor {name!r} in manifest")
        rows = int(spec["rows"])
        labels = tuple((int(ci), str(tag)) for ci, tag in spec["labels"])
        data = read_tensor_file(root / spec["file"], name, rows, dim)
        matrices[name] = EmbeddingMatrix(
            dim=dim,
            rows=data,
            row_labels=labels,
            unit_norm=bool(spec.get("unit_norm", False)),
        )

    for required in ("class_prompts", "captions", "synonyms"):
        if required not in matrices:
            raise BundleError(f"manifest has no {required!r} tensor")

    bundle = EmbeddingBundle(
        task=task,
        class_prompts=matrices["class_prompts"],
        captions=matrices["captions"],
        synonyms=matrices["synonyms"],
        images=matrices.get("images"),
        provenance=dict(manifest.get("provenance", {})),
    )
    bundle.validate()
    return bundle


def write_bundle(bundle: EmbeddingBundle, path: str | Path) -> None:
    """Write a validated bundle as manifest.json plus one float32 file per tensor."""
    bundle.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, m in bundle.matrices().items():
        fname = f"{name}.f32"
        (root / fname).write_bytes(np.ascontiguousarray(m.rows, dtype="<f4").tobytes())
        tensors.append(
            {
                "name": name,
                "rows": m.num_rows,
                "file": fname,
                "labels": [[ci, tag] for ci, tag in m.row_labels],
                "unit_norm": m.unit_norm,
            }
        )
    manifest = {
        "dim": bundle.dim,
        "tensors": tensors,
        "task": bundle.task.to_dict(),
        "provenance": bundle.provenance,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_task_spec(path: str | Path) -> TaskSpec:
    """Load a standalone task spec JSON ({"dataset", "classes", "domain", "task"})."""
    p = Path(path)
    if not p.is_file():
        raise BundleError(f"task spec file {p} is missing")
    try:
        return TaskSpec.from_dict(json.loads(p.read_text()))
    except json.JSONDecodeError as e:
        raise BundleError(f"task spec file is not valid JSON: {e}") from e


def _check_unit_interval(value: str, what: str, line: int) -> float:
    try:
        x = float(value)
    except ValueError as e:
        raise TableError(f"line {line}: {what} is not a number: {value!r}") from e
    if not math.isfinite(x) or not 0.0 <= x <= 1.0:
        raise TableError(f"line {line}: {what} {x} outside [0, 1]")
    return x


def load_gt_table(path: str | Path, imagenet_path: str | Path | None = None) -> GroundTruthTable:
    """Load the ground-truth accuracy CSV, optionally joining the ImageNet feature CSV.

    The table reports whether the (model, dataset) grid is dense via
    ``GroundTruthTable.dense``; the hold-out protocols require density but
    loading does not.
    """
    p = Path(path)
    if not p.is_file():
        raise TableError(f"ground-truth file {p} is missing")
    entries: dict[tuple[ModelId, str], GtCell] = {}
    models: list[ModelId] = []
    datasets: list[str] = []
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GT_HEADER:
            raise TableError(f"ground-truth header must be {','.join(GT_HEADER)}")
        for i, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise TableError(f"line {i}: expected 5 fields, got {len(row)}")
            model = ModelId(row[0], row[1])
            dataset = row[2]
            if not dataset:
                raise TableError(f"line {i}: empty dataset id")
            top1 = _check_unit_interval(row[3], "top1_accuracy", i)
            mpcr = _check_unit_interval(row[4], "mean_per_class_recall", i)
            key = (model, dataset)
            if key in entries:
                raise TableError(f"line {i}: duplicate entry for {model} on {dataset}")
            entries[key] = GtCell(top1=top1, mpcr=mpcr)
            if model not in models:
                models.append(model)
            if dataset not in datasets:
                datasets.append(dataset)
    table = GroundTruthTable(entries=entries, models=tuple(models), datasets=tuple(datasets))
    if imagenet_path is not None:
        table = table.with_imagenet(load_imagenet_csv(imagenet_path))
    return table


def load_imagenet_csv(path: str | Path) -> dict[ModelId, float]:
    """Load the per-model ImageNet accuracy feature CSV."""
    p = Path(path)
    if not p.is_file():
        raise TableError(f"imagenet feature file {p} is missing")
    out: dict[ModelId, float] = {}
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != IMAGENET_HEADER:
            raise TableError(f"imagenet feature header must be {','.join(IMAGENET_HEADER)}")
        for i, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise TableError(f"line {i}: expected 3 fields, got {len(row)}")
            model = ModelId(row[0], row[1])
            if model in out:
                raise TableError(f"line {i}: duplicate imagenet entry for {model}")
            out[model] = _check_unit_interval(row[2], "imagenet_top1", i)
    return out
