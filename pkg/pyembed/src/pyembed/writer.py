"""Bundle directory writer: manifest.json plus raw float32 tensor files.

The on-disk format is the consumer's contract: row-major little-endian
32-bit floats, one file per tensor, described by a manifest carrying the
task spec and per-row class labels. Nothing here imports the consumer.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import EncodeError

Labels = list[tuple[int, str]]


def write_bundle(
    out_dir: str | Path,
    dim: int,
    task: dict,
    tensors: list[tuple[str, np.ndarray, Labels]],
    provenance: dict,
) -> Path:
    """Write each (name, rows, labels) tensor and a manifest describing them.

    Rows are stored unnormalized with unit_norm false; normalization is the
    reader's job, so there is exactly one normalization code path downstream.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, rows, labels in tensors:
        rows = np.ascontiguousarray(rows, dtype="<f4")
        if rows.ndim != 2 or rows.shape[1] != dim:
            raise EncodeError(f"{name}: expected shape (*, {dim}), got {tuple(rows.shape)}")
        if rows.shape[0] != len(labels):
            raise EncodeError(f"{name}: {rows.shape[0]} rows but {len(labels)} labels")
        if not np.isfinite(rows).all():
            raise EncodeError(f"{name}: non-finite value in encoder output")
        fname = f"{name}.f32"
        (root / fname).write_bytes(rows.tobytes())
        entries.append(
            {
                "name": name,
                "rows": int(rows.shape[0]),
                "file": fname,
                "labels": [[int(ci), str(tag)] for ci, tag in labels],
                "unit_norm": False,
            }
        )
    manifest = {"dim": int(dim), "tensors": entries, "task": task, "provenance": provenance}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return root
