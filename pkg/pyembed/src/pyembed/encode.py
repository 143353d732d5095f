"""Core operation: encode a task's texts and write one bundle directory."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import texts as T
from .backends import make_encoder, parse_model_spec
from .errors import EncodeError
from .writer import write_bundle


def plan_rows(task: dict, captions: dict, synonyms: dict, templates: list[str]):
    """Lay out (name, texts, labels) for the three text tensors, class-major.

    class_prompts gets one row per template per class, kept pre-ensemble.
    Captions are embedded verbatim. Synonyms go through every template with
    the synonym substituted, so each class contributes n_syn * n_templates rows.
    """
    prompt_texts, prompt_labels = [], []
    cap_texts, cap_labels = [], []
    syn_texts, syn_labels = [], []
    for ci, cname in enumerate(task["classes"]):
        for ti, tmpl in enumerate(templates):
            prompt_texts.append(T.fill(tmpl, cname))
            prompt_labels.append((ci, f"t{ti}"))
        for k, cap in enumerate(captions[cname]):
            cap_texts.append(cap)
            cap_labels.append((ci, f"c{k}"))
        for si, syn in enumerate(synonyms[cname]):
            for ti, tmpl in enumerate(templates):
                syn_texts.append(T.fill(tmpl, syn))
                syn_labels.append((ci, f"s{si}-t{ti}"))
    return (
        ("class_prompts", prompt_texts, prompt_labels),
        ("captions", cap_texts, cap_labels),
        ("synonyms", syn_texts, syn_labels),
    )


def load_image_rows(path: str | Path, dim: int, num_classes: int):
    """Pass-through for precomputed image embeddings; nothing is computed here.

    The sidecar JSON is {"file": relative .f32 path, "labels": [[class_index,
    tag], ...]}; the referenced file holds row-major little-endian float32.
    """
    p = Path(path)
    if not p.is_file():
        raise EncodeError(f"images sidecar {p} is missing")
    try:
        d = json.loads(p.read_text())
        fname, raw_labels = d["file"], d["labels"]
    except (json.JSONDecodeError, KeyError) as e:
        raise EncodeError(f"images sidecar: bad or missing field ({e})") from e
    labels = [(int(ci), str(tag)) for ci, tag in raw_labels]
    for ci, _ in labels:
        if not 0 <= ci < num_classes:
            raise EncodeError(f"images sidecar: class index {ci} out of range")
    blob = (p.parent / fname).read_bytes()
    if len(blob) % (4 * dim) != 0:
        raise EncodeError(f"images file {fname}: size {len(blob)} not a multiple of 4*{dim}")
    rows = np.frombuffer(blob, dtype="<f4").reshape(-1, dim).astype(np.float64)
    if rows.shape[0] != len(labels):
        raise EncodeError(f"images file {fname}: {rows.shape[0]} rows but {len(labels)} labels")
    return rows, labels


def encode_bundle(
    model_spec: str,
    task_path: str | Path,
    captions_path: str | Path,
    synonyms_path: str | Path,
    templates_path: str | Path,
    out_dir: str | Path,
    *,
    backend: str = "open-clip",
    dim: int = 512,
    batch_size: int = 256,
    device: str = "cpu",
    images_path: str | Path | None = None,
) -> Path:
    name, pretrain = parse_model_spec(model_spec)
    task = T.load_task(task_path)
    templates = T.load_templates(templates_path)
    captions = T.load_text_dataset(captions_path, "captions", task["classes"])
    synonyms = T.load_text_dataset(synonyms_path, "synonyms", task["classes"])
    encoder = make_encoder(
        backend, name, pretrain, dim=dim, batch_size=batch_size, device=device
    )

    tensors, out_dim = [], None
    for tname, txts, labels in plan_rows(task, captions, synonyms, templates):
        rows = encoder.encode(txts)
        if out_dim is None:
            out_dim = int(rows.shape[1])
        tensors.append((tname, rows, labels))
    if images_path is not None:
        rows, labels = load_image_rows(images_path, out_dim, len(task["classes"]))
        tensors.append(("images", rows, labels))

    provenance = {
        "model_name": name,
        "pretrain": pretrain,
        "backend": backend,
        "captions_raw": True,
    }
    return write_bundle(out_dir, out_dim, task, tensors, provenance)
