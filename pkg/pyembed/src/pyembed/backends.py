"""Text encoders: the open_clip bridge and a deterministic hash stand-in."""

from __future__ import annotations

import hashlib
from collections.abc import Callable, Sequence

import numpy as np

from .errors import EncodeError


def parse_model_spec(spec: str) -> tuple[str, str]:
    name, sep, pretrain = spec.partition(":")
    if not sep or not name or not pretrain:
        raise EncodeError(f"model spec must look like name:pretrain, got {spec!r}")
    return name, pretrain


def _looks_like_oom(exc: BaseException) -> bool:
    return isinstance(exc, MemoryError) or "out of memory" in str(exc).lower()


def run_batches(
    texts: Sequence[str],
    encode_batch: Callable[[Sequence[str]], np.ndarray],
    batch_size: int,
) -> np.ndarray:
    """Encode in slices, halving the slice length whenever memory runs out."""
    if batch_size < 1:
        raise EncodeError(f"batch size must be >= 1, got {batch_size}")
    if not texts:
        raise EncodeError("nothing to encode")
    chunks, start = [], 0
    while start < len(texts):
        try:
            rows = encode_batch(texts[start : start + batch_size])
        except (MemoryError, RuntimeError) as e:
            if not _looks_like_oom(e):
                raise
            if batch_size == 1:
                raise EncodeError("out of memory even at batch size 1") from e
            batch_size //= 2
            continue
        rows = np.asarray(rows, dtype=np.float64)
        chunks.append(rows)
        start += rows.shape[0]
    return np.vstack(chunks)


class HashEncoder:
    """Offline stand-in: each text maps to a fixed pseudo-random vector.

    Rows are keyed by (model, pretrain, dim, text) through SHA-256, so
    distinct models disagree on every text while reruns stay byte-identical.
    Useful for plumbing tests and demo workspaces; carries no semantics.
    """

    def __init__(self, name: str, pretrain: str, dim: int = 512):
        if dim < 2:
            raise EncodeError(f"dim must be >= 2, got {dim}")
        self.name = name
        self.pretrain = pretrain
        self.dim = dim

    def _row(self, text: str) -> np.ndarray:
        key = f"{self.name}:{self.pretrain}:{self.dim}:{text}".encode()
        seed = int.from_bytes(hashlib.sha256(key).digest()[:16], "little")
        rng = np.random.Generator(np.random.Philox(key=seed))
        return rng.normal(size=self.dim)

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            raise EncodeError("nothing to encode")
        return np.stack([self._row(t) for t in texts])


class OpenClipEncoder:
    """Bridge to an open_clip text tower running in inference mode."""

    def __init__(self, name: str, pretrain: str, batch_size: int = 256, device: str = "cpu"):
        try:
            import open_clip
            import torch
        except ImportError as e:
            raise EncodeError(f"model load failure: open_clip backend unavailable ({e})") from e
        torch.manual_seed(0)
        try:
            model, _, _ = open_clip.create_model_and_transforms(
                name, pretrained=pretrain, device=device
            )
            tokenize = open_clip.get_tokenizer(name)
        except Exception as e:
            raise EncodeError(f"model load failure: {name}:{pretrain} ({e})") from e
        model.eval()
        self._torch = torch
        self._model = model
        self._tokenize = tokenize
        self._device = device
        self.batch_size = batch_size
        self.name = name
        self.pretrain = pretrain

    def _encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            tokens = self._tokenize(list(texts)).to(self._device)
            return self._model.encode_text(tokens).float().cpu().numpy()

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        return run_batches(list(texts), self._encode_batch, self.batch_size)


def make_encoder(backend: str, name: str, pretrain: str, *,
                 dim: int, batch_size: int, device: str):
    if backend == "hash":
        return HashEncoder(name, pretrain, dim=dim)
    if backend == "open-clip":
        return OpenClipEncoder(name, pretrain, batch_size=batch_size, device=device)
    raise EncodeError(f"unknown backend {backend!r}")
