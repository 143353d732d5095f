"""LLM-backed caption and synonym generation over a chat-completions API.

One request per class; captions are sampled hot (temperature 1.0) to get
varied, confusable captions, synonyms cold (0.1) because the synonym list
should be stable vocabulary. Replies are split into one entry per line with
list markers stripped; how the upstream model formats lists is the only
parsing assumption made.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

from .datastore import TaskSpec
from .errors import TextGenError

API_KEY_ENV = "LOVM_LLM_API_KEY"

KINDS = ("captions", "synonyms")
TEMPERATURES = {"captions": 1.0, "synonyms": 0.1}

CAPTION_PROMPT = (
    "Generate long and confusing image captions for the {domain} domain, "
    "which will be used to evaluate a Vision-Language Model's {task} performance.\n"
    "\n"
    "Generate 50 captions for {classname}:"
)

SYNONYM_PROMPT = (
    "Please list the superclasses/synonyms for {classname}. For example:\n"
    "\n"
    "chair: [furniture, seat, bench, armchair, sofa]\n"
    "\n"
    "{classname}:"
)

# leading "1." / "1)" / "-" list markers
_MARKER = re.compile(r"^(?:\d+[.)]|-)\s*")


@dataclass(frozen=True)
class ClientConfig:
    """Where and how to talk to the chat-completions endpoint.

    The bearer token is read from the LOVM_LLM_API_KEY environment variable
    unless given explicitly. ``max_retries`` counts retries after the first
    attempt; backoff doubles each time starting at ``backoff`` seconds.
    """

    endpoint: str
    model: str
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 5
    backoff: float = 0.5
    parallelism: int = 4


@dataclass(frozen=True)
class TextDataset:
    kind: str
    classes: dict[str, list[str]]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TextGenError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.classes:
            raise TextGenError("text dataset has no classes")
        for name, lines in self.classes.items():
            if not name:
                raise TextGenError("empty class name")
            if not lines:
                raise TextGenError(f"class {name!r} has no entries")
            if any(not s.strip() for s in lines):
                raise TextGenError(f"class {name!r} has a blank entry")


def build_caption_prompt(spec: TaskSpec, class_name: str) -> str:
    if class_name not in spec.class_names:
        raise TextGenError(f"unknown class {class_name!r} for dataset {spec.dataset!r}")
    return CAPTION_PROMPT.format(domain=spec.domain, task=spec.task, classname=class_name)


def build_synonym_prompt(class_name: str) -> str:
    if not class_name:
        raise TextGenError("empty class name")
    return SYNONYM_PROMPT.format(classname=class_name)


def parse_reply(text: str) -> list[str]:
    """Split a reply into entries: one per line, list markers stripped.

    Drops lines that are empty after stripping. Marker-free lines pass
    through untouched, so rendering entries with newlines and re-parsing is
    the identity.
    """
    out = []
    for line in text.splitlines():
        entry = _MARKER.sub("", line.strip(), count=1).strip()
        if entry:
            out.append(entry)
    return out


def _resolve_key(config: ClientConfig) -> str:
    key = config.api_key if config.api_key is not None else os.environ.get(API_KEY_ENV, "")
    if not key:
        raise TextGenError(f"no API key: set {API_KEY_ENV} or ClientConfig.api_key")
    return key


def request_completion(config: ClientConfig, prompt: str, temperature: float) -> str:
    """POST one chat-completion request, retrying transport and non-2xx failures."""
    url = config.endpoint.rstrip("/") + "/chat/completions"
    headers = {"Authorization": f"Bearer {_resolve_key(config)}"}
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
    }
    last_error = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt and config.backoff > 0:
            time.sleep(config.backoff * 2 ** (attempt - 1))
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=config.timeout)
        except requests.RequestException as e:
            last_error = f"transport failure: {e}"
            continue
        if resp.status_code // 100 != 2:
            last_error = f"HTTP {resp.status_code}: {resp.text[:200]}"
            continue
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TextGenError(f"malformed completion response: {e}") from e
    raise TextGenError(
        f"request failed after {config.max_retries + 1} attempts; last error: {last_error}"
    )


def generate_text_dataset(spec: TaskSpec, kind: str, config: ClientConfig) -> TextDataset:
    """One request per class; responses parsed and joined in class order."""
    if kind not in KINDS:
        raise TextGenError(f"kind must be one of {KINDS}, got {kind!r}")
    temperature = TEMPERATURES[kind]

    def fetch(class_name: str) -> list[str]:
        if kind == "captions":
            prompt = build_caption_prompt(spec, class_name)
        else:
            prompt = build_synonym_prompt(class_name)
        entries = parse_reply(request_completion(config, prompt, temperature))
        if not entries:
            raise TextGenError(f"empty reply for class {class_name!r}")
        return entries

    workers = max(1, config.parallelism)
    if workers == 1:
        results = [fetch(c) for c in spec.class_names]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fetch, spec.class_names))
    return TextDataset(kind=kind, classes=dict(zip(spec.class_names, results)))


def write_text_dataset(dataset: TextDataset, path: str | Path) -> None:
    payload = {"kind": dataset.kind, "classes": dataset.classes}
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")


def load_text_dataset(path: str | Path) -> TextDataset:
    p = Path(path)
    if not p.is_file():
        raise TextGenError(f"text dataset file {p} is missing")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise TextGenError(f"text dataset is not valid JSON: {e}") from e
    if not isinstance(data, dict) or "kind" not in data or "classes" not in data:
        raise TextGenError('text dataset must be {"kind": ..., "classes": {...}}')
    classes = data["classes"]
    if not isinstance(classes, dict) or not all(
        isinstance(v, list) and all(isinstance(s, str) for s in v) for v in classes.values()
    ):
        raise TextGenError("classes must map names to lists of strings")
    return TextDataset(kind=data["kind"], classes=classes)
