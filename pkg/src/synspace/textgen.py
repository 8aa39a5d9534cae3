"""Prompt rendering, synonym/descriptor composition, and the LLM cache.

Every class is described by a lexicon: the synonyms people use for it
and short visual descriptors. The two prompt templates ask a language
model for those lists; ``combine`` then renders the full synonym x
descriptor product into sentence texts. Rendering is deterministic, so
one lexicon always produces byte-identical texts.

Live querying goes through a generic JSON-over-HTTP endpoint and an
append-only response cache keyed by content hash; with a warm cache the
whole pipeline runs offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import (
    EmptyFieldError,
    FormatError,
    NetworkError,
    ParseError,
    RateLimitedError,
)

SYNONYM_PROMPT = (
    "Tell me in five words or less what are some common ways of "
    "referring to {cls} in {dataset}?"
)
DESCRIPTOR_PROMPT = "What are useful features for distinguishing a {cls} in a photo?"

_LEADING_VERBS = ("is", "has", "have")

_cache_write_lock = threading.Lock()


def _require(value: str, field_name: str) -> str:
    if not value or not value.strip():
        raise EmptyFieldError(f"{field_name} must be a nonempty string")
    return value


def render_synonym_prompt(class_name: str, dataset_name: str) -> str:
    _require(class_name, "class_name")
    _require(dataset_name, "dataset_name")
    return SYNONYM_PROMPT.format(cls=class_name, dataset=dataset_name)


def render_descriptor_prompt(class_name: str) -> str:
    _require(class_name, "class_name")
    return DESCRIPTOR_PROMPT.format(cls=class_name)


def _clean_entries(entries, inject: str | None = None) -> tuple[str, ...]:
    """Strip, drop empties, deduplicate case-insensitively, keep order."""
    out: list[str] = []
    seen: set[str] = set()
    if inject is not None:
        out.append(inject)
        seen.add(inject.casefold())
    for entry in entries:
        text = str(entry).strip()
        if not text:
            continue
        key = text.casefold()
        if key in seen:
            continue
        seen.add(key)
        out.append(text)
    return tuple(out)


@dataclass(frozen=True)
class ClassLexicon:
    class_name: str
    dataset_name: str
    synonyms: tuple[str, ...]
    descriptors: tuple[str, ...]

    @classmethod
    def build(cls, class_name, dataset_name, synonyms, descriptors) -> "ClassLexicon":
        """Normalize raw lists: the class name itself always leads the synonyms."""
        name = _require(class_name, "class_name").strip()
        syns = _clean_entries(synonyms)
        if name.casefold() not in {s.casefold() for s in syns}:
            syns = _clean_entries(synonyms, inject=name)
        return cls(
            class_name=name,
            dataset_name=str(dataset_name).strip(),
            synonyms=syns,
            descriptors=_clean_entries(descriptors),
        )


@dataclass(frozen=True)
class SynonymousTexts:
    class_id: int
    texts: tuple[str, ...]


def render_text(synonym: str, descriptor: str | None) -> str:
    """One synonymous sentence; the descriptor's own leading is/has/have is kept."""
    if descriptor is None:
        return f"A photo of a {synonym}."
    first = descriptor.split(maxsplit=1)[0].casefold() if descriptor.split() else ""
    if first in _LEADING_VERBS:
        return f"A photo of a {synonym}, which {descriptor}."
    return f"A photo of a {synonym}, which is {descriptor}."


def combine(lexicon: ClassLexicon, class_id: int = 0) -> SynonymousTexts:
    """Full synonym x descriptor product, synonym-major order.

    Without descriptors each synonym still yields its bare photo sentence,
    so every synonym stays represented.
    """
    if not lexicon.synonyms:
        raise EmptyFieldError(f"class {lexicon.class_name!r} has no synonyms")
    texts: list[str] = []
    for syn in lexicon.synonyms:
        if lexicon.descriptors:
            for desc in lexicon.descriptors:
                texts.append(render_text(syn, desc))
        else:
            texts.append(render_text(syn, None))
    return SynonymousTexts(class_id=class_id, texts=tuple(texts))


def load_lexicon_cache(path, dataset_name: str = "") -> dict[int, ClassLexicon]:
    """Read a lexicon cache file: a JSON object mapping class name to
    {"synonyms": [...], "descriptors": [...]}; ids follow file order."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"lexicon cache is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("lexicon cache must be a JSON object")
    lexicons: dict[int, ClassLexicon] = {}
    for class_id, (name, body) in enumerate(doc.items()):
        if not isinstance(body, dict):
            raise FormatError(f"entry {name!r} must be an object")
        lexicons[class_id] = ClassLexicon.build(
            class_name=name,
            dataset_name=dataset_name,
            synonyms=body.get("synonyms", []),
            descriptors=body.get("descriptors", []),
        )
    return lexicons


def save_lexicon_cache(lexicons: dict[int, ClassLexicon], path) -> None:
    doc = {
        lex.class_name: {
            "synonyms": list(lex.synonyms),
            "descriptors": list(lex.descriptors),
        }
        for _, lex in sorted(lexicons.items())
    }
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )


# --- LLM endpoint client ----------------------------------------------------

_ENUM_PREFIX = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_candidates(text: str) -> list[str]:
    """Split a raw completion into candidate strings.

    One candidate per line; a single comma-separated line is split on
    commas. Leading bullets/numbering and surrounding quotes are dropped.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) == 1 and "," in lines[0]:
        lines = [part.strip() for part in lines[0].split(",")]
    out = []
    for ln in lines:
        ln = _ENUM_PREFIX.sub("", ln).strip().strip('"').strip()
        if ln:
            out.append(ln)
    return out


def _cache_key(prompt: str, params: dict) -> str:
    payload = json.dumps({"params": params, "prompt": prompt}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class LlmClient:
    """Cache-first client for a generic completion endpoint.

    POSTs {"prompt": ..., "params": {...}} and expects a JSON body with a
    "text" field (``completion`` and ``response`` are accepted too). Every
    result is appended to a JSONL cache; repeated prompts never touch the
    network. The cache write path serializes through a lock and replaces
    the file atomically, so concurrent readers always see a full file.
    """

    def __init__(
        self,
        endpoint: str | None,
        cache_path,
        key_env: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
    ):
        self.endpoint = endpoint
        self.cache_path = Path(cache_path)
        self.key_env = key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self._cache: dict[str, list[str]] | None = None

    def _load_cache(self) -> dict[str, list[str]]:
        if self._cache is None:
            cache: dict[str, list[str]] = {}
            if self.cache_path.is_file():
                for line in self.cache_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError as exc:
                        raise FormatError(f"corrupt cache line: {exc}") from exc
                    cache[rec["key"]] = list(rec["candidates"])
            self._cache = cache
        return self._cache

    def _append_cache(self, key: str, prompt: str, params: dict, candidates: list[str]) -> None:
        record = {
            "key": key,
            "prompt": prompt,
            "params": params,
            "candidates": candidates,
        }
        with _cache_write_lock:
            existing = ""
            if self.cache_path.is_file():
                existing = self.cache_path.read_text(encoding="utf-8")
            tmp = self.cache_path.with_suffix(self.cache_path.suffix + ".tmp")
            tmp.write_text(existing + json.dumps(record, sort_keys=True) + "\n", encoding="utf-8")
            os.replace(tmp, self.cache_path)
        self._load_cache()[key] = candidates

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.key_env:
            key = os.environ.get(self.key_env)
            if not key:
                raise NetworkError(f"environment variable {self.key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def query(self, prompt: str, params: dict | None = None) -> list[str]:
        params = dict(params or {})
        key = _cache_key(prompt, params)
        cached = self._load_cache().get(key)
        if cached is not None:
            return list(cached)
        if not self.endpoint:
            raise NetworkError(
                "prompt not in cache and no endpoint configured for live queries"
            )
        body = self._post_with_retry({"prompt": prompt, "params": params})
        text = _extract_text(body)
        candidates = parse_candidates(text)
        if not candidates:
            raise ParseError("response contained no candidates", raw_body=text)
        self._append_cache(key, prompt, params, candidates)
        return candidates

    def _post_with_retry(self, payload: dict) -> str:
        last_retry_after = None
        for attempt in range(self.max_attempts):
            try:
                resp = requests.post(
                    self.endpoint, json=payload, headers=self._headers(), timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise NetworkError(f"request to {self.endpoint} failed: {exc}") from exc
            if resp.status_code == 429:
                last_retry_after = _retry_after_seconds(resp)
                if attempt + 1 < self.max_attempts:
                    time.sleep(last_retry_after)
                    continue
                raise RateLimitedError(
                    f"rate limited after {self.max_attempts} attempts",
                    retry_after=last_retry_after,
                )
            if resp.status_code != 200:
                raise NetworkError(f"endpoint returned HTTP {resp.status_code}")
            return resp.text
        raise RateLimitedError("rate limited", retry_after=last_retry_after)


def _retry_after_seconds(resp) -> float:
    try:
        return max(0.0, float(resp.headers.get("Retry-After", "1")))
    except ValueError:
        return 1.0


def _extract_text(body: str) -> str:
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        raise ParseError("response body is not JSON", raw_body=body)
    if isinstance(doc, dict):
        for field in ("text", "completion", "response", "content"):
            value = doc.get(field)
            if isinstance(value, str):
                return value
    raise ParseError("response JSON carries no text field", raw_body=body)


def query_llm(
    endpoint: str | None,
    prompt: str,
    params: dict | None,
    cache_path,
    key_env: str | None = None,
) -> list[str]:
    """One-shot convenience wrapper around LlmClient."""
    return LlmClient(endpoint, cache_path, key_env=key_env).query(prompt, params)


def fetch_lexicon(
    client: LlmClient,
    class_name: str,
    dataset_name: str,
    max_synonyms: int = 10,
    max_descriptors: int = 30,
    params: dict | None = None,
) -> ClassLexicon:
    """Query (or replay from cache) both prompts for one class."""
    synonyms = client.query(render_synonym_prompt(class_name, dataset_name), params)
    descriptors = client.query(render_descriptor_prompt(class_name), params)
    return ClassLexicon.build(
        class_name,
        dataset_name,
        synonyms[:max_synonyms],
        descriptors[:max_descriptors],
    )
