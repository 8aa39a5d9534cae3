"""Bridge jobs: encode texts/images, build adaptation episodes, fill lexicons.

The bridge never computes similarities or anything downstream of the
embeddings; it only produces S3EM files and lexicon-cache JSON consumed
by the classifier side.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests
from PIL import Image

from .augment import augment_view
from .encoders import make_encoder
from .s3em import write_s3em

SYNONYM_PROMPT = (
    "Tell me in five words or less what are some common ways of "
    "referring to {cls} in {dataset}?"
)
DESCRIPTOR_PROMPT = "What are useful features for distinguishing a {cls} in a photo?"


class BridgeError(Exception):
    pass


class EmptyManifestError(BridgeError):
    pass


@dataclass(frozen=True)
class BridgeJob:
    mode: str  # encode-texts | encode-images | make-episodes | llm-fill
    model_id: str
    manifest: str
    out: str
    views: int = 64


def read_text_manifest(path) -> list[str]:
    """One text per line, or a JSON array / {"texts": [...]} document."""
    raw = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix == ".json":
        doc = json.loads(raw)
        texts = doc["texts"] if isinstance(doc, dict) else doc
        return [str(t) for t in texts]
    return [line for line in raw.splitlines() if line.strip()]


def read_image_manifest(path) -> list[tuple[str, int | None]]:
    """One image path per line, optionally ``path<TAB>label``."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        img_path, _, label = line.partition("\t")
        entries.append((img_path.strip(), int(label) if label.strip() else None))
    return entries


def encode_texts(manifest, model_id: str, out_path) -> int:
    """One embedding per manifest text, in manifest order, labels = texts."""
    texts = read_text_manifest(manifest)
    if not texts:
        raise EmptyManifestError(f"{manifest} lists no texts")
    encoder = make_encoder(model_id)
    vectors = encoder.encode_texts(texts)
    write_s3em(out_path, vectors, labels=texts)
    return len(texts)


def _load_image(base: Path, rel: str) -> Image.Image:
    path = Path(rel)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise BridgeError(f"image {path} not found")
    return Image.open(path)


def encode_images(manifest, model_id: str, out_path) -> int:
    entries = read_image_manifest(manifest)
    if not entries:
        raise EmptyManifestError(f"{manifest} lists no images")
    base = Path(manifest).parent
    encoder = make_encoder(model_id)
    images = [_load_image(base, rel) for rel, _ in entries]
    vectors = encoder.encode_images(images)
    labels = [
        str(label) if label is not None else Path(rel).stem for rel, label in entries
    ]
    write_s3em(out_path, vectors, labels=labels)
    return len(entries)


def make_episodes(
    manifest, model_id: str, out_dir, views: int = 64, seed: int = 0, out_size: int = 224
) -> int:
    """Per image: the unaugmented view first, then views-1 augmented crops.

    Writes ep_NNNN.s3em files plus a manifest.json mapping files to labels;
    the first row of every file is flagged "original" in the label block.
    """
    if views < 1:
        raise BridgeError(f"views must be >= 1, got {views}")
    entries = read_image_manifest(manifest)
    if not entries:
        raise EmptyManifestError(f"{manifest} lists no images")
    base = Path(manifest).parent
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    encoder = make_encoder(model_id)
    rng = np.random.default_rng(seed)
    records = []
    for idx, (rel, label) in enumerate(entries):
        img = _load_image(base, rel).convert("RGB")
        batch = [img.resize((out_size, out_size), Image.BILINEAR)]
        batch.extend(augment_view(img, rng, out_size) for _ in range(views - 1))
        vectors = encoder.encode_images(batch)
        labels = ["original"] + [f"aug_{v:03d}" for v in range(1, views)]
        file_name = f"ep_{idx:04d}.s3em"
        write_s3em(out / file_name, vectors, labels=labels)
        records.append({"file": file_name, "label": label})
    (out / "manifest.json").write_text(
        json.dumps({"episodes": records}, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )
    return len(records)


# --- lexicon filling ---------------------------------------------------------


def _parse_candidates(text: str) -> list[str]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if len(lines) == 1 and "," in lines[0]:
        lines = [part.strip() for part in lines[0].split(",")]
    out = []
    for ln in lines:
        ln = ln.lstrip("-*0123456789.) ").strip().strip('"')
        if ln:
            out.append(ln)
    return out


def _complete(endpoint: str, prompt: str, api_key: str | None, timeout: float) -> list[str]:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    for attempt in range(3):
        resp = requests.post(
            endpoint, json={"prompt": prompt, "params": {}}, headers=headers, timeout=timeout
        )
        if resp.status_code == 429:
            time.sleep(float(resp.headers.get("Retry-After", "1")))
            continue
        if resp.status_code != 200:
            raise BridgeError(f"endpoint returned HTTP {resp.status_code}")
        body = resp.json()
        text = body.get("text") or body.get("completion") or body.get("response")
        if not isinstance(text, str):
            raise BridgeError("endpoint response carries no text field")
        return _parse_candidates(text)
    raise BridgeError("rate limited after 3 attempts")


def llm_fill(
    class_list,
    dataset: str,
    endpoint: str,
    out_path,
    api_key: str | None = None,
    max_synonyms: int = 10,
    max_descriptors: int = 30,
    timeout: float = 60.0,
) -> int:
    """Query synonyms and descriptors per class; write a lexicon cache file.

    Output format is the classifier side's lexicon cache: a JSON object
    mapping class name -> {"synonyms": [...], "descriptors": [...]}.
    """
    names = read_text_manifest(class_list)
    if not names:
        raise EmptyManifestError(f"{class_list} lists no classes")
    doc = {}
    for name in names:
        synonyms = _complete(
            endpoint, SYNONYM_PROMPT.format(cls=name, dataset=dataset), api_key, timeout
        )
        descriptors = _complete(
            endpoint, DESCRIPTOR_PROMPT.format(cls=name), api_key, timeout
        )
        doc[name] = {
            "synonyms": synonyms[:max_synonyms],
            "descriptors": descriptors[:max_descriptors],
        }
    Path(out_path).write_text(
        json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8"
    )
    return len(names)
