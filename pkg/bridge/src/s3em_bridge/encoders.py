"""Text and image encoders behind one interface.

Two families are supported through the model id string:

  ``clip:<huggingface-id>``  a CLIP-family checkpoint via transformers
                             (requires the optional [clip] extra and the
                             model weights to be available)
  ``hash:<dim>``             a deterministic offline encoder that derives a
                             unit vector from a content digest; useful for
                             tests, fixtures, and dry runs without a model

Every encoder returns float32 unit-norm rows, one per input, in input
order. Identical inputs always produce bitwise-identical rows.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image


class EncoderError(Exception):
    pass


def _hash_vector(payload: bytes, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    seed = int.from_bytes(digest, "little")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    return vec.astype(np.float32)


class HashEncoder:
    """Content-digest encoder: deterministic, model-free."""

    def __init__(self, dim: int):
        if dim < 1:
            raise EncoderError(f"dimension must be positive, got {dim}")
        self.dim = dim

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        rows = [_hash_vector(b"text\x00" + t.encode("utf-8"), self.dim) for t in texts]
        return np.stack(rows) if rows else np.zeros((0, self.dim), dtype=np.float32)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        rows = []
        for img in images:
            rgb = img.convert("RGB").resize((32, 32), Image.BILINEAR)
            rows.append(_hash_vector(b"image\x00" + rgb.tobytes(), self.dim))
        return np.stack(rows) if rows else np.zeros((0, self.dim), dtype=np.float32)


class ClipEncoder:
    """CLIP checkpoint via transformers; batches inputs, normalizes outputs."""

    def __init__(self, model_id: str, batch_size: int = 64):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise EncoderError(
                "clip encoding needs the [clip] extra (transformers + torch)"
            ) from exc
        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_id)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.batch_size = batch_size

    def _normalize(self, features) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            features = features / features.norm(dim=-1, keepdim=True)
        return features.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        chunks = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            inputs = self.processor(
                text=batch, return_tensors="pt", padding=True, truncation=True
            )
            with torch.no_grad():
                features = self.model.get_text_features(**inputs)
            chunks.append(self._normalize(features))
        return np.concatenate(chunks) if chunks else np.zeros((0, 0), dtype=np.float32)

    def encode_images(self, images: list[Image.Image]) -> np.ndarray:
        torch = self._torch
        chunks = []
        for start in range(0, len(images), self.batch_size):
            batch = [img.convert("RGB") for img in images[start : start + self.batch_size]]
            inputs = self.processor(images=batch, return_tensors="pt")
            with torch.no_grad():
                features = self.model.get_image_features(**inputs)
            chunks.append(self._normalize(features))
        return np.concatenate(chunks) if chunks else np.zeros((0, 0), dtype=np.float32)


def make_encoder(model_id: str):
    """Build an encoder from a ``family:detail`` model id string."""
    family, _, detail = model_id.partition(":")
    if family == "hash":
        try:
            dim = int(detail or "512")
        except ValueError as exc:
            raise EncoderError(f"bad hash encoder dimension {detail!r}") from exc
        return HashEncoder(dim)
    if family == "clip":
        if not detail:
            raise EncoderError("clip encoder needs a model id, e.g. clip:openai/clip-vit-base-patch16")
        return ClipEncoder(detail)
    raise EncoderError(f"unknown encoder family {family!r}")
