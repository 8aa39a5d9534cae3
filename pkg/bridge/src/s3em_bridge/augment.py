"""View augmentation for test-time adaptation episodes.

Recipe: random resized crop (area 0.5..1.0, aspect 3/4..4/3) followed by
a coin-flip horizontal mirror, the usual convention for entropy-based
test-time adaptation pipelines. All randomness comes from the caller's
generator, so a fixed seed reproduces the exact same views.
"""

from __future__ import annotations

import math

import numpy as np
from PIL import Image

CROP_AREA = (0.5, 1.0)
CROP_ASPECT = (3.0 / 4.0, 4.0 / 3.0)


def random_resized_crop(
    img: Image.Image, rng: np.random.Generator, out_size: int = 224
) -> Image.Image:
    width, height = img.size
    area = width * height
    for _ in range(10):
        target_area = area * rng.uniform(*CROP_AREA)
        log_ratio = (math.log(CROP_ASPECT[0]), math.log(CROP_ASPECT[1]))
        aspect = math.exp(rng.uniform(*log_ratio))
        w = int(round(math.sqrt(target_area * aspect)))
        h = int(round(math.sqrt(target_area / aspect)))
        if 0 < w <= width and 0 < h <= height:
            left = int(rng.integers(0, width - w + 1))
            top = int(rng.integers(0, height - h + 1))
            box = (left, top, left + w, top + h)
            return img.crop(box).resize((out_size, out_size), Image.BILINEAR)
    # fallback: center crop of the largest fitting square
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    return img.crop((left, top, left + side, top + side)).resize(
        (out_size, out_size), Image.BILINEAR
    )


def augment_view(img: Image.Image, rng: np.random.Generator, out_size: int = 224) -> Image.Image:
    view = random_resized_crop(img, rng, out_size)
    if rng.uniform() < 0.5:
        view = view.transpose(Image.FLIP_LEFT_RIGHT)
    return view
