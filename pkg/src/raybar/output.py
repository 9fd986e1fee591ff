"""Image and statistics writers: binary PPM (P6) and JSON run stats."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ImageValueError


def tone_map(values: np.ndarray) -> np.ndarray:
    """Per-channel tone map clamp(round(255 * v / (1 + v))) to uint8."""
    v = np.asarray(values, dtype=np.float64)
    mapped = np.rint(255.0 * (v / (1.0 + v)))
    return np.clip(mapped, 0, 255).astype(np.uint8)


def write_ppm(image: np.ndarray, path) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageValueError("image must have shape (rows, cols, 3)")
    if not np.all(np.isfinite(image)):
        raise ImageValueError("image contains non-finite values")
    if np.any(image < 0):
        raise ImageValueError("image contains negative values")
    h, w, _ = image.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + tone_map(image).tobytes())


def write_stats_json(stats: dict, path) -> None:
    Path(path).write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
