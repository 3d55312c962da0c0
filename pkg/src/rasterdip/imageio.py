"""Grayscale image file handling.

Supported encodings: 8-bit and 16-bit grayscale PNG, plus a raw float format
(magic "DIPF", u32 height, u32 width, little-endian float32 row-major).
Loaded pixel values are normalized to [0, 1]: 8-bit /255, 16-bit /65535,
raw values clamped.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

RAW_MAGIC = b"DIPF"


def load_image(path) -> np.ndarray:
    """Load a grayscale image as float64 in [0, 1]."""
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == RAW_MAGIC:
        return load_raw(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as e:
        raise OSError(f"cannot read image {path}: {e}") from None
    if img.mode in ("I;16", "I;16B", "I"):
        arr = np.asarray(img, dtype=np.float64)
        return np.clip(arr / 65535.0, 0.0, 1.0)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_image(path, image: np.ndarray, bits: int = 8) -> None:
    """Write by extension: .png (8- or 16-bit) or the raw float format."""
    suffix = str(path).lower()
    if suffix.endswith(".png"):
        save_png(path, image, bits=bits)
    else:
        save_raw(path, image)


def save_png(path, image: np.ndarray, bits: int = 8) -> None:
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got shape {image.shape}")
    if bits == 8:
        arr = np.round(image * 255.0).astype(np.uint8)
    elif bits == 16:
        arr = np.round(image * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bits must be 8 or 16, got {bits}")
    Image.fromarray(arr).save(path, format="PNG")


def load_raw(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) != 12 or header[:4] != RAW_MAGIC:
            raise OSError(f"{path}: not a raw image file (bad magic)")
        h, w = struct.unpack("<II", header[4:])
        data = np.frombuffer(f.read(4 * h * w), dtype="<f4")
    if data.size != h * w:
        raise OSError(f"{path}: truncated raw image ({data.size} of {h * w} values)")
    return np.clip(data.reshape(h, w).astype(np.float64), 0.0, 1.0)


def save_raw(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got shape {image.shape}")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(struct.pack("<II", h, w))
        f.write(np.ascontiguousarray(image, dtype="<f4").tobytes())


def save_mask_png(path, grid: np.ndarray) -> None:
    """Write a binary mask as an 8-bit PNG with values 0 / 255."""
    arr = (np.asarray(grid) != 0).astype(np.uint8) * 255
    Image.fromarray(arr).save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    """Read a 0/255 mask PNG back to a binary 0/1 grid."""
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return (np.asarray(img) > 127).astype(np.uint8)
