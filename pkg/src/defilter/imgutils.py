"""Small raster helpers shared by every module.

In-memory convention: color images are H x W x 3 uint8 in RGB channel
order, masks are H x W uint8 in {0, 1}.  cv2's BGR ordering is confined
to the read/write boundary here.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

from .errors import IoError, ShapeError

# ITU-R BT.601 luma weights.
_LUMA = (0.299, 0.587, 0.114)


def luma(image: np.ndarray, rounded: bool = True) -> np.ndarray:
    """Convert an RGB raster to grayscale intensity.

    With ``rounded`` the result is the rounded 8-bit luma used by the
    coverage score; otherwise the unrounded float map is returned.
    """
    if image.ndim == 2:
        g = image.astype(np.float64)
    elif image.ndim == 3 and image.shape[2] >= 3:
        img = image.astype(np.float64)
        g = _LUMA[0] * img[..., 0] + _LUMA[1] * img[..., 1] + _LUMA[2] * img[..., 2]
    else:
        raise ShapeError(f"expected HxW or HxWx3 raster, got shape {image.shape}")
    if rounded:
        return np.rint(g)
    return g


def require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def read_rgb(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise IoError(f"unreadable image: {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def read_rgba(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IoError(f"unreadable image: {path}")
    if img.ndim == 2:
        img = cv2.cvtColor(img, cv2.COLOR_GRAY2BGRA)
    elif img.shape[2] == 3:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2BGRA)
    return cv2.cvtColor(img, cv2.COLOR_BGRA2RGBA)


def read_mask(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise IoError(f"unreadable mask: {path}")
    return (img > 0).astype(np.uint8)


def write_rgb(path, image: np.ndarray) -> None:
    _imwrite(path, cv2.cvtColor(image, cv2.COLOR_RGB2BGR))


def write_rgba(path, image: np.ndarray) -> None:
    _imwrite(path, cv2.cvtColor(image, cv2.COLOR_RGBA2BGRA))


def write_mask(path, mask: np.ndarray) -> None:
    # Stored as 0/255 so mask files are viewable; read_mask maps back to {0,1}.
    _imwrite(path, (np.asarray(mask) > 0).astype(np.uint8) * 255)


def _imwrite(path, bgr: np.ndarray) -> None:
    path = str(path)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if not cv2.imwrite(path, bgr):
        raise IoError(f"failed to write {path}")
