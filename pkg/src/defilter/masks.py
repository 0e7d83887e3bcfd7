"""Binary occlusion masks and the morphological cleanup applied to them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeError

STRUCT_3X3 = np.ones((3, 3), dtype=bool)


@dataclass
class OcclusionMask:
    """H x W map of {0,1}; 1 marks pixels covered by an overlay.

    threshold_used records the binarization point for predicted masks;
    exact ground-truth masks carry 1.0.
    """

    data: np.ndarray
    threshold_used: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ShapeError(f"mask must be 2-d, got shape {self.data.shape}")
        vals = np.unique(self.data)
        if not np.isin(vals, (0, 1)).all():
            raise ShapeError("mask values must be 0 or 1")
        if not 0.0 <= self.threshold_used <= 1.0:
            raise ShapeError("threshold_used must lie in [0, 1]")
        self.data = self.data.astype(np.uint8)

    @property
    def shape(self):
        return self.data.shape

    def density(self) -> float:
        return float(self.data.mean())


def binary_erode(mask: np.ndarray) -> np.ndarray:
    """3x3 erosion; pixels beyond the border count as background."""
    return ndimage.binary_erosion(
        mask.astype(bool), structure=STRUCT_3X3, border_value=0
    ).astype(np.uint8)


def binary_dilate(mask: np.ndarray) -> np.ndarray:
    return ndimage.binary_dilation(
        mask.astype(bool), structure=STRUCT_3X3, border_value=0
    ).astype(np.uint8)


def binary_open(mask: np.ndarray) -> np.ndarray:
    """One erosion then one dilation; kills isolated pixels, keeps blocks."""
    return binary_dilate(binary_erode(mask))
