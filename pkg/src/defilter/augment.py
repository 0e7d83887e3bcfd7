"""Semi-synthetic occlusions: random shapes stamped into facial subregions.

Three steps: find the facial polygon, partition it into subregions, then
stamp a randomly colored translucent shape into a random subset of them.
The output pairs (occluded image, exact binary mask) make training data
for the segmenter without needing real sticker overlays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compositor import FacePolygon, FaceRecord, facial_polygon
from .errors import InvalidArgument, InvalidSubdivision
from .masks import OcclusionMask

SHAPE_KINDS = ("rectangle", "ellipse", "polygon")


@dataclass
class Subregion:
    """One grid cell of the facial-polygon partition, half-open bounds."""

    index: int
    x0: int
    x1: int
    y0: int
    y1: int


@dataclass
class ShapeSpec:
    """A shape to stamp: drawn to fit its whole subregion, so the stamp
    support is the subregion's pixel set; kind is recorded for realism
    bookkeeping but does not shrink the footprint."""

    kind: str
    color: tuple
    alpha: int
    subregion_index: int


def _grid_dims(n: int):
    # Largest divisor of n not exceeding sqrt(n) becomes the row count,
    # keeping cells close to square.
    rows = 1
    for d in range(1, int(math.isqrt(n)) + 1):
        if n % d == 0:
            rows = d
    return rows, n // rows


def subdivide(polygon: FacePolygon, n: int, shape=None) -> list:
    """Partition the polygon interior into n pixel-disjoint grid cells.

    Cells tile the interior's bounding box; each cell's pixel set is the
    cell clipped to the interior, so the union over all cells is exactly
    the interior.  Cells may be empty near the hull corners.
    """
    if n < 1:
        raise InvalidSubdivision("need at least one subregion")
    if n > polygon.pixel_count:
        raise InvalidSubdivision(
            f"{n} subregions exceed the polygon's {polygon.pixel_count} pixels"
        )
    if shape is None:
        v = polygon.vertices
        shape = (int(np.ceil(v[:, 1].max())) + 2, int(np.ceil(v[:, 0].max())) + 2)
    interior = polygon.mask(shape)
    ys, xs = np.nonzero(interior)
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    rows, cols = _grid_dims(n)
    ye = [y0 + (i * (y1 - y0)) // rows for i in range(rows + 1)]
    xe = [x0 + (j * (x1 - x0)) // cols for j in range(cols + 1)]
    subs = []
    for i in range(rows):
        for j in range(cols):
            subs.append(Subregion(
                index=i * cols + j,
                x0=xe[j], x1=xe[j + 1], y0=ye[i], y1=ye[i + 1],
            ))
    return subs


def subregion_mask(polygon: FacePolygon, sub: Subregion, shape) -> np.ndarray:
    """Full-size boolean map of one subregion's pixel set."""
    interior = polygon.mask(shape)
    out = np.zeros(shape[:2], dtype=bool)
    out[sub.y0:sub.y1, sub.x0:sub.x1] = interior[sub.y0:sub.y1, sub.x0:sub.x1]
    return out


def plan_shapes(rng, n_subregions: int, fill_fraction: float, alpha_range) -> list:
    """Pick ceil(fill_fraction * n) subregions and a shape for each."""
    k = int(math.ceil(fill_fraction * n_subregions))
    if k == 0:
        return []
    chosen = rng.choice(n_subregions, size=k, replace=False)
    lo, hi = alpha_range
    shapes = []
    for idx in sorted(int(c) for c in chosen):
        kind = SHAPE_KINDS[int(rng.integers(0, len(SHAPE_KINDS)))]
        color = tuple(int(c) for c in rng.integers(0, 256, size=3))
        alpha = int(rng.integers(lo, hi + 1))
        shapes.append(ShapeSpec(kind, color, alpha, idx))
    return shapes


def apply_shapes(record: FaceRecord, polygon: FacePolygon, subs, shapes):
    """Stamp each planned shape into its subregion; returns (image, mask).

    The mask marks every pixel a shape with alpha > 0 was drawn on, even
    where blending happens to reproduce the original value.
    """
    shape2 = record.image.shape[:2]
    interior = polygon.mask(record.image.shape)
    out = record.image.astype(np.float64).copy()
    mask = np.zeros(shape2, dtype=np.uint8)
    by_index = {s.index: s for s in subs}
    for spec in shapes:
        sub = by_index[spec.subregion_index]
        sl = (slice(sub.y0, sub.y1), slice(sub.x0, sub.x1))
        region = interior[sl]
        if not region.any():
            continue
        a = spec.alpha / 255.0
        color = np.array(spec.color, dtype=np.float64)
        patch = out[sl]
        patch[region] = a * color + (1.0 - a) * patch[region]
        if spec.alpha > 0:
            mask[sl][region] = 1
    return np.rint(out).astype(np.uint8), mask


def augment(
    record: FaceRecord,
    seed: int,
    n_subregions: int = 16,
    fill_fraction: float = None,
    alpha_range=(64, 255),
):
    """Occlude a face with random subregion shapes, deterministically per seed.

    fill_fraction None draws it uniformly from [0.2, 0.6], spreading the
    resulting coverage over the low/medium/high classes.

    Returns (occluded FaceRecord, OcclusionMask).
    """
    rng = np.random.default_rng(seed)
    if fill_fraction is None:
        fill_fraction = float(rng.uniform(0.2, 0.6))
    if not 0.0 <= fill_fraction <= 1.0:
        raise InvalidArgument(f"fill_fraction {fill_fraction} outside [0, 1]")
    polygon = facial_polygon(record)
    subs = subdivide(polygon, n_subregions, shape=record.image.shape[:2])
    shapes = plan_shapes(rng, n_subregions, fill_fraction, alpha_range)
    image, mask = apply_shapes(record, polygon, subs, shapes)
    return record.with_image(image), OcclusionMask(mask, threshold_used=1.0)
