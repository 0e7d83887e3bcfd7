"""Overlay compositing, facial polygons, and coverage scoring.

A sticker overlay is anchored to face landmarks, warped with a rigid
similarity transform, and alpha-composited onto the face.  The coverage
score is the mean absolute grayscale change inside the facial polygon,
normalized so 1.0 means every polygon pixel flipped by the full 8-bit
range.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import (
    DegenerateLandmarks,
    DegeneratePlacement,
    InvalidAsset,
    IoError,
    NoData,
    ShapeError,
)
from .imgutils import luma, read_rgba, require_same_shape, write_mask, write_rgb, write_rgba

NUM_LANDMARKS = 68
PLACEMENTS = ("mouth", "eyes", "nose", "total_face")

# Coverage class thresholds: low < LOW_MAX, medium in [LOW_MAX, MEDIUM_MAX],
# high above (closed-interval convention).
LOW_MAX = 0.15
MEDIUM_MAX = 0.40


@dataclass
class FaceRecord:
    """A face image with its 68 ordered landmarks and identity metadata."""

    image: np.ndarray
    landmarks: np.ndarray
    identity: str
    source_id: str = ""

    def __post_init__(self):
        self.image = np.asarray(self.image)
        self.landmarks = np.asarray(self.landmarks, dtype=np.float64)
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ShapeError(f"image must be HxWx3, got {self.image.shape}")
        if self.landmarks.shape != (NUM_LANDMARKS, 2):
            raise DegenerateLandmarks(
                f"expected {NUM_LANDMARKS} landmarks, got {self.landmarks.shape}"
            )
        h, w = self.image.shape[:2]
        x, y = self.landmarks[:, 0], self.landmarks[:, 1]
        if (x < 0).any() or (y < 0).any() or (x > w - 1).any() or (y > h - 1).any():
            raise DegenerateLandmarks("landmarks outside image bounds")

    @property
    def shape(self):
        return self.image.shape

    def with_image(self, image: np.ndarray) -> "FaceRecord":
        return FaceRecord(image, self.landmarks.copy(), self.identity, self.source_id)


@dataclass
class Anchor:
    """Ties one overlay point (x, y in overlay pixels) to a landmark index."""

    landmark_index: int
    overlay_xy: tuple


@dataclass
class FilterAsset:
    """RGBA sticker overlay plus the anchors that place it on a face."""

    overlay: np.ndarray
    anchors: list
    placement: str
    name: str

    def __post_init__(self):
        self.overlay = np.asarray(self.overlay)
        if self.overlay.ndim != 3 or self.overlay.shape[2] != 4:
            raise InvalidAsset(f"overlay must be hxwx4 RGBA, got {self.overlay.shape}")
        if len(self.anchors) < 2:
            raise InvalidAsset("need at least 2 anchors to fix position and scale")
        if self.placement not in PLACEMENTS:
            raise InvalidAsset(f"placement must be one of {PLACEMENTS}")


@dataclass
class FacePolygon:
    """Convex facial region with its strict-interior pixel count."""

    vertices: np.ndarray
    pixel_count: int

    def mask(self, shape) -> np.ndarray:
        """Boolean H x W map of pixels strictly inside the polygon."""
        return _strict_interior_mask(self.vertices, shape[:2])


@dataclass
class CoverageReport:
    coverage_intensity: float
    coverage_class: str
    filter_name: str


def classify_coverage(intensity: float) -> str:
    if intensity < LOW_MAX:
        return "low"
    if intensity <= MEDIUM_MAX:
        return "medium"
    return "high"


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull without repeated endpoint."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) < 3:
        raise DegenerateLandmarks("fewer than 3 distinct landmark positions")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise DegenerateLandmarks("landmarks are collinear")
    return hull


def _strict_interior_mask(vertices: np.ndarray, shape) -> np.ndarray:
    """Rasterize the strict interior of a CCW convex polygon.

    A pixel (x, y) is interior iff it lies strictly left of every edge;
    boundary pixels are excluded for reproducibility.
    """
    h, w = shape
    v = np.asarray(vertices, dtype=np.float64)
    x0 = max(int(np.floor(v[:, 0].min())), 0)
    x1 = min(int(np.ceil(v[:, 0].max())) + 1, w)
    y0 = max(int(np.floor(v[:, 1].min())), 0)
    y1 = min(int(np.ceil(v[:, 1].max())) + 1, h)
    mask = np.zeros((h, w), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return mask
    ys, xs = np.mgrid[y0:y1, x0:x1]
    inside = np.ones(xs.shape, dtype=bool)
    n = len(v)
    for i in range(n):
        ax, ay = v[i]
        bx, by = v[(i + 1) % n]
        cross = (bx - ax) * (ys - ay) - (by - ay) * (xs - ax)
        inside &= cross > 0
    mask[y0:y1, x0:x1] = inside
    return mask


def facial_polygon(record: FaceRecord) -> FacePolygon:
    """Convex hull of the 68 landmarks with its strict-interior pixel count."""
    hull = _convex_hull(record.landmarks)
    mask = _strict_interior_mask(hull, record.image.shape[:2])
    count = int(mask.sum())
    if count == 0:
        raise DegenerateLandmarks("facial polygon has empty interior")
    return FacePolygon(vertices=hull, pixel_count=count)


def _anchor_transform(record: FaceRecord, asset: FilterAsset) -> np.ndarray:
    """Least-squares similarity transform (scale+rotation+translation)
    mapping overlay coordinates onto image coordinates.

    Solved in closed form via the complex formulation, which cannot
    introduce shear or reflection.
    """
    src = []
    dst = []
    for a in asset.anchors:
        idx = int(a.landmark_index)
        if idx < 0 or idx >= NUM_LANDMARKS:
            raise InvalidAsset(f"anchor landmark index {idx} out of range")
        src.append(a.overlay_xy)
        dst.append(record.landmarks[idx])
    p = np.array([complex(x, y) for x, y in src])
    q = np.array([complex(x, y) for x, y in dst])
    pc = p - p.mean()
    qc = q - q.mean()
    denom = float(np.sum(np.abs(pc) ** 2))
    if denom == 0.0:
        raise InvalidAsset("anchor overlay points are coincident; scale undetermined")
    a = np.sum(qc * np.conj(pc)) / denom
    b = q.mean() - a * p.mean()
    return np.array(
        [[a.real, -a.imag, b.real], [a.imag, a.real, b.imag]], dtype=np.float64
    )


def composite_with_mask(record: FaceRecord, asset: FilterAsset):
    """Apply the anchored overlay and also return its binary footprint.

    The footprint (warped alpha > 0) is the exact ground-truth occlusion
    mask used to supervise segmentation.
    """
    m = _anchor_transform(record, asset)
    h, w = record.image.shape[:2]
    rgb = asset.overlay[..., :3]
    alpha = asset.overlay[..., 3]
    warped_rgb = cv2.warpAffine(
        rgb, m, (w, h), flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT, borderValue=0,
    )
    # Nearest keeps warped alpha in the original value set, so a fully
    # opaque sticker stays binary at its edge and compositing is idempotent.
    warped_alpha = cv2.warpAffine(
        alpha, m, (w, h), flags=cv2.INTER_NEAREST,
        borderMode=cv2.BORDER_CONSTANT, borderValue=0,
    )
    mask = (warped_alpha > 0).astype(np.uint8)
    if mask.sum() == 0:
        raise DegeneratePlacement(f"overlay '{asset.name}' lands outside the image")
    a = warped_alpha.astype(np.float64)[..., None] / 255.0
    out = np.rint(a * warped_rgb.astype(np.float64) + (1.0 - a) * record.image.astype(np.float64))
    return record.with_image(out.astype(np.uint8)), mask


def apply_filter(record: FaceRecord, asset: FilterAsset) -> FaceRecord:
    """Composite the overlay onto the face; identity and landmarks unchanged."""
    out, _ = composite_with_mask(record, asset)
    return out


def coverage_intensity(
    original: FaceRecord, filtered: FaceRecord, polygon: FacePolygon,
    filter_name: str = "",
) -> CoverageReport:
    """Mean absolute luma change inside the facial polygon, as a fraction.

    Symmetric in (original, filtered); exactly 0 for an unchanged image.
    """
    require_same_shape(original.image, filtered.image)
    mask = polygon.mask(original.image.shape)
    count = int(mask.sum())
    if count == 0 or polygon.pixel_count == 0:
        raise DegenerateLandmarks("polygon covers no pixels")
    g0 = luma(original.image)[mask]
    g1 = luma(filtered.image)[mask]
    intensity = float(np.abs(g1 - g0).sum() / (count * 255.0))
    return CoverageReport(
        coverage_intensity=intensity,
        coverage_class=classify_coverage(intensity),
        filter_name=filter_name,
    )


# --------------------------------------------------------------------------
# Asset disk format: RGBA image plus a JSON sidecar with the same stem.


def save_asset(asset: FilterAsset, png_path) -> None:
    write_rgba(png_path, asset.overlay)
    sidecar = {
        "name": asset.name,
        "placement": asset.placement,
        "anchors": [
            {"landmark_index": int(a.landmark_index),
             "overlay_xy": [float(a.overlay_xy[0]), float(a.overlay_xy[1])]}
            for a in asset.anchors
        ],
    }
    with open(_sidecar_path(png_path), "w") as f:
        json.dump(sidecar, f, indent=2)
        f.write("\n")


def load_asset(png_path) -> FilterAsset:
    overlay = read_rgba(png_path)
    with open(_sidecar_path(png_path)) as f:
        meta = json.load(f)
    anchors = [
        Anchor(int(a["landmark_index"]), tuple(a["overlay_xy"]))
        for a in meta["anchors"]
    ]
    return FilterAsset(overlay, anchors, meta["placement"], meta["name"])


def _sidecar_path(png_path) -> str:
    base, _ = os.path.splitext(str(png_path))
    return base + ".json"


# --------------------------------------------------------------------------
# Dataset manifest: one JSON object per line.


def write_manifest(rows, path) -> None:
    os.makedirs(os.path.dirname(str(path)) or ".", exist_ok=True)
    with open(path, "w") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def read_manifest(path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def plan_composites(records, assets):
    """Every (record, asset) pair, in manifest order."""
    return [(r, a) for r in records for a in assets]


def build_manifest(records, assets, output_root):
    """Write all composites plus the unaltered baselines under output_root.

    Emits one manifest row per written image.  Filtered rows additionally
    carry the ground-truth occlusion mask and the path of the clean source
    image so downstream training can pair them.
    """
    records = list(records)
    assets = list(assets)
    if not records:
        raise NoData("no records to composite")
    try:
        os.makedirs(output_root, exist_ok=True)
        probe = os.path.join(output_root, ".write_test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as e:
        raise IoError(f"output root not writable: {output_root}") from e

    rows = []
    for ridx, record in enumerate(records):
        key = f"r{ridx:05d}"
        base_rel = os.path.join("images", f"{key}_base.png")
        write_rgb(os.path.join(output_root, base_rel), record.image)
        rows.append({
            "path": base_rel,
            "identity": record.identity,
            "source_id": record.source_id,
            "filter_name": None,
            "placement": None,
            "coverage_intensity": 0.0,
            "coverage_class": None,
            "role": "baseline",
        })
        polygon = facial_polygon(record)
        for asset in assets:
            filtered, mask = composite_with_mask(record, asset)
            report = coverage_intensity(record, filtered, polygon, asset.name)
            img_rel = os.path.join("images", f"{key}_{asset.name}.png")
            mask_rel = os.path.join("masks", f"{key}_{asset.name}.png")
            write_rgb(os.path.join(output_root, img_rel), filtered.image)
            write_mask(os.path.join(output_root, mask_rel), mask)
            rows.append({
                "path": img_rel,
                "identity": record.identity,
                "source_id": record.source_id,
                "filter_name": asset.name,
                "placement": asset.placement,
                "coverage_intensity": report.coverage_intensity,
                "coverage_class": report.coverage_class,
                "role": "filtered",
                "mask_path": mask_rel,
                "source_path": base_rel,
            })
    write_manifest(rows, os.path.join(output_root, "manifest.jsonl"))
    return rows
