"""Procedural face corpus and sticker assets.

Cartoon faces are drawn from per-identity geometry/color parameters, with
small per-session jitter, and expose the 68-point landmark layout by
construction.  Ten sticker overlays with anchor metadata stand in for
downloadable filter packs; the three whole-face ones form the held-out
test split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .compositor import Anchor, FaceRecord, FilterAsset

TRAIN_FILTERS = (
    "round_glasses",
    "star_shades",
    "dog_nose",
    "clown_nose",
    "sparkle_brow",
    "mustache",
    "forest_mask",
)
TEST_FILTERS = ("duck_beak", "stripe_mask", "azure_mask")
ALL_FILTERS = TRAIN_FILTERS + TEST_FILTERS


@dataclass
class IdentityParams:
    skin: tuple
    background: tuple
    face_rx: float
    face_ry: float
    eye_dx: float
    eye_y: float
    eye_rx: float
    eye_ry: float
    iris: tuple
    brow_y: float
    brow_thick: float
    nose_len: float
    nose_w: float
    mouth_y: float
    mouth_rx: float
    mouth_ry: float
    lip: tuple
    hair: tuple


def make_identity(seed) -> IdentityParams:
    rng = np.random.default_rng(seed)
    r = int(rng.integers(185, 240))
    g = r - int(rng.integers(25, 55))
    b = g - int(rng.integers(20, 50))
    bg = tuple(int(v) for v in rng.integers(30, 110, size=3))
    return IdentityParams(
        skin=(r, g, b),
        background=bg,
        face_rx=float(rng.uniform(0.28, 0.34)),
        face_ry=float(rng.uniform(0.36, 0.42)),
        eye_dx=float(rng.uniform(0.13, 0.17)),
        eye_y=float(rng.uniform(-0.15, -0.10)),
        eye_rx=float(rng.uniform(0.05, 0.07)),
        eye_ry=float(rng.uniform(0.025, 0.04)),
        iris=tuple(int(v) for v in rng.integers(20, 110, size=3)),
        brow_y=float(rng.uniform(0.055, 0.085)),
        brow_thick=float(rng.uniform(0.012, 0.024)),
        nose_len=float(rng.uniform(0.10, 0.15)),
        nose_w=float(rng.uniform(0.035, 0.06)),
        mouth_y=float(rng.uniform(0.17, 0.23)),
        mouth_rx=float(rng.uniform(0.08, 0.12)),
        mouth_ry=float(rng.uniform(0.028, 0.05)),
        lip=(int(rng.integers(130, 200)), int(rng.integers(30, 80)), int(rng.integers(40, 90))),
        hair=tuple(int(v) for v in rng.integers(15, 120, size=3)),
    )


def _landmarks(p: IdentityParams, cx, cy, s, size) -> np.ndarray:
    w = h = size
    rx, ry = p.face_rx * w * s, p.face_ry * h * s
    pts = []

    # 0-16 jaw: lower face arc, left temple through chin to right temple
    for i in range(17):
        theta = math.radians(160.0 - i * (140.0 / 16.0))
        pts.append((cx + rx * math.cos(theta), cy + ry * math.sin(theta)))

    eye_lx = cx - p.eye_dx * w * s
    eye_rx_c = cx + p.eye_dx * w * s
    eye_cy = cy + p.eye_y * h * s
    erx, ery = p.eye_rx * w * s, p.eye_ry * h * s
    brow_cy = eye_cy - p.brow_y * h * s

    # 17-26 brows, five points each
    for ex in (eye_lx, eye_rx_c):
        for k in range(5):
            t = k / 4.0
            x = ex + (t - 0.5) * 2.6 * erx
            y = brow_cy - math.sin(t * math.pi) * 0.35 * ery * 2.0
            pts.append((x, y))

    # 27-30 nose bridge, 31-35 nostril row
    nose_top = cy - 0.04 * h * s
    nose_tip = cy + p.nose_len * h * s
    for k in range(4):
        t = k / 3.0
        pts.append((cx, nose_top + t * (nose_tip - nose_top)))
    nw = p.nose_w * w * s
    for k in range(5):
        t = k / 4.0
        x = cx + (t - 0.5) * 2.0 * nw
        y = nose_tip + math.sin(t * math.pi) * 0.25 * nw
        pts.append((x, y))

    # 36-47 eyes, six-point outline each, outer corners first/last
    for ex in (eye_lx, eye_rx_c):
        pts.extend([
            (ex - erx, eye_cy),
            (ex - erx / 2, eye_cy - ery),
            (ex + erx / 2, eye_cy - ery),
            (ex + erx, eye_cy),
            (ex + erx / 2, eye_cy + ery),
            (ex - erx / 2, eye_cy + ery),
        ])

    # 48-59 outer lip, 60-67 inner lip
    mcy = cy + p.mouth_y * h * s
    mrx, mry = p.mouth_rx * w * s, p.mouth_ry * h * s
    for k in range(7):
        theta = math.radians(180.0 + k * 30.0)
        pts.append((cx + mrx * math.cos(theta), mcy + mry * math.sin(theta)))
    for k in range(1, 6):
        theta = math.radians(k * 30.0)
        pts.append((cx + mrx * math.cos(theta), mcy + mry * math.sin(theta)))
    for k in range(8):
        theta = math.radians(180.0 + k * 45.0)
        pts.append((cx + 0.6 * mrx * math.cos(theta), mcy + 0.5 * mry * math.sin(theta)))

    arr = np.array(pts, dtype=np.float64)
    return np.clip(arr, 1.0, size - 2.0)


def _pt(x, y):
    return int(round(x)), int(round(y))


def render_face(p: IdentityParams, identity: str, session: int, seed, size: int = 64) -> FaceRecord:
    rng = np.random.default_rng(seed)
    w = h = size
    cx = w / 2 + float(rng.uniform(-0.02, 0.02)) * w
    cy = h / 2 + float(rng.uniform(-0.02, 0.02)) * h
    s = float(rng.uniform(0.97, 1.02))
    gain = float(rng.uniform(0.92, 1.08))

    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = p.background
    rx, ry = p.face_rx * w * s, p.face_ry * h * s

    # hair cap behind the face
    cv2.ellipse(img, _pt(cx, cy - 0.08 * h * s), _pt(rx * 1.12, ry * 1.1),
                0, 180, 360, p.hair, -1)
    cv2.ellipse(img, _pt(cx, cy), _pt(rx, ry), 0, 0, 360, p.skin, -1)

    eye_lx = cx - p.eye_dx * w * s
    eye_rx_c = cx + p.eye_dx * w * s
    eye_cy = cy + p.eye_y * h * s
    erx, ery = p.eye_rx * w * s, p.eye_ry * h * s
    for ex in (eye_lx, eye_rx_c):
        cv2.ellipse(img, _pt(ex, eye_cy), _pt(erx, ery), 0, 0, 360, (245, 245, 245), -1)
        cv2.circle(img, _pt(ex, eye_cy), max(1, int(ery * 0.8)), p.iris, -1)
        brow_cy = eye_cy - p.brow_y * h * s
        cv2.line(img, _pt(ex - erx, brow_cy), _pt(ex + erx, brow_cy - 0.3 * ery),
                 p.hair, max(1, int(p.brow_thick * h * s)))

    nose_tip = cy + p.nose_len * h * s
    shade = tuple(max(0, c - 35) for c in p.skin)
    cv2.line(img, _pt(cx, cy - 0.02 * h * s), _pt(cx, nose_tip), shade,
             max(1, int(0.012 * w * s)))
    nw = p.nose_w * w * s
    for dx in (-nw * 0.7, nw * 0.7):
        cv2.circle(img, _pt(cx + dx, nose_tip), max(1, int(0.012 * w * s)), shade, -1)

    mcy = cy + p.mouth_y * h * s
    cv2.ellipse(img, _pt(cx, mcy), _pt(p.mouth_rx * w * s, p.mouth_ry * h * s),
                0, 0, 360, p.lip, -1)
    dark_lip = tuple(max(0, c - 50) for c in p.lip)
    cv2.line(img, _pt(cx - p.mouth_rx * w * s, mcy), _pt(cx + p.mouth_rx * w * s, mcy),
             dark_lip, 1)

    out = np.clip(img.astype(np.float64) * gain
                  + rng.normal(0.0, 2.0, img.shape), 0, 255)
    img = np.rint(out).astype(np.uint8)
    landmarks = _landmarks(p, cx, cy, s, size)
    return FaceRecord(img, landmarks, identity=identity,
                      source_id=f"{identity}_{session:02d}")


def make_dataset(n_identities: int, sessions: int, size: int, seed: int,
                 prefix: str = "a_") -> list:
    """FaceRecord pool; source_id = '<prefix>idNNN_SS'."""
    records = []
    for k in range(n_identities):
        identity = f"{prefix}id{k:03d}"
        params = make_identity([seed, 101, k])
        for s in range(sessions):
            records.append(render_face(params, identity, s, [seed, 202, k, s], size))
    return records


# --------------------------------------------------------------------------
# Sticker assets


def _canvas(h, w):
    return np.zeros((h, w, 4), dtype=np.uint8)


def _full_face_asset(name, painter) -> FilterAsset:
    # Canvas is painted edge to edge; anchored to the jaw extremes so the
    # warped overlay over-covers the whole facial polygon.
    c = _canvas(200, 200)
    painter(c)
    anchors = [Anchor(0, (60.0, 100.0)), Anchor(16, (140.0, 100.0))]
    return FilterAsset(c, anchors, "total_face", name)


def make_sticker_assets() -> list:
    assets = []

    c = _canvas(120, 200)
    cv2.circle(c, (55, 60), 34, (20, 20, 25, 255), 6)
    cv2.circle(c, (145, 60), 34, (20, 20, 25, 255), 6)
    cv2.line(c, (89, 60), (111, 60), (20, 20, 25, 255), 6)
    assets.append(FilterAsset(
        c, [Anchor(36, (21.0, 60.0)), Anchor(45, (179.0, 60.0))],
        "eyes", "round_glasses"))

    c = _canvas(120, 200)
    cv2.rectangle(c, (15, 35), (92, 85), (25, 25, 60, 255), -1)
    cv2.rectangle(c, (108, 35), (185, 85), (25, 25, 60, 255), -1)
    cv2.line(c, (92, 50), (108, 50), (25, 25, 60, 255), 8)
    assets.append(FilterAsset(
        c, [Anchor(36, (15.0, 60.0)), Anchor(45, (185.0, 60.0))],
        "eyes", "star_shades"))

    c = _canvas(120, 160)
    cv2.ellipse(c, (80, 60), (42, 30), 0, 0, 360, (95, 60, 40, 255), -1)
    cv2.circle(c, (62, 66), 8, (30, 18, 12, 255), -1)
    cv2.circle(c, (98, 66), 8, (30, 18, 12, 255), -1)
    assets.append(FilterAsset(
        c, [Anchor(31, (50.0, 60.0)), Anchor(35, (110.0, 60.0))],
        "nose", "dog_nose"))

    c = _canvas(120, 160)
    cv2.circle(c, (80, 60), 30, (225, 30, 30, 255), -1)
    cv2.circle(c, (70, 50), 9, (255, 140, 140, 255), -1)
    assets.append(FilterAsset(
        c, [Anchor(31, (56.0, 60.0)), Anchor(35, (104.0, 60.0))],
        "nose", "clown_nose"))

    c = _canvas(160, 160)
    star = np.array([[80, 20], [95, 60], [140, 60], [104, 86], [118, 130],
                     [80, 102], [42, 130], [56, 86], [20, 60], [65, 60]],
                    dtype=np.int32)
    cv2.fillPoly(c, [star], (250, 210, 60, 255))
    assets.append(FilterAsset(
        c, [Anchor(27, (80.0, 130.0)), Anchor(30, (80.0, 20.0))],
        "nose", "sparkle_brow"))

    c = _canvas(100, 200)
    cv2.ellipse(c, (60, 50), (45, 16), 15, 0, 360, (70, 40, 25, 255), -1)
    cv2.ellipse(c, (140, 50), (45, 16), -15, 0, 360, (70, 40, 25, 255), -1)
    assets.append(FilterAsset(
        c, [Anchor(48, (30.0, 58.0)), Anchor(54, (170.0, 58.0))],
        "mouth", "mustache"))

    c = _canvas(120, 200)
    cv2.ellipse(c, (100, 50), (80, 34), 0, 0, 360, (245, 190, 40, 255), -1)
    cv2.line(c, (20, 50), (180, 50), (190, 130, 20, 255), 5)
    assets.append(FilterAsset(
        c, [Anchor(48, (35.0, 50.0)), Anchor(54, (165.0, 50.0))],
        "mouth", "duck_beak"))

    # Full-face paints leave the eyes and mouth uncovered, like a real
    # costume mask; the openings land at fixed canvas spots because the
    # jaw anchors pin the warp.
    def cut_openings(c):
        for x, y, rx, ry in ((80, 64, 13, 9), (120, 64, 13, 9),
                             (100, 110, 16, 9)):
            cv2.ellipse(c, (x, y), (rx, ry), 0, 0, 360, (0, 0, 0, 0), -1)

    def azure(c):
        c[:] = (5, 10, 60, 255)
        cv2.circle(c, (100, 86), 52, (2, 5, 35, 255), -1)
        cut_openings(c)

    def forest(c):
        c[:] = (4, 30, 14, 255)
        cv2.rectangle(c, (40, 40), (160, 160), (2, 18, 8, 255), -1)
        cut_openings(c)

    def stripes(c):
        # Tone pair sits at luma 60 and 190; skin tones fall between the
        # two, which keeps the averaged contrast nearly constant.
        colors = [(150, 20, 30, 255), (130, 220, 190, 255)]
        for i in range(0, 200, 25):
            c[i:i + 25, :] = colors[(i // 25) % len(colors)]
        cut_openings(c)

    assets.append(_full_face_asset("azure_mask", azure))
    assets.append(_full_face_asset("forest_mask", forest))
    assets.append(_full_face_asset("stripe_mask", stripes))

    by_name = {a.name: a for a in assets}
    return [by_name[n] for n in ALL_FILTERS]
