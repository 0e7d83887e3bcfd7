"""Face-engine adapters and the built-in deterministic baseline.

Real detectors/recognizers stay behind the EngineAdapter surface; the
baseline engine below is a fixed, dependency-free stand-in so the whole
harness runs offline with reproducible numbers.
"""

from __future__ import annotations

import numpy as np
import cv2

from .errors import ZeroVector
from .imgutils import luma
from .metrics import DetectionResult, TrialSet

EMBED_SIZE = 32


class EngineAdapter:
    """Contract every face engine plugs in through."""

    engine_id = "abstract"
    native_range = (0.0, 1.0)

    def detect(self, image) -> DetectionResult:
        raise NotImplementedError

    def quality(self, image) -> float:
        raise NotImplementedError

    def embed(self, image) -> np.ndarray:
        raise NotImplementedError

    def compare(self, v1, v2) -> float:
        raise NotImplementedError


def baseline_embed(image: np.ndarray) -> np.ndarray:
    """Grayscale 32x32 crop statistics as a unit vector.

    Zero-mean before normalization, so uniform brightness shifts do not
    move the embedding.  Constant images have no direction to normalize
    and raise ZeroVector.
    """
    g = luma(image, rounded=False) if image.ndim == 3 else image.astype(np.float64)
    small = cv2.resize(g, (EMBED_SIZE, EMBED_SIZE), interpolation=cv2.INTER_AREA)
    v = small.reshape(-1)
    v = v - v.mean()
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ZeroVector("image has zero variance after mean removal")
    return v / norm


def cosine_similarity(v1: np.ndarray, v2: np.ndarray) -> float:
    n1 = float(np.linalg.norm(v1))
    n2 = float(np.linalg.norm(v2))
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroVector("cannot compare a zero vector")
    return float(np.dot(v1, v2) / (n1 * n2))


class BaselineEngine(EngineAdapter):
    engine_id = "baseline-cosine"
    native_range = (0.0, 1.0)

    def detect(self, image) -> DetectionResult:
        g = luma(image, rounded=False) if image.ndim == 3 else image.astype(np.float64)
        spread = float(g.std())
        detected = spread > 0.0
        confidence = min(1.0, spread / 128.0) if detected else 0.0
        return DetectionResult(detected, confidence, self.engine_id, self.native_range)

    def quality(self, image) -> float:
        return self.detect(image).confidence

    def embed(self, image) -> np.ndarray:
        return baseline_embed(image)

    def compare(self, v1, v2) -> float:
        return cosine_similarity(v1, v2)


def assemble_trials(
    probes,
    references,
    engine: EngineAdapter,
    seed: int = 0,
    impostors_per_probe: int = 10,
    return_pairs: bool = False,
):
    """Build a TrialSet from (identity, image[, label]) lists.

    Genuine: every probe against every reference of the same identity.
    Impostor: per probe, a fixed-seed sample of different-identity
    references.  Samples an engine cannot embed count toward enrol
    failures and are excluded from the score lists.  With return_pairs,
    also yields one record per comparison for the trial manifest.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    attempts = 0

    def enrol(items):
        nonlocal failures, attempts
        out = []
        for item in items:
            identity, image = item[0], item[1]
            label = item[2] if len(item) > 2 else None
            attempts += 1
            try:
                out.append((identity, engine.embed(image), label))
            except ZeroVector:
                failures += 1
        return out

    probe_vecs = enrol(probes)
    ref_vecs = enrol(references)
    genuine = []
    impostor = []
    pairs = []

    def record(p, r, same, score):
        if same:
            genuine.append(score)
        else:
            impostor.append(score)
        if return_pairs:
            pairs.append({
                "probe": p[2], "reference": r[2],
                "same_identity": same, "score": score,
            })

    for p in probe_vecs:
        others = [j for j, r in enumerate(ref_vecs) if r[0] != p[0]]
        for r in ref_vecs:
            if r[0] == p[0]:
                record(p, r, True, engine.compare(p[1], r[1]))
        if others:
            k = min(impostors_per_probe, len(others))
            picks = rng.choice(len(others), size=k, replace=False)
            for j in sorted(int(x) for x in picks):
                r = ref_vecs[others[j]]
                record(p, r, False, engine.compare(p[1], r[1]))
    trials = TrialSet(
        genuine_scores=genuine,
        impostor_scores=impostor,
        enrol_failures=failures,
        total_enrol_attempts=attempts,
    )
    return (trials, pairs) if return_pairs else trials
