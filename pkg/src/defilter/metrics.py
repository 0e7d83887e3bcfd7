"""Verification metrics over genuine/impostor score sets.

Conventions fixed here so golden files stay stable:
  - higher score = more similar; a comparison matches iff score >= t
  - candidate thresholds are the union of observed scores, plus one
    sentinel above the maximum so FMR = 0 is always reachable
  - all rates are fractions; rendering to percent happens in reports
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateRange, InvalidArgument, NoData


@dataclass
class TrialSet:
    genuine_scores: list
    impostor_scores: list
    enrol_failures: int = 0
    total_enrol_attempts: int = 0

    def __post_init__(self):
        g = np.asarray(self.genuine_scores, dtype=np.float64)
        i = np.asarray(self.impostor_scores, dtype=np.float64)
        if g.size and not np.isfinite(g).all():
            raise InvalidArgument("non-finite genuine score")
        if i.size and not np.isfinite(i).all():
            raise InvalidArgument("non-finite impostor score")
        self.genuine_scores = g
        self.impostor_scores = i


@dataclass
class DetectionResult:
    detected: bool
    confidence: float
    engine_id: str
    native_range: tuple

    def __post_init__(self):
        lo, hi = self.native_range
        if self.detected and not lo <= self.confidence <= hi:
            raise InvalidArgument(
                f"confidence {self.confidence} outside native range [{lo}, {hi}]"
            )


@dataclass
class DetectionStats:
    mean: float
    std: float
    error_rate: float


def minmax_normalize(scores, native_range, target_range=(0.0, 1.0)):
    """Affine rescale taking native_range onto target_range.

    Order-preserving for an increasing target range, so threshold-sweep
    metrics are unchanged by normalization.
    """
    x_min, x_max = float(native_range[0]), float(native_range[1])
    if not x_max > x_min:
        raise DegenerateRange(f"native range [{x_min}, {x_max}] has no width")
    r_min, r_max = float(target_range[0]), float(target_range[1])
    x = np.asarray(scores, dtype=np.float64)
    out = (x - x_min) / (x_max - x_min) * (r_max - r_min) + r_min
    return out.tolist()


def detection_stats(results) -> DetectionStats:
    """Mean/population-std of detected confidences plus the miss rate."""
    results = list(results)
    if not results:
        raise NoData("no detection results")
    engines = {r.engine_id for r in results}
    if len(engines) > 1:
        raise InvalidArgument(f"mixed engines in one stats pass: {sorted(engines)}")
    conf = np.array([r.confidence for r in results if r.detected], dtype=np.float64)
    misses = sum(1 for r in results if not r.detected)
    if conf.size == 0:
        return DetectionStats(math.nan, math.nan, 1.0)
    return DetectionStats(
        mean=float(conf.mean()),
        std=float(conf.std()),
        error_rate=misses / len(results),
    )


def _rates_at(trials: TrialSet, thresholds: np.ndarray):
    """FMR and FNMR at each threshold; match iff score >= t."""
    gen = np.sort(trials.genuine_scores)
    imp = np.sort(trials.impostor_scores)
    n_match = len(imp) - np.searchsorted(imp, thresholds, side="left")
    n_reject = np.searchsorted(gen, thresholds, side="left")
    fmr = n_match / len(imp)
    fnmr = n_reject / len(gen)
    return fmr, fnmr


def _candidate_thresholds(trials: TrialSet, with_sentinel: bool) -> np.ndarray:
    scores = np.concatenate([trials.genuine_scores, trials.impostor_scores])
    t = np.unique(scores)
    if with_sentinel:
        t = np.append(t, t[-1] + 1.0)
    return t


def _require_both_classes(trials: TrialSet):
    if len(trials.genuine_scores) == 0 or len(trials.impostor_scores) == 0:
        raise NoData("need both genuine and impostor scores")


def eer(trials: TrialSet):
    """Operating point where FMR and FNMR meet.

    Sweeps the observed scores, takes the first threshold minimizing
    |FMR - FNMR|, and returns the midpoint of the two rates there along
    with that threshold.  No interpolation between thresholds.
    """
    _require_both_classes(trials)
    thresholds = _candidate_thresholds(trials, with_sentinel=False)
    fmr, fnmr = _rates_at(trials, thresholds)
    i = int(np.argmin(np.abs(fmr - fnmr)))
    return (fmr[i] + fnmr[i]) / 2.0, float(thresholds[i])


def fnmr_at_fmr_detailed(trials: TrialSet, fmr_targets):
    """Per target: (FNMR, attained FMR, threshold) at the lowest
    threshold whose FMR does not exceed the target.

    The sentinel threshold above every score guarantees a (possibly
    degenerate) operating point with FMR = 0, so coarse impostor sets
    report their attained FMR instead of failing.
    """
    _require_both_classes(trials)
    for t in fmr_targets:
        if not 0.0 < t <= 1.0:
            raise InvalidArgument(f"FMR target {t} outside (0, 1]")
    thresholds = _candidate_thresholds(trials, with_sentinel=True)
    fmr, fnmr = _rates_at(trials, thresholds)
    out = []
    for target in fmr_targets:
        ok = fmr <= target
        i = int(np.argmax(ok))
        out.append((float(fnmr[i]), float(fmr[i]), float(thresholds[i])))
    return out


def fnmr_at_fmr(trials: TrialSet, fmr_targets):
    """FNMR at each FMR target; see fnmr_at_fmr_detailed."""
    return [fnmr for fnmr, _, _ in fnmr_at_fmr_detailed(trials, fmr_targets)]


def det_curve(trials: TrialSet):
    """Non-dominated (FMR, FNMR) staircase points, FMR ascending.

    A point survives iff no other threshold is at least as good on both
    rates; the result is suitable for normal-deviate-axis plotting.
    """
    _require_both_classes(trials)
    thresholds = _candidate_thresholds(trials, with_sentinel=True)
    fmr, fnmr = _rates_at(trials, thresholds)
    best = {}
    for f, n in zip(fmr.tolist(), fnmr.tolist()):
        if f not in best or n < best[f]:
            best[f] = n
    curve = []
    for f in sorted(best):
        n = best[f]
        if curve and n >= curve[-1][1]:
            continue
        curve.append((f, n))
    return curve


def fte(trials: TrialSet) -> float:
    """Failure-to-enrol rate; failed samples never reach the score lists."""
    if trials.total_enrol_attempts <= 0:
        raise InvalidArgument("no enrolment attempts recorded")
    return trials.enrol_failures / trials.total_enrol_attempts


def merge_trials(a: TrialSet, b: TrialSet) -> TrialSet:
    return TrialSet(
        genuine_scores=np.concatenate([a.genuine_scores, b.genuine_scores]),
        impostor_scores=np.concatenate([a.impostor_scores, b.impostor_scores]),
        enrol_failures=a.enrol_failures + b.enrol_failures,
        total_enrol_attempts=a.total_enrol_attempts + b.total_enrol_attempts,
    )
