import math

import numpy as np
import pytest

from defilter.errors import DegenerateRange, InvalidArgument, NoData
from defilter.metrics import (
    DetectionResult,
    TrialSet,
    det_curve,
    detection_stats,
    eer,
    fnmr_at_fmr,
    fnmr_at_fmr_detailed,
    fte,
    merge_trials,
    minmax_normalize,
)


def brute_rates(trials, t):
    # Literal counting definition of the two error rates at threshold t.
    gen, imp = trials.genuine_scores, trials.impostor_scores
    fmr = sum(1 for s in imp if s >= t) / len(imp)
    fnmr = sum(1 for s in gen if s < t) / len(gen)
    return fmr, fnmr


class TestTrialSet:
    def test_rejects_nan_scores(self):
        with pytest.raises(InvalidArgument):
            TrialSet([0.5, math.nan], [0.1])

    def test_rejects_inf_scores(self):
        with pytest.raises(InvalidArgument):
            TrialSet([0.5], [math.inf])


class TestMinmaxNormalize:
    def test_endpoints_map_to_target(self):
        out = minmax_normalize([3.0, 7.0], (3.0, 7.0))
        assert out == [0.0, 1.0]

    def test_custom_target_range(self):
        out = minmax_normalize([0.0, 5.0, 10.0], (0.0, 10.0), (-1.0, 1.0))
        assert out == [-1.0, 0.0, 1.0]

    def test_zero_width_range_rejected(self):
        with pytest.raises(DegenerateRange):
            minmax_normalize([1.0], (2.0, 2.0))


class TestEer:
    def test_matches_brute_force_sweep(self, rng):
        for _ in range(10):
            gen = rng.normal(0.7, 0.15, 80)
            imp = rng.normal(0.3, 0.15, 80)
            trials = TrialSet(gen, imp)
            rate, threshold = eer(trials)
            best = None
            for t in np.unique(np.concatenate([gen, imp])):
                fmr, fnmr = brute_rates(trials, t)
                gap = abs(fmr - fnmr)
                if best is None or gap < best[0]:
                    best = (gap, (fmr + fnmr) / 2.0, t)
            assert rate == best[1]
            assert threshold == best[2]

    def test_separable_scores_give_zero(self):
        trials = TrialSet([0.8, 0.9, 0.95], [0.1, 0.2, 0.3])
        rate, _ = eer(trials)
        assert rate == 0.0

    def test_identical_distributions_give_half(self):
        s = [0.4, 0.5, 0.6]
        rate, _ = eer(TrialSet(s, list(s)))
        assert rate == 0.5

    def test_empty_side_rejected(self):
        with pytest.raises(NoData):
            eer(TrialSet([], [0.5]))


class TestFnmrAtFmr:
    def test_threshold_is_lowest_meeting_target(self, rng):
        gen = rng.normal(0.7, 0.1, 200)
        imp = rng.normal(0.3, 0.1, 200)
        trials = TrialSet(gen, imp)
        for target in (0.01, 0.1, 0.5):
            (fnmr, attained, threshold), = fnmr_at_fmr_detailed(trials, [target])
            fmr_here, fnmr_here = brute_rates(trials, threshold)
            assert attained == fmr_here
            assert fnmr == fnmr_here
            assert fmr_here <= target
            # Any strictly lower candidate threshold must bust the target.
            candidates = np.unique(np.concatenate([gen, imp]))
            below = candidates[candidates < threshold]
            if below.size:
                assert brute_rates(trials, below.max())[0] > target

    def test_sentinel_reaches_zero_fmr(self):
        trials = TrialSet([0.9, 0.8], [0.7, 0.6])
        (fnmr, attained, threshold), = fnmr_at_fmr_detailed(trials, [0.0001])
        assert attained == 0.0
        assert threshold > 0.7

    def test_bad_target_rejected(self):
        trials = TrialSet([0.9], [0.1])
        with pytest.raises(InvalidArgument):
            fnmr_at_fmr(trials, [0.0])
        with pytest.raises(InvalidArgument):
            fnmr_at_fmr(trials, [1.5])


class TestDetCurve:
    def test_points_non_dominated_and_sorted(self, rng):
        gen = rng.normal(0.6, 0.2, 150)
        imp = rng.normal(0.4, 0.2, 150)
        curve = det_curve(TrialSet(gen, imp))
        fmrs = [f for f, _ in curve]
        fnmrs = [n for _, n in curve]
        assert fmrs == sorted(fmrs)
        # FMR ascending must pair with FNMR strictly descending.
        assert all(a > b for a, b in zip(fnmrs, fnmrs[1:]))
        for i, (f1, n1) in enumerate(curve):
            for j, (f2, n2) in enumerate(curve):
                if i != j:
                    assert not (f2 <= f1 and n2 <= n1 and (f2 < f1 or n2 < n1))

    def test_separable_scores_collapse_to_origin(self):
        curve = det_curve(TrialSet([0.8, 0.9], [0.1, 0.2]))
        assert curve == [(0.0, 0.0)]


class TestFte:
    def test_ratio(self):
        trials = TrialSet([0.5], [0.4], enrol_failures=3, total_enrol_attempts=12)
        assert fte(trials) == 0.25

    def test_no_attempts_rejected(self):
        with pytest.raises(InvalidArgument):
            fte(TrialSet([0.5], [0.4]))


class TestMergeTrials:
    def test_concatenates_and_sums(self):
        a = TrialSet([0.9], [0.1], enrol_failures=1, total_enrol_attempts=4)
        b = TrialSet([0.8], [0.2], enrol_failures=0, total_enrol_attempts=6)
        m = merge_trials(a, b)
        assert sorted(m.genuine_scores.tolist()) == [0.8, 0.9]
        assert sorted(m.impostor_scores.tolist()) == [0.1, 0.2]
        assert m.enrol_failures == 1
        assert m.total_enrol_attempts == 10
        assert fte(m) == 0.1


class TestDetectionStats:
    def test_mean_std_population(self):
        results = [
            DetectionResult(True, 0.2, "e", (0.0, 1.0)),
            DetectionResult(True, 0.6, "e", (0.0, 1.0)),
            DetectionResult(False, 0.0, "e", (0.0, 1.0)),
        ]
        stats = detection_stats(results)
        assert stats.mean == pytest.approx(0.4)
        assert stats.std == pytest.approx(0.2)
        assert stats.error_rate == pytest.approx(1 / 3)

    def test_all_missed(self):
        results = [DetectionResult(False, 0.0, "e", (0.0, 1.0))]
        stats = detection_stats(results)
        assert math.isnan(stats.mean)
        assert stats.error_rate == 1.0

    def test_mixed_engines_rejected(self):
        results = [
            DetectionResult(True, 0.5, "e1", (0.0, 1.0)),
            DetectionResult(True, 0.5, "e2", (0.0, 1.0)),
        ]
        with pytest.raises(InvalidArgument):
            detection_stats(results)

    def test_empty_rejected(self):
        with pytest.raises(NoData):
            detection_stats([])

    def test_confidence_outside_native_range_rejected(self):
        with pytest.raises(InvalidArgument):
            DetectionResult(True, 5.0, "e", (0.0, 1.0))
