import numpy as np
import pytest

from defilter.engines import (
    BaselineEngine,
    assemble_trials,
    baseline_embed,
    cosine_similarity,
)
from defilter.errors import ZeroVector
from defilter.schedules import LossWeights, OptimSchedule
from defilter.errors import InvalidArgument


class TestBaselineEmbed:
    def test_unit_norm_and_zero_mean(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
        v = baseline_embed(img)
        assert v.shape == (1024,)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        assert v.mean() == pytest.approx(0.0, abs=1e-12)

    def test_brightness_shift_invariant(self):
        rng = np.random.default_rng(1)
        img = rng.integers(40, 200, (64, 64, 3), dtype=np.uint8)
        brighter = np.clip(img.astype(int) + 30, 0, 255).astype(np.uint8)
        a, b = baseline_embed(img), baseline_embed(brighter)
        assert cosine_similarity(a, b) == pytest.approx(1.0, abs=1e-6)

    def test_constant_image_rejected(self):
        img = np.full((64, 64, 3), 77, np.uint8)
        with pytest.raises(ZeroVector):
            baseline_embed(img)


class TestCosine:
    def test_self_similarity_one(self):
        v = np.array([3.0, 4.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal_zero(self):
        assert cosine_similarity(np.array([1.0, 0.0]),
                                 np.array([0.0, 1.0])) == pytest.approx(0.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            cosine_similarity(np.zeros(4), np.ones(4))


class TestAssembleTrials:
    def _faces(self, identities, per_identity, seed):
        rng = np.random.default_rng(seed)
        out = []
        for ident in identities:
            # Base pattern depends only on the identity, so probe and
            # reference sets agree on what each person looks like.
            base_rng = np.random.default_rng(sum(ident.encode()))
            base = base_rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
            for s in range(per_identity):
                jitter = np.clip(
                    base.astype(int) + rng.integers(-4, 5, base.shape),
                    0, 255).astype(np.uint8)
                out.append((ident, jitter, f"{ident}_{s}"))
        return out

    def test_counts_and_determinism(self):
        probes = self._faces(["a", "b", "c"], 2, 0)
        refs = self._faces(["a", "b", "c"], 2, 1)
        engine = BaselineEngine()
        t1 = assemble_trials(probes, refs, engine, seed=9, impostors_per_probe=3)
        t2 = assemble_trials(probes, refs, engine, seed=9, impostors_per_probe=3)
        assert len(t1.genuine_scores) == 12   # 6 probes x 2 same-identity refs
        assert len(t1.impostor_scores) == 18  # 6 probes x 3 sampled
        assert np.array_equal(t1.genuine_scores, t2.genuine_scores)
        assert np.array_equal(t1.impostor_scores, t2.impostor_scores)

    def test_genuine_scores_exceed_impostor_on_average(self):
        probes = self._faces(["a", "b", "c", "d"], 2, 3)
        refs = self._faces(["a", "b", "c", "d"], 2, 4)
        trials = assemble_trials(probes, refs, BaselineEngine(), seed=0)
        # Jittered copies of one identity correlate; different identities
        # are independent noise fields.
        assert np.mean(trials.genuine_scores) > np.mean(trials.impostor_scores)

    def test_enrol_failures_counted_and_excluded(self):
        probes = [("a", np.full((32, 32, 3), 5, np.uint8), "a_0")]
        refs = self._faces(["a", "b"], 1, 5)
        trials = assemble_trials(probes, refs, BaselineEngine(), seed=0)
        assert trials.enrol_failures == 1
        assert trials.total_enrol_attempts == 3
        assert len(trials.genuine_scores) == 0

    def test_return_pairs_labels(self):
        probes = self._faces(["a", "b"], 1, 6)
        refs = self._faces(["a", "b"], 1, 7)
        trials, pairs = assemble_trials(
            probes, refs, BaselineEngine(), seed=0, return_pairs=True)
        assert len(pairs) == len(trials.genuine_scores) + len(trials.impostor_scores)
        for p in pairs:
            assert p["probe"] and p["reference"]
            assert isinstance(p["same_identity"], bool)


class TestOptimSchedule:
    def test_decay_produces_exact_decimal_values(self):
        s = OptimSchedule()
        assert s.lr_at(0) == 0.001
        assert s.lr_at(49_999) == 0.001
        assert s.lr_at(50_000) == 0.0001
        assert s.lr_at(100_000) == 0.00001

    def test_negative_iteration_rejected(self):
        with pytest.raises(InvalidArgument):
            OptimSchedule().lr_at(-1)

    def test_invalid_rates_rejected(self):
        with pytest.raises(InvalidArgument):
            OptimSchedule(initial_lr=0.0)
        with pytest.raises(InvalidArgument):
            OptimSchedule(decay_factor=0.0)


class TestLossWeights:
    def test_non_positive_rejected(self):
        with pytest.raises(InvalidArgument):
            LossWeights(perc=0.0)
        with pytest.raises(InvalidArgument):
            LossWeights(adv=-1.0)
