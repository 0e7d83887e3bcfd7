import csv
import json
import os
import subprocess
import sys

import pytest

from defilter.config import ExperimentConfig, config_hash, derive_seed, load_config
from defilter.errors import (
    ConfigError,
    InvalidArgument,
    StageDependencyError,
    StaleArtifactError,
)
from defilter.pipeline import STAGE_ORDER, read_artifact, run_all, run_stage


def micro_config(**overrides):
    values = dict(
        image_size=32,
        train_identities=3,
        eval_identities=3,
        sessions=2,
        augment_per_image=1,
        n_subregions=6,
        seg_base_channels=4,
        seg_iterations=3,
        gan_base_channels=4,
        gan_iterations=3,
        impostors_per_probe=4,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("stages"))
    cfg = micro_config()
    results = run_all(cfg, root)
    return cfg, root, results


class TestConfig:
    def test_profiles(self):
        desk = load_config(profile="desk")
        paper = load_config(profile="paper")
        assert desk.image_size == 64
        assert paper.image_size == 512
        assert paper.seg_base_channels == 32

    def test_unknown_profile_rejected(self):
        with pytest.raises(ConfigError):
            load_config(profile="laptop")

    def test_seed_override(self):
        cfg = load_config(profile="desk", seed=123)
        assert cfg.seed == 123

    def test_yaml_overrides(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text("train_identities: 4\nseed: 9\n")
        cfg = load_config(str(p), profile="desk")
        assert cfg.train_identities == 4
        assert cfg.seed == 9

    def test_unknown_yaml_key_rejected(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text("not_a_real_knob: 1\n")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_missing_file_rejected(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/cfg.yaml")

    def test_image_size_must_be_multiple_of_32(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(image_size=48)

    def test_hash_stable_and_sensitive(self):
        a = micro_config()
        b = micro_config()
        c = micro_config(seed=a.seed + 1)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)

    def test_derived_seeds_differ_by_label(self):
        assert derive_seed(7, "augment") != derive_seed(7, "train_seg")
        assert derive_seed(7, "augment") == derive_seed(7, "augment")


class TestStageGraph:
    def test_unknown_stage_rejected(self, tmp_path):
        with pytest.raises(InvalidArgument):
            run_stage(micro_config(), "deploy", str(tmp_path))

    def test_missing_dependency_rejected(self, tmp_path):
        with pytest.raises(StageDependencyError):
            run_stage(micro_config(), "train_seg", str(tmp_path))

    def test_stale_dependency_rejected(self, tmp_path):
        root = str(tmp_path)
        run_stage(micro_config(), "synth", root)
        changed = micro_config(seed=99)
        with pytest.raises(StaleArtifactError):
            run_stage(changed, "augment", root)

    def test_rerun_is_noop_with_same_hash(self, micro_run):
        cfg, root, results = micro_run
        again = run_stage(cfg, "synth", root)
        assert again["skipped"] is True
        assert again["content_hash"] == results[0]["content_hash"]


class TestArtifacts:
    def test_all_stages_present(self, micro_run):
        _, root, results = micro_run
        assert [r["stage"] for r in results] == list(STAGE_ORDER)
        for stage in STAGE_ORDER:
            art = read_artifact(root, stage)
            assert art is not None
            assert art["content_hash"]

    def test_manifest_paths_are_relative(self, micro_run):
        _, root, _ = micro_run
        for rel in ("synth/train/manifest.jsonl", "synth/eval/manifest.jsonl",
                    "augment/manifest.jsonl", "remove/manifest.jsonl"):
            with open(os.path.join(root, rel)) as f:
                for line in f:
                    row = json.loads(line)
                    for key in ("path", "mask_path", "source_path"):
                        if row.get(key):
                            assert not os.path.isabs(row[key])

    def test_metrics_csv_covers_all_conditions(self, micro_run):
        _, root, _ = micro_run
        with open(os.path.join(root, "evaluate", "metrics.csv")) as f:
            rows = list(csv.DictReader(f))
        conditions = {r["condition"] for r in rows}
        assert conditions == {"baseline", "filtered", "reconstructed"}
        for r in rows:
            assert 0.0 <= float(r["eer"]) <= 1.0
            assert 0.0 <= float(r["fte"]) <= 1.0

    def test_eval_groups_cover_coverage_classes(self, micro_run):
        _, root, _ = micro_run
        with open(os.path.join(root, "evaluate", "metrics.csv")) as f:
            rows = list(csv.DictReader(f))
        classes = {r["group"] for r in rows if r["group_type"] == "coverage"}
        assert classes == {"low", "medium", "high"}

    def test_report_renders_figures_and_tables(self, micro_run):
        _, root, _ = micro_run
        files = os.listdir(os.path.join(root, "report"))
        assert "tables.csv" in files
        assert "delta.csv" in files
        assert "notes.txt" in files
        assert any(f.startswith("det_") and f.endswith(".png") for f in files)

    def test_det_csvs_exist_per_condition(self, micro_run):
        _, root, _ = micro_run
        files = os.listdir(os.path.join(root, "evaluate"))
        for cond in ("baseline", "filtered", "reconstructed"):
            assert any(f.startswith(f"det_{cond}_") for f in files)


class TestCli:
    def _run(self, *argv, cwd):
        return subprocess.run(
            [sys.executable, "-m", "defilter.cli", *argv],
            capture_output=True, text=True, cwd=cwd)

    def test_bad_config_exits_3(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("no_such_knob: 1\n")
        proc = self._run("synth", "--config", str(bad),
                         "--stage-dir", str(tmp_path / "s"), cwd=str(tmp_path))
        assert proc.returncode == 3

    def test_missing_dependency_exits_2(self, tmp_path):
        proc = self._run("evaluate", "--stage-dir", str(tmp_path / "s"),
                         cwd=str(tmp_path))
        assert proc.returncode == 2

    def test_synth_exits_0_and_reports_hash(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            "image_size: 32\ntrain_identities: 2\neval_identities: 2\n"
            "sessions: 1\nseg_base_channels: 4\ngan_base_channels: 4\n"
            "seg_iterations: 1\ngan_iterations: 1\n")
        proc = self._run("synth", "--config", str(cfg),
                         "--stage-dir", str(tmp_path / "s"), cwd=str(tmp_path))
        assert proc.returncode == 0
        assert proc.stdout.startswith("synth: built (")
        again = self._run("synth", "--config", str(cfg),
                          "--stage-dir", str(tmp_path / "s"), cwd=str(tmp_path))
        assert again.returncode == 0
        assert again.stdout.startswith("synth: up-to-date (")
