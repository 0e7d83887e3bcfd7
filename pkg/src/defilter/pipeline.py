"""Staged experiment runner.

Each stage writes into its own directory under the stage root, published
by a temp-dir rename so readers never see partial output.  Artifacts
record the config hash and the content hashes of their inputs; rerunning
an up-to-date stage is a no-op, and a stage built under a different
config refuses to be consumed.

All paths inside manifests and CSVs are relative (to the file's own
directory, or to the stage root for trial labels), so two runs with the
same config and seed produce byte-identical text artifacts wherever the
roots live.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import shutil

import numpy as np
import torch

from .augment import augment
from .compositor import (
    FaceRecord,
    build_manifest,
    coverage_intensity,
    facial_polygon,
    read_manifest,
    save_asset,
    write_manifest,
)
from .config import ExperimentConfig, config_hash, derive_seed
from .engines import BaselineEngine, assemble_trials
from .errors import (
    ConfigError,
    InvalidArgument,
    StageDependencyError,
    StaleArtifactError,
)
from .imgutils import read_rgb, write_mask, write_rgb
from .inpaint import (
    Discriminator,
    GanCheckpoint,
    Generator,
    PerceptualNet,
    remove_filter,
    train_gan,
)
from .metrics import detection_stats, det_curve, eer, fnmr_at_fmr_detailed, fte
from .quality import mssim, psnr
from .segmenter import SegCheckpoint, build_segnet, train_segnet
from .synthfaces import make_dataset, make_sticker_assets

STAGE_ORDER = ("synth", "augment", "train_seg", "train_gan", "remove",
               "evaluate", "report")
STAGE_DEPS = {
    "synth": (),
    "augment": ("synth",),
    "train_seg": ("synth", "augment"),
    "train_gan": ("synth", "augment"),
    "remove": ("synth", "train_seg", "train_gan"),
    "evaluate": ("synth", "remove"),
    "report": ("evaluate",),
}

CONDITIONS = ("baseline", "filtered", "reconstructed")


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return "%.10g" % x
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _tree_hash(root):
    files = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            if name == "artifact.json":
                continue
            full = os.path.join(dirpath, name)
            files.append((os.path.relpath(full, root).replace(os.sep, "/"),
                          _hash_file(full)))
    h = hashlib.sha256()
    for rel, digest in files:
        h.update(rel.encode())
        h.update(b"\0")
        h.update(digest.encode())
        h.update(b"\n")
    return h.hexdigest(), [rel for rel, _ in files]


def read_artifact(stage_root, stage):
    path = os.path.join(stage_root, stage, "artifact.json")
    if not os.path.exists(path):
        return None
    with open(path) as f:
        return json.load(f)


def resolve_rows(rows, manifest_dir):
    """Copies of manifest rows with path fields made absolute."""
    out = []
    for row in rows:
        r = dict(row)
        for key in ("path", "mask_path", "source_path", "filtered_path"):
            if r.get(key):
                r[key] = os.path.normpath(os.path.join(manifest_dir, r[key]))
        out.append(r)
    return out


def run_stage(config: ExperimentConfig, stage: str, stage_root: str):
    """Execute one stage (or skip it when its artifact is current)."""
    if stage not in STAGE_ORDER:
        raise InvalidArgument(f"unknown stage '{stage}'; stages are {STAGE_ORDER}")
    cfg_hash = config_hash(config)
    os.makedirs(stage_root, exist_ok=True)

    input_hashes = {}
    for dep in STAGE_DEPS[stage]:
        art = read_artifact(stage_root, dep)
        if art is None:
            raise StageDependencyError(
                f"stage '{stage}' requires the '{dep}' artifact "
                f"({os.path.join(stage_root, dep)} is missing); run '{dep}' first"
            )
        if art["config_hash"] != cfg_hash:
            raise StaleArtifactError(
                f"'{dep}' artifact was built with config {art['config_hash']}, "
                f"current config is {cfg_hash}"
            )
        input_hashes[dep] = art["content_hash"]

    existing = read_artifact(stage_root, stage)
    if (existing
            and existing.get("config_hash") == cfg_hash
            and existing.get("input_hashes", {}) == input_hashes):
        return {**existing, "skipped": True}

    tmp = os.path.join(stage_root, f".{stage}.tmp")
    shutil.rmtree(tmp, ignore_errors=True)
    os.makedirs(tmp)
    _IMPLS[stage](config, tmp, stage_root)
    content, files = _tree_hash(tmp)
    artifact = {
        "stage": stage,
        "config_hash": cfg_hash,
        "content_hash": content,
        "input_hashes": input_hashes,
        "files": files,
    }
    with open(os.path.join(tmp, "artifact.json"), "w") as f:
        json.dump(artifact, f, indent=2, sort_keys=True)
        f.write("\n")
    final = os.path.join(stage_root, stage)
    shutil.rmtree(final, ignore_errors=True)
    os.replace(tmp, final)
    return {**artifact, "skipped": False}


def run_all(config: ExperimentConfig, stage_root: str):
    return [run_stage(config, stage, stage_root) for stage in STAGE_ORDER]


# --------------------------------------------------------------------------
# Stage implementations


def _impl_synth(config, out, stage_root):
    assets = {a.name: a for a in make_sticker_assets()}
    missing = [n for n in (*config.train_filters, *config.test_filters)
               if n not in assets]
    if missing:
        raise ConfigError(f"unknown filter names in config: {missing}")

    asset_dir = os.path.join(out, "assets")
    os.makedirs(asset_dir)
    for name in sorted(assets):
        save_asset(assets[name], os.path.join(asset_dir, f"{name}.png"))

    train_records = make_dataset(
        config.train_identities, config.sessions, config.image_size,
        derive_seed(config.seed, "synth:train"), prefix="a_")
    eval_records = make_dataset(
        config.eval_identities, config.sessions, config.image_size,
        derive_seed(config.seed, "synth:eval"), prefix="b_")

    for pool, records, names in (
        ("train", train_records, config.train_filters),
        ("eval", eval_records, config.test_filters),
    ):
        pool_dir = os.path.join(out, pool)
        build_manifest(records, [assets[n] for n in names], pool_dir)
        lm_dir = os.path.join(pool_dir, "landmarks")
        os.makedirs(lm_dir)
        for idx, rec in enumerate(records):
            with open(os.path.join(lm_dir, f"r{idx:05d}.json"), "w") as f:
                json.dump(rec.landmarks.tolist(), f)
                f.write("\n")


def _baseline_key(row):
    # build_manifest names baselines images/r{idx}_base.png
    return os.path.basename(row["path"]).split("_")[0]


def _impl_augment(config, out, stage_root):
    train_dir = os.path.join(stage_root, "synth", "train")
    rows = read_manifest(os.path.join(train_dir, "manifest.jsonl"))
    baselines = [r for r in rows if r["role"] == "baseline"]
    seed = derive_seed(config.seed, "augment")
    os.makedirs(os.path.join(out, "images"))
    os.makedirs(os.path.join(out, "masks"))
    out_rows = []
    for i, row in enumerate(baselines):
        key = _baseline_key(row)
        image = read_rgb(os.path.join(train_dir, row["path"]))
        with open(os.path.join(train_dir, "landmarks", f"{key}.json")) as f:
            landmarks = np.array(json.load(f))
        record = FaceRecord(image, landmarks, row["identity"], row["source_id"])
        polygon = facial_polygon(record)
        for j in range(config.augment_per_image):
            sub_rng = np.random.default_rng([seed, i, j])
            fill = float(sub_rng.uniform(*config.fill_range))
            inner_seed = int(sub_rng.integers(2 ** 31))
            aug_rec, mask = augment(
                record, inner_seed, n_subregions=config.n_subregions,
                fill_fraction=fill)
            rel_img = f"images/{key}_aug{j}.png"
            rel_mask = f"masks/{key}_aug{j}.png"
            write_rgb(os.path.join(out, rel_img), aug_rec.image)
            write_mask(os.path.join(out, rel_mask), mask.data)
            report = coverage_intensity(record, aug_rec, polygon, "augmented")
            out_rows.append({
                "path": rel_img,
                "identity": row["identity"],
                "source_id": row["source_id"],
                "filter_name": "augmented",
                "placement": None,
                "coverage_intensity": report.coverage_intensity,
                "coverage_class": report.coverage_class,
                "role": "augmented",
                "mask_path": rel_mask,
                "source_path": os.path.join("..", "synth", "train", row["path"]).replace(os.sep, "/"),
            })
    write_manifest(out_rows, os.path.join(out, "manifest.jsonl"))


def _training_rows(config, stage_root):
    train_dir = os.path.join(stage_root, "synth", "train")
    synth_rows = read_manifest(os.path.join(train_dir, "manifest.jsonl"))
    filtered = [r for r in synth_rows if r["role"] == "filtered"]
    aug_dir = os.path.join(stage_root, "augment")
    aug_rows = read_manifest(os.path.join(aug_dir, "manifest.jsonl"))
    return resolve_rows(filtered, train_dir) + resolve_rows(aug_rows, aug_dir)


def _impl_train_seg(config, out, stage_root):
    rows = _training_rows(config, stage_root)
    seed = derive_seed(config.seed, "train_seg")
    torch.manual_seed(seed)
    model = build_segnet(config.segnet_config())
    ckpt = train_segnet(
        model, rows, config.optim_schedule(), data_root=".",
        iterations=config.seg_iterations, batch_size=config.seg_batch_size,
        seed=seed)
    ckpt.save(os.path.join(out, "seg.pt"))
    _write_csv(os.path.join(out, "loss.csv"), ["iteration", "loss"],
               [(i, loss) for i, loss in enumerate(ckpt.loss_history)])


def _impl_train_gan(config, out, stage_root):
    rows = _training_rows(config, stage_root)
    seed = derive_seed(config.seed, "train_gan")
    torch.manual_seed(seed)
    gen = Generator(config.generator_config())
    disc = Discriminator(config.discriminator_config())
    perceptual = PerceptualNet("random")
    ckpt = train_gan(
        gen, disc, perceptual, rows, config.optim_schedule(),
        weights=config.loss_weights(), data_root=".",
        iterations=config.gan_iterations, batch_size=config.gan_batch_size,
        seed=seed, config_hash=config_hash(config))
    ckpt.save(os.path.join(out, "gan.pt"))
    _write_csv(
        os.path.join(out, "loss.csv"),
        ["iteration", "lr", "d_loss", "g_loss", "rc_refined"],
        [(h["iteration"], h["lr"], h["d"], h["g"], h["rc_refined"])
         for h in ckpt.loss_history])


def _impl_remove(config, out, stage_root):
    seg = SegCheckpoint.load(
        os.path.join(stage_root, "train_seg", "seg.pt")).build()
    gen = GanCheckpoint.load(
        os.path.join(stage_root, "train_gan", "gan.pt")).build_generator()
    eval_dir = os.path.join(stage_root, "synth", "eval")
    rows = read_manifest(os.path.join(eval_dir, "manifest.jsonl"))
    filtered = [r for r in rows if r["role"] == "filtered"]
    os.makedirs(os.path.join(out, "images"))
    out_rows = []
    quality_rows = []
    for row in filtered:
        image = read_rgb(os.path.join(eval_dir, row["path"]))
        source = read_rgb(os.path.join(eval_dir, row["source_path"]))
        rec = remove_filter(seg, gen, image, config.seg_threshold)
        stem = os.path.splitext(os.path.basename(row["path"]))[0]
        rel = f"images/{stem}_rec.png"
        write_rgb(os.path.join(out, rel), rec)
        to_eval = os.path.join("..", "synth", "eval").replace(os.sep, "/")
        out_rows.append({
            "path": rel,
            "identity": row["identity"],
            "source_id": row["source_id"],
            "filter_name": row["filter_name"],
            "placement": row["placement"],
            "coverage_intensity": row["coverage_intensity"],
            "coverage_class": row["coverage_class"],
            "role": "reconstructed",
            "source_path": f"{to_eval}/{row['source_path']}",
            "filtered_path": f"{to_eval}/{row['path']}",
        })
        quality_rows.append((f"{to_eval}/{row['path']}",
                             f"{to_eval}/{row['source_path']}",
                             psnr(image, source), mssim(image, source)))
        quality_rows.append((rel, f"{to_eval}/{row['source_path']}",
                             psnr(rec, source), mssim(rec, source)))
    write_manifest(out_rows, os.path.join(out, "manifest.jsonl"))
    _write_csv(os.path.join(out, "quality.csv"),
               ["path_a", "path_b", "psnr", "mssim"], quality_rows)


def _probe_items(rows, base_dir, stage_root):
    items = []
    for row in rows:
        path = os.path.normpath(os.path.join(base_dir, row["path"]))
        label = os.path.relpath(path, stage_root).replace(os.sep, "/")
        items.append((row["identity"], read_rgb(path), label, row))
    return items


def _impl_evaluate(config, out, stage_root):
    eval_dir = os.path.join(stage_root, "synth", "eval")
    remove_dir = os.path.join(stage_root, "remove")
    synth_rows = read_manifest(os.path.join(eval_dir, "manifest.jsonl"))
    recon_rows = read_manifest(os.path.join(remove_dir, "manifest.jsonl"))

    def is_ref(row):
        return row["source_id"].endswith("_00")

    baselines = [r for r in synth_rows if r["role"] == "baseline"]
    refs = _probe_items([r for r in baselines if is_ref(r)], eval_dir, stage_root)
    probe_sets = {
        "baseline": _probe_items(
            [r for r in baselines if not is_ref(r)], eval_dir, stage_root),
        "filtered": _probe_items(
            [r for r in synth_rows if r["role"] == "filtered" and not is_ref(r)],
            eval_dir, stage_root),
        "reconstructed": _probe_items(
            [r for r in recon_rows if not is_ref(r)], remove_dir, stage_root),
    }

    engine = BaselineEngine()
    ref_items = [(i, img, lbl) for i, img, lbl, _ in refs]
    fnmr_targets = list(config.fmr_targets)

    metric_rows = []
    detection_rows = []
    trial_records = []

    for condition in CONDITIONS:
        probes = probe_sets[condition]
        det_results = [engine.detect(img) for _, img, _, _ in probes]
        stats = detection_stats(det_results)
        detection_rows.append((engine.engine_id, condition, stats.mean,
                               stats.std, stats.error_rate))

        groups = [("all", "all", probes)]
        if condition != "baseline":
            for gtype, key in (("coverage", "coverage_class"),
                               ("placement", "placement")):
                for value in sorted({p[3][key] for p in probes if p[3][key]}):
                    subset = [p for p in probes if p[3][key] == value]
                    groups.append((gtype, value, subset))

        for gtype, gname, subset in groups:
            if not subset:
                continue
            seed = derive_seed(config.seed, f"evaluate:{condition}:{gtype}:{gname}")
            trials, pairs = assemble_trials(
                [(i, img, lbl) for i, img, lbl, _ in subset], ref_items,
                engine, seed=seed,
                impostors_per_probe=config.impostors_per_probe,
                return_pairs=True)
            eer_val, eer_thr = eer(trials)
            detailed = fnmr_at_fmr_detailed(trials, fnmr_targets)
            row = [engine.engine_id, condition, gtype, gname,
                   len(trials.genuine_scores), len(trials.impostor_scores),
                   trials.total_enrol_attempts, trials.enrol_failures,
                   fte(trials), eer_val, eer_thr]
            for fnmr, attained, _thr in detailed:
                row.extend([fnmr, attained])
            metric_rows.append(row)

            curve = det_curve(trials)
            _write_csv(
                os.path.join(out, f"det_{condition}_{gtype}_{gname}.csv"),
                ["fmr", "fnmr"], curve)

            if gtype == "all":
                by_label = {p[2]: p[3] for p in subset}
                for pair in pairs:
                    src = by_label[pair["probe"]]
                    trial_records.append({
                        "probe_path": pair["probe"],
                        "reference_path": pair["reference"],
                        "same_identity": pair["same_identity"],
                        "condition": condition,
                        "coverage_class": src.get("coverage_class"),
                        "placement": src.get("placement"),
                        "score": pair["score"],
                    })

    header = ["engine", "condition", "group_type", "group", "n_genuine",
              "n_impostor", "enrol_attempts", "enrol_failures", "fte",
              "eer", "eer_threshold"]
    for t in fnmr_targets:
        header.extend([f"fnmr_at_fmr_{_fmt(t)}", f"attained_fmr_{_fmt(t)}"])
    _write_csv(os.path.join(out, "metrics.csv"), header, metric_rows)
    _write_csv(os.path.join(out, "detection.csv"),
               ["engine", "condition", "mean", "std", "error_rate"],
               detection_rows)
    with open(os.path.join(out, "trials.jsonl"), "w") as f:
        for rec in trial_records:
            f.write(json.dumps(rec) + "\n")


def _impl_report(config, out, stage_root):
    from .report import render_report

    render_report(os.path.join(stage_root, "evaluate"), out,
                  fmr_targets=list(config.fmr_targets))


_IMPLS = {
    "synth": _impl_synth,
    "augment": _impl_augment,
    "train_seg": _impl_train_seg,
    "train_gan": _impl_train_gan,
    "remove": _impl_remove,
    "evaluate": _impl_evaluate,
    "report": _impl_report,
}
