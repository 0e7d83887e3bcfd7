"""Render evaluation output into comparison tables and DET figures.

Tables are percent-scaled mirrors of the evaluation CSVs with a delta
column (reconstructed minus filtered, in percentage points).  DET curves
are drawn on normal-deviate axes, one figure per group, with every
available condition overlaid.
"""

from __future__ import annotations

import csv
import glob
import math
import os
import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from scipy.stats import norm

from .errors import NoData

_TICKS = (0.0001, 0.001, 0.01, 0.05, 0.2, 0.5, 0.9)
_CLAMP = (1e-5, 1.0 - 1e-5)


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return "%.10g" % x
    return str(x)


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _pct(value: str) -> float:
    return float(value) * 100.0


def _deviate(rate: float) -> float:
    return float(norm.ppf(min(max(rate, _CLAMP[0]), _CLAMP[1])))


def render_report(evaluate_dir: str, out_dir: str, fmr_targets=None):
    """Build the report bundle from an evaluation artifact directory."""
    metrics_path = os.path.join(evaluate_dir, "metrics.csv")
    if not os.path.exists(metrics_path):
        raise NoData(f"no metrics at {metrics_path}")
    rows = _read_csv(metrics_path)
    os.makedirs(out_dir, exist_ok=True)
    conditions = sorted({r["condition"] for r in rows})
    notes = []
    if len(conditions) < 2:
        warnings.warn("only one condition evaluated; delta columns omitted")
        notes.append(f"single condition ({conditions[0]}); no deltas computed")

    fnmr_cols = [c for c in rows[0] if c.startswith("fnmr_at_fmr_")]

    # percent-scaled table
    table_header = ["engine", "condition", "group_type", "group",
                    "fte_pct", "eer_pct"] + [f"{c}_pct" for c in fnmr_cols]
    table_rows = []
    for r in rows:
        table_rows.append(
            [r["engine"], r["condition"], r["group_type"], r["group"],
             _pct(r["fte"]), _pct(r["eer"])] + [_pct(r[c]) for c in fnmr_cols])
    _write_csv(os.path.join(out_dir, "tables.csv"), table_header, table_rows)

    # filtered vs reconstructed deltas per group
    index = {(r["condition"], r["group_type"], r["group"]): r for r in rows}
    groups = sorted({(r["group_type"], r["group"]) for r in rows
                     if r["condition"] != "baseline"})
    delta_header = ["group_type", "group", "eer_filtered_pct",
                    "eer_reconstructed_pct", "delta_eer_points",
                    "fte_filtered_pct", "fte_reconstructed_pct",
                    "delta_fte_points"]
    delta_rows = []
    for gtype, gname in groups:
        filt = index.get(("filtered", gtype, gname))
        recon = index.get(("reconstructed", gtype, gname))
        if filt is None or recon is None:
            notes.append(f"group {gtype}/{gname}: only one condition present, "
                         "row omitted from deltas")
            continue
        delta_rows.append([
            gtype, gname,
            _pct(filt["eer"]), _pct(recon["eer"]),
            _pct(recon["eer"]) - _pct(filt["eer"]),
            _pct(filt["fte"]), _pct(recon["fte"]),
            _pct(recon["fte"]) - _pct(filt["fte"]),
        ])
    _write_csv(os.path.join(out_dir, "delta.csv"), delta_header, delta_rows)

    _plot_det_figures(evaluate_dir, out_dir, notes)

    with open(os.path.join(out_dir, "notes.txt"), "w") as f:
        for line in notes:
            f.write(line + "\n")
        if not notes:
            f.write("no omissions\n")


def _det_files(evaluate_dir):
    out = {}
    for path in sorted(glob.glob(os.path.join(evaluate_dir, "det_*.csv"))):
        stem = os.path.splitext(os.path.basename(path))[0]
        # det_<condition>_<group_type>_<group>
        _, condition, gtype, gname = stem.split("_", 3)
        out.setdefault((gtype, gname), {})[condition] = path
    return out


def _plot_det_figures(evaluate_dir, out_dir, notes):
    for (gtype, gname), by_condition in sorted(_det_files(evaluate_dir).items()):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        drawn = 0
        for condition in sorted(by_condition):
            pts = _read_csv(by_condition[condition])
            if not pts:
                continue
            fmr = [_deviate(float(p["fmr"])) for p in pts]
            fnmr = [_deviate(float(p["fnmr"])) for p in pts]
            order = sorted(range(len(fmr)), key=lambda i: fmr[i])
            ax.plot([fmr[i] for i in order], [fnmr[i] for i in order],
                    marker="o", markersize=2.5, linewidth=1.2,
                    drawstyle="steps-post", label=condition)
            drawn += 1
        if drawn == 0:
            plt.close(fig)
            notes.append(f"group {gtype}/{gname}: no DET points, figure skipped")
            continue
        tick_pos = [_deviate(t) for t in _TICKS]
        tick_lab = [f"{t * 100:g}" for t in _TICKS]
        ax.set_xticks(tick_pos, tick_lab)
        ax.set_yticks(tick_pos, tick_lab)
        ax.set_xlabel("FMR (%)")
        ax.set_ylabel("FNMR (%)")
        ax.set_title(f"DET: {gtype} = {gname}")
        ax.grid(True, linewidth=0.4, alpha=0.5)
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, f"det_{gtype}_{gname}.png"), dpi=110)
        plt.close(fig)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
