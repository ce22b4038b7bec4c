"""End-to-end analysis commands and the Markdown report.

The commands here compose the numeric modules into the artifact sets
the pipeline targets produce: diagnostics for ``eda``, statistical maps
for ``analysis`` and ``report.md`` for ``report``. All outputs are
deterministic functions of their inputs.
"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import design as dsg
from . import diagnostics, glm, imageops
from ._fileio import atomic_write
from .exceptions import LengthMismatch
from .figures import slice_mosaic, write_pgm
from .nifti import Image, drop_initial, load_image, save_image
from .pipeline import sha256_file

log = logging.getLogger(__name__)

DIAGNOSTICS_JSON = "diagnostics.json"
SUMMARY_JSON = "summary.json"


@dataclass
class RunConfig:
    image_path: str
    events_paths: list = field(default_factory=list)
    tr_s: float = None
    hrf: dsg.HrfParams = field(default_factory=dsg.HrfParams)
    drift_order: int = 0
    smooth_fwhm_mm: float = None
    contrasts: list = field(default_factory=list)  # (name, vector) pairs
    alpha: float = 0.05
    mask_fraction: float = 0.2
    out_dir: str = "."
    drop: int = 0
    dt_frac: int = 100
    two_sided: bool = True
    correlation_maps: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.drift_order not in (0, 1, 2):
            raise ValueError("drift order must be 0, 1 or 2")
        if not 0 < self.mask_fraction < 1:
            raise ValueError("mask fraction must lie in (0, 1)")


def parse_contrast(text, index=1):
    """``"0 1 -1"`` or ``"name=0 1 -1"`` -> ``(name, vector)``."""
    name, sep, weights = text.partition("=")
    if not sep:
        name, weights = f"con{index:02d}", text
    try:
        vec = [float(w) for w in weights.replace(",", " ").split()]
    except ValueError:
        raise ValueError(f"contrast {text!r} is not a list of numbers") from None
    if not vec:
        raise LengthMismatch(f"contrast {text!r} is empty")
    return name.strip(), vec


def _stem(path):
    base = os.path.basename(path)
    for ext in (".nii", ".txt", ".tsv"):
        if base.endswith(ext):
            return base[:-len(ext)]
    return base


def _dump_json(path, obj):
    atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def run_design(event_paths, n_scans, tr_s, drift_order=0, dt_frac=100, drop=0,
               hrf=None):
    """Design for the scans that remain after dropping ``drop`` leading volumes.

    Regressors are built on the original acquisition clock, so event
    onsets keep their meaning after the drop.
    """
    events = [dsg.load_events(p) for p in event_paths]
    names = [_stem(p) for p in event_paths]
    total = n_scans + drop
    task = [dsg.hemodynamic_regressor(evs, total, tr_s, hrf, dt_frac)[drop:]
            for evs in events]
    confounds = dsg.drift_columns(n_scans, drift_order) if drift_order else None
    return dsg.assemble_design(task, confounds, n_scans, tr_s, task_names=names,
                               confound_names=[f"drift{j}" for j in range(1, drift_order + 1)])


def glm_command(config):
    """Fit the GLM for ``config`` and write maps, design and summaries.

    Returns a dict mapping artifact roles to written paths.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    img = load_image(config.image_path)
    tr = config.tr_s or img.tr_s
    if config.drop:
        img = drop_initial(img, config.drop)
    n_scans = img.n_volumes
    design = run_design(config.events_paths, n_scans, tr, config.drift_order,
                        config.dt_frac, config.drop, config.hrf)
    contrasts = [(name, glm.check_contrast(vec, design.n_columns))
                 for name, vec in config.contrasts]
    if config.smooth_fwhm_mm:
        img = imageops.gaussian_smooth(img, imageops.SmoothSpec(config.smooth_fwhm_mm))
    mask = imageops.brain_mask(imageops.mean_volume(img), config.mask_fraction)
    Y = glm.image_to_matrix(img.data, mask)
    result = glm.fit(Y, design)
    n_tests = int(mask.sum())
    level = glm.bonferroni_threshold(config.alpha, n_tests)
    shape3 = img.shape[:3]
    out = config.out_dir
    artifacts = {"design": os.path.join(out, "design.txt")}
    atomic_write(artifacts["design"], dsg.format_design(design).encode("utf-8"))
    summary = {
        "image": os.path.basename(config.image_path),
        "image_sha256": sha256_file(config.image_path),
        "n_scans": n_scans,
        "dropped": config.drop,
        "tr_s": tr,
        "design_columns": design.column_names,
        "rank": result.rank,
        "df": result.df,
        "mask_voxels": n_tests,
        "mean_mrss": float(result.mrss.mean()),
        "alpha": config.alpha,
        "bonferroni_alpha": level,
        "two_sided": config.two_sided,
        "smooth_fwhm_mm": config.smooth_fwhm_mm,
        "contrasts": [],
    }
    for name, c in contrasts:
        t_map, p_map = glm.contrast_maps(result, c, shape3, img.affine, mask,
                                         config.two_sided)
        sig = glm.threshold_pmap(p_map.values, config.alpha, n_tests, mask)
        paths = {
            "t": os.path.join(out, f"{name}_t.nii"),
            "p": os.path.join(out, f"{name}_p.nii"),
            "figure": os.path.join(out, f"{name}_t.pgm"),
        }
        save_image(Image(t_map.values, img.affine, tr), paths["t"])
        save_image(Image(p_map.values, img.affine, tr), paths["p"])
        finite_t = np.where(np.isfinite(t_map.values), t_map.values, 0.0)
        write_pgm(slice_mosaic(finite_t, _mosaic_cols(shape3[2])), paths["figure"])
        in_mask_t = t_map.values[mask]
        summary["contrasts"].append({
            "name": name,
            "weights": [float(w) for w in c],
            "max_t": float(np.max(in_mask_t)) if in_mask_t.size else 0.0,
            "min_p": float(np.min(p_map.values[mask])) if in_mask_t.size else 1.0,
            "significant_voxels": int(sig.sum()),
            "t_map": os.path.basename(paths["t"]),
            "p_map": os.path.basename(paths["p"]),
            "figure": os.path.basename(paths["figure"]),
        })
        artifacts.update({f"{name}_{k}": v for k, v in paths.items()})
    if config.correlation_maps:
        for j, name in enumerate(design.column_names):
            if not name.startswith(("intercept", "drift")):
                rmap = glm.correlation_map(img, design.X[:, j], mask)
                path = os.path.join(out, f"{name}_r.nii")
                save_image(Image(rmap.values, img.affine, tr), path)
                artifacts[f"{name}_r"] = path
    artifacts["summary"] = os.path.join(out, SUMMARY_JSON)
    _dump_json(artifacts["summary"], summary)
    artifacts["results"] = os.path.join(out, "results.txt")
    atomic_write(artifacts["results"], format_results(summary).encode("utf-8"))
    return artifacts


def _mosaic_cols(n_slices):
    return max(1, int(np.ceil(np.sqrt(n_slices))))


def format_results(summary):
    lines = [
        f"image: {summary['image']}",
        f"image_sha256: {summary['image_sha256']}",
        f"scans: {summary['n_scans']} (dropped {summary['dropped']})",
        f"tr_s: {summary['tr_s']:g}",
        f"design: {' '.join(summary['design_columns'])}",
        f"rank: {summary['rank']}",
        f"df: {summary['df']}",
        f"mask_voxels: {summary['mask_voxels']}",
        f"mean_mrss: {summary['mean_mrss']:.6g}",
        f"alpha: {summary['alpha']:g} (Bonferroni per-voxel {summary['bonferroni_alpha']:.6g})",
    ]
    for con in summary["contrasts"]:
        weights = " ".join(f"{w:g}" for w in con["weights"])
        lines.append(f"contrast {con['name']} [{weights}]: max_t={con['max_t']:.6g} "
                     f"min_p={con['min_p']:.6g} significant={con['significant_voxels']}")
    return "\n".join(lines) + "\n"


def diagnose_command(image_path, out_dir, drop=4, scale=1.5, events_paths=(),
                     tr_s=None, drift_order=0, mask_fraction=0.2, dt_frac=100):
    """Outlier diagnostics on a run, optionally with the MRSS comparison.

    Outlier indices are relative to the series after dropping ``drop``
    leading volumes. When events are given, volumes flagged by either
    metric are removed and the GLM residual variance is compared.
    """
    os.makedirs(out_dir, exist_ok=True)
    img = load_image(image_path)
    tr = tr_s or img.tr_s
    if drop:
        img = drop_initial(img, drop)
    std_report = diagnostics.iqr_outliers(diagnostics.vol_std(img), scale, "vol_std")
    rms_report = diagnostics.iqr_outliers(diagnostics.rms_diff(img), scale, "rms_diff")
    written = diagnostics.write_diagnostic_outputs(std_report, out_dir, rms_report)
    summary = {
        "image": os.path.basename(image_path),
        "image_sha256": sha256_file(image_path),
        "n_volumes": img.n_volumes,
        "dropped": drop,
        "scale": scale,
        "vol_std": _report_dict(std_report),
        "rms_diff": _report_dict(rms_report),
        "figures": [os.path.basename(p) for p in written if p.endswith(".svg")],
    }
    if events_paths:
        outliers = sorted(set(std_report.outlier_indices)
                          | set(diagnostics.rms_outlier_volumes(rms_report.outlier_indices)))
        design = run_design(events_paths, img.n_volumes, tr, drift_order, dt_frac, drop)
        mask = imageops.brain_mask(imageops.mean_volume(img), mask_fraction)
        mrss_all, mrss_dropped = diagnostics.mrss_compare(img, design, outliers, mask)
        summary["mrss"] = {"removed_volumes": outliers, "all": mrss_all,
                           "dropped": mrss_dropped}
        path = os.path.join(out_dir, "mrss_compare.txt")
        atomic_write(path, (f"removed_volumes: {' '.join(map(str, outliers))}\n"
                            f"mrss_all: {mrss_all:.17g}\n"
                            f"mrss_dropped: {mrss_dropped:.17g}\n").encode("utf-8"))
        written.append(path)
    path = os.path.join(out_dir, DIAGNOSTICS_JSON)
    _dump_json(path, summary)
    written.append(path)
    return written


def _report_dict(report):
    return {"lo_thresh": report.lo_thresh, "hi_thresh": report.hi_thresh,
            "outliers": list(report.outlier_indices), "n_values": len(report.values)}


def _load_json(path):
    if not os.path.exists(path):
        return None
    with open(path) as fobj:
        return json.load(fobj)


def write_report(out_dir, eda_dir=None, analysis_dir=None):
    """Assemble ``report.md`` from the diagnostic and analysis summaries.

    Figures are linked relative to ``out_dir``; each appears once.
    """
    eda_dir = eda_dir or os.path.join(out_dir, "eda")
    analysis_dir = analysis_dir or os.path.join(out_dir, "analysis")
    diag = _load_json(os.path.join(eda_dir, DIAGNOSTICS_JSON))
    summary = _load_json(os.path.join(analysis_dir, SUMMARY_JSON))
    if diag is None and summary is None:
        raise FileNotFoundError(f"no {DIAGNOSTICS_JSON} in {eda_dir} and no "
                                f"{SUMMARY_JSON} in {analysis_dir}")

    def rel(directory, name):
        return os.path.relpath(os.path.join(directory, name), out_dir).replace(os.sep, "/")

    source = diag or summary
    lines = ["# FMRI run analysis", "",
             "## Dataset", "",
             f"- Image: `{source['image']}`",
             f"- sha256: `{source['image_sha256']}`", ""]
    if diag is not None:
        lines += ["## Diagnostics", "",
                  f"Volumes analysed: {diag['n_volumes']} "
                  f"(first {diag['dropped']} dropped); IQR scale {diag['scale']:g}.", "",
                  "| metric | lower fence | upper fence | outlier indices |",
                  "|---|---|---|---|"]
        for key in ("vol_std", "rms_diff"):
            d = diag[key]
            idx = ", ".join(map(str, d["outliers"])) or "none"
            lines.append(f"| {key} | {d['lo_thresh']:.6g} | {d['hi_thresh']:.6g} | {idx} |")
        lines.append("")
        if "mrss" in diag:
            m = diag["mrss"]
            lines += [f"Removing {len(m['removed_volumes'])} outlier volume(s) changes the "
                      f"mean residual variance from {m['all']:.6g} to {m['dropped']:.6g}.", ""]
        for fig in diag["figures"]:
            lines.append(f"![{fig}]({rel(eda_dir, fig)})")
        lines.append("")
    if summary is not None and summary["contrasts"]:
        lines += ["## Design", "",
                  f"{summary['n_scans']} scans, TR {summary['tr_s']:g} s; columns: "
                  + ", ".join(f"`{c}`" for c in summary["design_columns"])
                  + f" (rank {summary['rank']}, df {summary['df']}).", "",
                  "## Contrasts", "",
                  f"Bonferroni threshold: alpha {summary['alpha']:g} over "
                  f"{summary['mask_voxels']} in-mask voxels "
                  f"(per-voxel {summary['bonferroni_alpha']:.6g}).", "",
                  "| contrast | weights | max t | min p | significant voxels |",
                  "|---|---|---|---|---|"]
        for con in summary["contrasts"]:
            weights = " ".join(f"{w:g}" for w in con["weights"])
            lines.append(f"| {con['name']} | {weights} | {con['max_t']:.4g} | "
                         f"{con['min_p']:.4g} | {con['significant_voxels']} |")
        lines.append("")
        for con in summary["contrasts"]:
            lines.append(f"![{con['figure']}]({rel(analysis_dir, con['figure'])})")
        lines.append("")
    path = os.path.join(out_dir, "report.md")
    atomic_write(path, "\n".join(lines).encode("utf-8"))
    return path

