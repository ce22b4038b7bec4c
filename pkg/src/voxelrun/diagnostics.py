"""Outlier-volume diagnostics for a 4D FMRI run.

Per-volume spread (:func:`vol_std`) and scan-to-scan change
(:func:`rms_diff`) are screened with IQR fences (:func:`iqr_outliers`);
:func:`mrss_compare` then checks how much residual variance the
flagged volumes contribute to a GLM fit.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import glm
from .design import DesignMatrix
from .exceptions import (DegenerateAfterDrop, DegenerateDesign, IndexOutOfRange,
                         ShapeMismatch, TooFewValues, TooFewVolumes)
from .figures import write_svg_lines
from ._fileio import atomic_write


@dataclass
class OutlierReport:
    metric: str
    values: np.ndarray
    lo_thresh: float
    hi_thresh: float
    outlier_indices: list = field(default_factory=list)


def _volumes(img):
    data = img.data if hasattr(img, "data") else np.asarray(img, dtype=np.float64)
    return data.reshape(-1, data.shape[-1], order="F")


def vol_std(img):
    """Population standard deviation of each volume."""
    vols = _volumes(img)
    if vols.shape[1] < 1:
        raise TooFewVolumes("image has no volumes")
    return vols.std(axis=0)


def rms_diff(img):
    """Root mean square voxel difference between consecutive volumes."""
    vols = _volumes(img)
    if vols.shape[1] < 2:
        raise TooFewVolumes("RMS difference needs at least 2 volumes")
    return np.sqrt((np.diff(vols, axis=1) ** 2).mean(axis=0))


def percentile(values, q):
    """Percentile by linear interpolation at position ``(q / 100) * (n - 1)``."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    pos = q / 100.0 * (len(x) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(x) - 1)
    return x[lo] + (pos - lo) * (x[hi] - x[lo])


def iqr_fences(values, scale=1.5):
    q1 = percentile(values, 25)
    q3 = percentile(values, 75)
    iqr = q3 - q1
    return q1 - scale * iqr, q3 + scale * iqr


def iqr_outliers(values, scale=1.5, metric="values"):
    """Indices of values strictly outside ``[Q1 - scale*IQR, Q3 + scale*IQR]``."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) < 4:
        raise TooFewValues("IQR outlier detection needs at least 4 values")
    lo, hi = iqr_fences(values, scale)
    idx = np.flatnonzero((values < lo) | (values > hi))
    return OutlierReport(metric, values, float(lo), float(hi), [int(i) for i in idx])


def rms_outlier_volumes(rms_indices):
    """Volumes touched by outlying RMS differences.

    Difference ``i`` compares volumes ``i`` and ``i + 1``, so both are
    flagged.
    """
    vols = set()
    for i in rms_indices:
        vols.update((i, i + 1))
    return sorted(vols)


def mrss_compare(img, X, outliers, mask=None):
    """Mean in-mask MRSS with all volumes vs with outlier volumes removed.

    Outlier rows are removed from both the data and the design.
    Returns ``(mrss_all, mrss_dropped)``.
    """
    design = X.X if isinstance(X, DesignMatrix) else np.asarray(X, dtype=np.float64)
    Y = glm.image_to_matrix(img.data, mask)
    n = Y.shape[0]
    if design.shape[0] != n:
        raise ShapeMismatch(f"design has {design.shape[0]} rows, image has {n} volumes")
    outliers = sorted(set(int(i) for i in outliers))
    if any(not 0 <= i < n for i in outliers):
        raise IndexOutOfRange(f"outlier indices must lie in 0..{n - 1}")
    keep = np.setdiff1d(np.arange(n), outliers)
    full = glm.fit(Y, design)
    try:
        dropped = glm.fit(Y[keep], design[keep])
    except DegenerateDesign as err:
        raise DegenerateAfterDrop(str(err)) from None
    return float(full.mrss.mean()), float(dropped.mrss.mean())


def format_values(values):
    return "".join(f"{float(v):.17g}\n" for v in values)


def format_indices(indices):
    return "".join(f"{int(i)}\n" for i in indices)


def write_diagnostic_outputs(std_report, out_dir, rms_report=None):
    """Write the text files and SVG plots for a diagnostic run.

    Returns the list of paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        atomic_write(path, text.encode("utf-8"))
        written.append(path)

    put("vol_std_values.txt", format_values(std_report.values))
    put("vol_std_outliers.txt", format_indices(std_report.outlier_indices))
    path = os.path.join(out_dir, "vol_std.svg")
    write_svg_lines([std_report.values], _markers(std_report),
                    [std_report.lo_thresh, std_report.hi_thresh], path,
                    title="Volume standard deviation")
    written.append(path)
    if rms_report is not None:
        put("vol_rms_values.txt", format_values(rms_report.values))
        put("vol_rms_outliers.txt", format_indices(rms_report.outlier_indices))
        path = os.path.join(out_dir, "vol_rms_outliers.svg")
        write_svg_lines([rms_report.values], _markers(rms_report),
                        [rms_report.lo_thresh, rms_report.hi_thresh], path,
                        title="RMS difference between volumes")
        written.append(path)
    return written


def _markers(report):
    return [(i, float(report.values[i])) for i in report.outlier_indices]
