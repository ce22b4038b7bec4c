"""Voxelwise general linear model, contrasts, and correlation maps.

Data are laid out time-by-voxel: ``Y`` has one row per scan and one
column per voxel. Volumes are flattened in column-major (i fastest)
voxel order, matching the NIfTI on-disk order.
"""

from dataclasses import dataclass, field

import numpy as np

from .design import DesignMatrix
from .exceptions import (ConstantRegressor, DegenerateDesign, LengthMismatch,
                         ShapeMismatch, ZeroContrast, ZeroVariance)
from .special import t_to_p


@dataclass
class GlmFit:
    beta: np.ndarray
    mrss: np.ndarray
    df: int
    xtx_pinv: np.ndarray
    rank: int
    design_names: list = field(default_factory=list)

    @property
    def rank_deficient(self):
        return self.rank < self.beta.shape[0]


@dataclass
class StatMap:
    kind: str
    values: np.ndarray
    affine: np.ndarray = field(default_factory=lambda: np.eye(4))
    df: int = None

    def __post_init__(self):
        if self.kind not in ("t", "p", "r", "beta"):
            raise ValueError(f"unknown stat map kind {self.kind!r}")
        self.values = np.asarray(self.values, dtype=np.float64)


def _design_array(X):
    if isinstance(X, DesignMatrix):
        return X.X, list(X.column_names)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch("design must be a 2D array")
    return X, [f"x{j}" for j in range(X.shape[1])]


def pinv_decomposition(X, rcond=None):
    """SVD-based pseudo-inverse of ``X``, ``(X'X)^+`` and the numerical rank."""
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if rcond is None:
        rcond = max(X.shape) * np.finfo(np.float64).eps
    keep = s > rcond * (s[0] if s.size else 0.0)
    rank = int(keep.sum())
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    V = Vt.T
    x_pinv = (V * s_inv) @ U.T
    xtx_pinv = (V * s_inv ** 2) @ Vt
    return x_pinv, xtx_pinv, rank


def fit(Y, X):
    """Least-squares fit of every column of ``Y`` on the design ``X``.

    Uses the minimum-norm pseudo-inverse solution, so rank-deficient
    designs are fitted and reported through ``GlmFit.rank``.
    """
    X, names = _design_array(X)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, np.newaxis]
    if Y.ndim != 2 or Y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"data has {Y.shape[0] if Y.ndim else 0} rows, design has {X.shape[0]}")
    x_pinv, xtx_pinv, rank = pinv_decomposition(X)
    df = X.shape[0] - rank
    if df < 1:
        raise DegenerateDesign(f"no residual degrees of freedom (n={X.shape[0]}, rank={rank})")
    beta = x_pinv @ Y
    resid = Y - X @ beta
    rss = (resid ** 2).sum(axis=0)
    # exact fits leave rounding-level residuals; call those zero
    floor = (X.shape[0] * np.finfo(np.float64).eps * np.linalg.norm(Y, axis=0)) ** 2
    rss[rss <= floor] = 0.0
    mrss = rss / df
    return GlmFit(beta, mrss, df, xtx_pinv, rank, names)


def residuals(fit_result, Y, X):
    X, _ = _design_array(X)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, np.newaxis]
    return Y - X @ fit_result.beta


def check_contrast(c, p):
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if c.ndim != 1 or c.shape[0] != p:
        raise LengthMismatch(f"contrast has {c.size} weights, design has {p} columns")
    if not np.any(c):
        raise ZeroContrast("contrast vector is all zeros")
    return c


def contrast_t(fit_result, c):
    """t statistic for ``c' beta`` at every voxel; returns ``(t, df)``.

    Voxels with zero residual variance get t = 0 when the effect is
    zero too, and a signed infinity otherwise.
    """
    c = check_contrast(c, fit_result.beta.shape[0])
    var_c = float(c @ fit_result.xtx_pinv @ c)
    scale = np.linalg.norm(fit_result.xtx_pinv, 2) * (c @ c)
    if var_c <= np.finfo(np.float64).eps * max(scale, np.finfo(np.float64).tiny) * 16:
        raise ZeroVariance("contrast is not estimable: c'(X'X)^-c is zero")
    effect = c @ fit_result.beta
    se = np.sqrt(fit_result.mrss * var_c)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = effect / se
    zero_se = se == 0
    tol = 16 * np.finfo(np.float64).eps * np.linalg.norm(c) * np.linalg.norm(
        fit_result.beta[:, zero_se], axis=0)
    eff = effect[zero_se]
    t[zero_se] = np.where(np.abs(eff) <= tol, 0.0, np.copysign(np.inf, eff))
    return t, fit_result.df


def correlation(x, Y):
    """Pearson correlation of vector ``x`` with every column of ``Y``.

    Constant columns of ``Y`` get r = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, np.newaxis]
    if Y.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"regressor length {x.shape[0]} != {Y.shape[0]} time points")
    xc = x - x.mean()
    x_ss = float(xc @ xc)
    if x_ss == 0 or np.ptp(x) == 0:
        raise ConstantRegressor("regressor is constant")
    Yc = Y - Y.mean(axis=0)
    y_ss = (Yc ** 2).sum(axis=0)
    num = xc @ Yc
    r = np.zeros(Y.shape[1])
    ok = y_ss > 0
    r[ok] = num[ok] / np.sqrt(x_ss * y_ss[ok])
    return np.clip(r, -1.0, 1.0)


def image_to_matrix(data, mask=None):
    """Flatten a 4D array to ``(T, n_voxels)`` in column-major voxel order."""
    data = np.asarray(data)
    n_t = data.shape[3]
    flat = data.reshape(-1, n_t, order="F")
    if mask is not None:
        flat = flat[np.asarray(mask, dtype=bool).reshape(-1, order="F")]
    return flat.T


def matrix_to_volume(values, shape3, mask=None, fill=0.0):
    """Inverse of :func:`image_to_matrix` for one value per voxel."""
    values = np.asarray(values, dtype=np.float64)
    flat = np.full(int(np.prod(shape3)), fill, dtype=np.float64)
    if mask is None:
        flat[:] = values
    else:
        flat[np.asarray(mask, dtype=bool).reshape(-1, order="F")] = values
    return flat.reshape(shape3, order="F")


def correlation_map(img, regressor, mask=None):
    """Per-voxel Pearson r between ``regressor`` and the image time courses."""
    data = img.data
    regressor = np.asarray(regressor, dtype=np.float64)
    if regressor.shape != (data.shape[3],):
        raise ShapeMismatch(f"regressor length {regressor.size} != {data.shape[3]} volumes")
    r = correlation(regressor, image_to_matrix(data, mask))
    return StatMap("r", matrix_to_volume(r, data.shape[:3], mask), img.affine.copy())


def bonferroni_threshold(alpha, n_tests):
    """Per-test significance level ``alpha / n_tests``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n_tests < 1:
        raise ValueError("need at least one test")
    return alpha / n_tests


def threshold_pmap(p, alpha, n_tests=None, mask=None):
    """Boolean map of voxels with p below the Bonferroni level."""
    p = np.asarray(p, dtype=np.float64)
    if n_tests is None:
        n_tests = int(np.count_nonzero(mask)) if mask is not None else p.size
    sig = p < bonferroni_threshold(alpha, n_tests)
    if mask is not None:
        sig &= np.asarray(mask, dtype=bool)
    return sig


def contrast_maps(fit_result, c, shape3, affine, mask=None, two_sided=True):
    """t and p :class:`StatMap` volumes for contrast ``c``.

    Out-of-mask voxels are t = 0, p = 1.
    """
    t, df = contrast_t(fit_result, c)
    p = t_to_p(t, df, two_sided=two_sided)
    return (StatMap("t", matrix_to_volume(t, shape3, mask), affine, df),
            StatMap("p", matrix_to_volume(p, shape3, mask, fill=1.0), affine, df))
