"""scikit-learn compatible wrappers around the functional core.

These let the analysis steps sit inside ``sklearn.pipeline.Pipeline``,
be cloned, and be grid-searched over their parameters::

    design = HemodynamicDesign(tr=2.0, n_scans=169, drift_order=2)
    X = design.fit_transform([events])
    model = VoxelwiseGLM().fit(X, Y)
    t, p = model.contrast([0, 1, 0, 0])
"""

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import design as _design
from . import diagnostics, glm, imageops
from ._validation import check_design, check_image, check_responses
from .special import t_to_p


class HemodynamicDesign(TransformerMixin, BaseEstimator):
    """Turn condition event lists into a design matrix.

    ``transform`` takes a list of event lists (one per task regressor)
    and returns the ``n_scans x p`` matrix ``[intercept | task | drift]``.

    Parameters
    ----------
    tr : float
        Repetition time in seconds.
    n_scans : int
        Number of volumes.
    drift_order : {0, 1, 2}
        Polynomial drift terms to append.
    dt_frac : int
        High-resolution grid is ``tr / dt_frac``.
    hrf : HrfParams or None
        Canonical double gamma when None.
    names : list of str or None
        Task column names.
    """

    def __init__(self, tr=2.0, n_scans=100, drift_order=0, dt_frac=100, hrf=None,
                 names=None):
        self.tr = tr
        self.n_scans = n_scans
        self.drift_order = drift_order
        self.dt_frac = dt_frac
        self.hrf = hrf
        self.names = names

    def fit(self, event_lists=None, y=None):
        if self.drift_order not in (0, 1, 2):
            raise ValueError("drift_order must be 0, 1 or 2")
        if not self.tr > 0:
            raise ValueError("tr must be positive")
        self.n_features_in_ = len(event_lists) if event_lists is not None else 0
        return self

    def transform(self, event_lists):
        check_is_fitted(self, "n_features_in_")
        dm = self.design_matrix(event_lists)
        return dm.X

    def design_matrix(self, event_lists):
        dm = _design.build_design(event_lists, self.n_scans, self.tr, self.hrf,
                                  self.drift_order, self.dt_frac, self.names)
        self.column_names_ = dm.column_names
        return dm


class VoxelwiseGLM(RegressorMixin, BaseEstimator):
    """Ordinary least squares fitted independently at every voxel.

    ``fit(X, Y)`` takes the design ``X`` (n_scans x p) and data ``Y``
    (n_scans x n_voxels). Fitted attributes follow sklearn naming:
    ``coef_`` (p x n_voxels), ``mrss_``, ``df_resid_``, ``rank_``.
    """

    def __init__(self, two_sided=True):
        self.two_sided = two_sided

    def fit(self, X, y):
        X = check_design(X)
        Y = check_responses(y, X.shape[0])
        result = glm.fit(Y, X)
        self.fit_ = result
        self.coef_ = result.beta
        self.mrss_ = result.mrss
        self.df_resid_ = result.df
        self.rank_ = result.rank
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_design(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, model was fit with {self.n_features_in_}")
        return X @ self.coef_

    def score(self, X, y, sample_weight=None):
        """Mean R^2 across voxels."""
        Y = check_responses(y, np.asarray(X).shape[0])
        resid = Y - self.predict(X)
        ss_tot = ((Y - Y.mean(axis=0)) ** 2).sum(axis=0)
        ss_res = (resid ** 2).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, 0.0)
        return float(r2.mean())

    def contrast(self, c):
        """Per-voxel ``(t, p)`` for contrast vector ``c``."""
        check_is_fitted(self, "coef_")
        t, df = glm.contrast_t(self.fit_, c)
        return t, t_to_p(t, df, two_sided=self.two_sided)


class GaussianSmoother(TransformerMixin, BaseEstimator):
    """Gaussian spatial smoothing of :class:`~voxelrun.nifti.Image` objects."""

    def __init__(self, fwhm_mm=5.0, truncate_sigmas=4.0, mode="nearest"):
        self.fwhm_mm = fwhm_mm
        self.truncate_sigmas = truncate_sigmas
        self.mode = mode

    def fit(self, img=None, y=None):
        self.spec_ = imageops.SmoothSpec(self.fwhm_mm, self.truncate_sigmas)
        return self

    def transform(self, img):
        check_is_fitted(self, "spec_")
        return imageops.gaussian_smooth(check_image(img), self.spec_, mode=self.mode)


class IQROutlierDetector(OutlierMixin, BaseEstimator):
    """Flag values outside the IQR fences learned in ``fit``.

    ``predict`` follows the sklearn convention: -1 for outliers, 1 for
    inliers. ``outlier_indices_`` holds the flagged training indices.
    """

    def __init__(self, scale=1.5):
        self.scale = scale

    def fit(self, X, y=None):
        values = np.ravel(np.asarray(X, dtype=np.float64))
        report = diagnostics.iqr_outliers(values, self.scale)
        self.lo_thresh_ = report.lo_thresh
        self.hi_thresh_ = report.hi_thresh
        self.outlier_indices_ = np.asarray(report.outlier_indices, dtype=int)
        self.report_ = report
        return self

    def predict(self, X):
        check_is_fitted(self, "lo_thresh_")
        values = np.ravel(np.asarray(X, dtype=np.float64))
        out = (values < self.lo_thresh_) | (values > self.hi_thresh_)
        return np.where(out, -1, 1)


class VolumeMetric(TransformerMixin, BaseEstimator):
    """Per-volume summary of a 4D image: ``"vol_std"`` or ``"rms_diff"``."""

    def __init__(self, metric="vol_std"):
        self.metric = metric

    def fit(self, img=None, y=None):
        if self.metric not in ("vol_std", "rms_diff"):
            raise ValueError(f"unknown metric {self.metric!r}")
        self.fitted_ = True
        return self

    def transform(self, img):
        check_is_fitted(self, "fitted_")
        img = check_image(img)
        func = diagnostics.vol_std if self.metric == "vol_std" else diagnostics.rms_diff
        return func(img)
