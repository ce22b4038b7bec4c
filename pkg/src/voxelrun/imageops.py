"""Spatial operations on images: Gaussian smoothing, affine mapping, masking."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import NonPositive, NonPositiveVoxelSize, SingularAffine
from .nifti import Image

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def fwhm_to_sigma(fwhm_mm):
    if not fwhm_mm > 0:
        raise NonPositive(f"FWHM must be positive, got {fwhm_mm}")
    return fwhm_mm / FWHM_PER_SIGMA


def sigma_to_fwhm(sigma_mm):
    if not sigma_mm > 0:
        raise NonPositive(f"sigma must be positive, got {sigma_mm}")
    return sigma_mm * FWHM_PER_SIGMA


@dataclass(frozen=True)
class SmoothSpec:
    fwhm_mm: float
    truncate_sigmas: float = 4.0

    def __post_init__(self):
        fwhm_to_sigma(self.fwhm_mm)
        if not self.truncate_sigmas > 0:
            raise NonPositive("truncate_sigmas must be positive")

    @property
    def sigma_mm(self):
        return fwhm_to_sigma(self.fwhm_mm)


def gaussian_kernel1d(sigma_vox, truncate=4.0):
    """Unit-sum Gaussian weights at integer offsets ``-r..r``, ``r = floor(truncate * sigma)``."""
    radius = int(math.floor(truncate * sigma_vox))
    if radius == 0:
        return np.ones(1)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma_vox) ** 2)
    return w / w.sum()


def _convolve_axis(arr, weights, axis, mode):
    radius = len(weights) // 2
    if radius == 0:
        return arr
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="edge" if mode == "nearest" else "constant")
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    for offset, w in enumerate(weights):
        out += w * np.take(padded, np.arange(offset, offset + n), axis=axis)
    return out


def smooth_array(vol, sigmas_vox, truncate=4.0, mode="nearest", axis_order=(0, 1, 2)):
    """Separable Gaussian filter of a 3D array with per-axis sigma in voxels."""
    out = np.asarray(vol, dtype=np.float64)
    for axis in axis_order:
        out = _convolve_axis(out, gaussian_kernel1d(sigmas_vox[axis], truncate), axis, mode)
    return out


def gaussian_smooth(img, spec, mode="nearest", axis_order=(0, 1, 2)):
    """Smooth each volume of ``img`` with an isotropic-in-mm Gaussian.

    ``mode="nearest"`` replicates edge voxels, so constant images are
    unchanged; ``mode="constant"`` pads with zeros.
    """
    if not isinstance(spec, SmoothSpec):
        spec = SmoothSpec(float(spec))
    sizes = img.voxel_sizes
    if np.any(sizes <= 0):
        raise NonPositiveVoxelSize(f"voxel sizes {sizes} must be positive")
    sigmas = spec.sigma_mm / sizes
    out = np.empty_like(img.data)
    for t in range(img.n_volumes):
        out[..., t] = smooth_array(img.data[..., t], sigmas, spec.truncate_sigmas,
                                   mode, axis_order)
    return Image(out, img.affine.copy(), img.tr_s)


def _check_affine(affine):
    affine = np.asarray(affine, dtype=np.float64)
    if affine.shape != (4, 4):
        raise ValueError("affine must be 4x4")
    if np.linalg.cond(affine[:3, :3]) > 1 / np.finfo(np.float64).eps:
        raise SingularAffine("affine is not invertible")
    return affine


def apply_affine(affine, coords):
    coords = np.asarray(coords, dtype=np.float64)
    return coords @ affine[:3, :3].T + affine[:3, 3]


def voxel_to_mm(affine, ijk):
    """Millimeter coordinates for voxel index (or ``(N, 3)`` array of indices)."""
    return apply_affine(_check_affine(affine), ijk)


def mm_to_voxel(affine, xyz):
    """Fractional voxel coordinates for mm point(s)."""
    affine = _check_affine(affine)
    return apply_affine(np.linalg.inv(affine), xyz)


def mean_volume(img):
    return Image(img.data.mean(axis=3), img.affine.copy(), img.tr_s)


def brain_mask(mean, fraction=0.2):
    """Voxels brighter than ``fraction`` of the brightest mean voxel."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    vol = mean.data[..., 0] if isinstance(mean, Image) else np.asarray(mean, dtype=np.float64)
    return vol > fraction * vol.max()
