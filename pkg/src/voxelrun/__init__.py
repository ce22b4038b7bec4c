"""voxelrun: single-run FMRI analysis with a reproducible pipeline runner."""

from .design import (DesignMatrix, Event, HrfParams, SampledSignal, assemble_design,
                     build_design, convolve, drift_columns, hemodynamic_regressor,
                     hrf_samples, load_events, neural_signal, parametric_regressor,
                     sample_at)
from .diagnostics import (OutlierReport, iqr_outliers, mrss_compare, rms_diff,
                          vol_std, write_diagnostic_outputs)
from .glm import (GlmFit, StatMap, bonferroni_threshold, contrast_t,
                  correlation_map, fit)
from .imageops import (SmoothSpec, brain_mask, fwhm_to_sigma, gaussian_smooth,
                       mean_volume, mm_to_voxel, voxel_to_mm)
from .nifti import (Image, NiftiHeader, drop_initial, load_image, parse_header,
                    save_image, slice_volume, voxel_timecourse)
from .special import t_to_p

__version__ = "0.1.0"
