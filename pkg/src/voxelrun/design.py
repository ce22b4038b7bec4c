"""Hemodynamic regressors and design matrices.

The pipeline is the classic one taught for block and event designs:

1. a box-car neural model on a fine time grid (:func:`neural_signal`),
2. convolution with a canonical double-gamma HRF (:func:`hrf_samples`,
   :func:`convolve`),
3. linear interpolation at the scan onset times (:func:`sample_at`),

followed by stacking regressors with an intercept and optional drift
terms (:func:`assemble_design`).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import (AllZeroColumn, DtMismatch, LengthMismatch,
                         MalformedLine, NegativeOnset, UnsupportedOrder)

# Tolerance, in grid steps, for deciding which sample an event edge falls on.
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class Event:
    onset_s: float
    duration_s: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.onset_s < 0:
            raise NegativeOnset(f"event onset {self.onset_s} is negative")
        if self.duration_s < 0:
            raise ValueError(f"event duration {self.duration_s} is negative")


@dataclass
class SampledSignal:
    """Values on a regular grid ``start_s + m * dt_s``."""

    values: np.ndarray
    dt_s: float
    start_s: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not self.dt_s > 0:
            raise ValueError("dt_s must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("signal values must be finite")

    @property
    def times(self):
        return self.start_s + np.arange(len(self.values)) * self.dt_s

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class HrfParams:
    """Double-gamma HRF shape. Defaults are the usual canonical values."""

    peak_shape: float = 6.0
    undershoot_shape: float = 16.0
    peak_scale: float = 1.0
    undershoot_scale: float = 1.0
    undershoot_ratio: float = 1.0 / 6.0
    duration_s: float = 30.0

    def __post_init__(self):
        if not (self.peak_shape > 1 and self.undershoot_shape > 1):
            raise ValueError("HRF gamma shapes must exceed 1")
        if not (self.peak_scale > 0 and self.undershoot_scale > 0):
            raise ValueError("HRF gamma scales must be positive")
        if not 0 <= self.undershoot_ratio < 1:
            raise ValueError("undershoot ratio must lie in [0, 1)")
        if not self.duration_s > 0:
            raise ValueError("HRF duration must be positive")


@dataclass
class DesignMatrix:
    X: np.ndarray
    column_names: list = field(default_factory=list)
    tr_s: float = 1.0

    @property
    def n_scans(self):
        return self.X.shape[0]

    @property
    def n_columns(self):
        return self.X.shape[1]


def load_events(path):
    """Read a three-column ``onset duration amplitude`` condition file."""
    events = []
    with open(path) as fobj:
        for lineno, line in enumerate(fobj, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise MalformedLine(lineno, stripped)
            try:
                onset, duration, amplitude = (float(p) for p in parts)
            except ValueError:
                raise MalformedLine(lineno, stripped) from None
            events.append(Event(onset, duration, amplitude))
    return events


def neural_signal(events, dt_s, total_s):
    """Box-car neural model sampled every ``dt_s`` seconds.

    Sample ``m`` sums the amplitudes of all events with
    ``onset <= m * dt < onset + duration``. A zero-duration event
    contributes its amplitude to the single sample containing its onset.
    """
    if not dt_s > 0 or not total_s > 0:
        raise ValueError("dt_s and total_s must be positive")
    n = int(math.ceil(total_s / dt_s - _EDGE_EPS))
    values = np.zeros(n)
    for ev in events:
        if ev.duration_s == 0:
            idx = int(math.floor(ev.onset_s / dt_s + _EDGE_EPS))
            if idx < n:
                values[idx] += ev.amplitude
            continue
        first = int(math.ceil(ev.onset_s / dt_s - _EDGE_EPS))
        stop = int(math.ceil((ev.onset_s + ev.duration_s) / dt_s - _EDGE_EPS))
        values[first:min(stop, n)] += ev.amplitude
    return SampledSignal(values, dt_s, 0.0)


def gamma_pdf(t, shape, scale):
    """Gamma density ``t**(a-1) exp(-t/b) / (b**a Gamma(a))``, zero for t <= 0."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0
    log_norm = shape * math.log(scale) + math.lgamma(shape)
    out[pos] = np.exp((shape - 1) * np.log(t[pos]) - t[pos] / scale - log_norm)
    return out


def hrf_samples(params=None, dt_s=0.1):
    """Peak-normalized double-gamma HRF on ``[0, duration)``."""
    params = params or HrfParams()
    if not dt_s > 0:
        raise ValueError("dt_s must be positive")
    n = int(math.ceil(params.duration_s / dt_s - _EDGE_EPS))
    t = np.arange(n) * dt_s
    h = (gamma_pdf(t, params.peak_shape, params.peak_scale)
         - params.undershoot_ratio
         * gamma_pdf(t, params.undershoot_shape, params.undershoot_scale))
    return SampledSignal(h / h.max(), dt_s, 0.0)


def convolve(signal, kernel):
    """Discrete convolution scaled by ``dt``, truncated to the signal length.

    The kernel tail beyond the end of ``signal`` is discarded.
    """
    if not math.isclose(signal.dt_s, kernel.dt_s, rel_tol=1e-12, abs_tol=0.0):
        raise DtMismatch(f"signal dt {signal.dt_s} != kernel dt {kernel.dt_s}")
    n = len(signal)
    if n == 0 or len(kernel) == 0:
        return SampledSignal(np.zeros(n), signal.dt_s, signal.start_s)
    out = np.convolve(signal.values, kernel.values)[:n] * signal.dt_s
    return SampledSignal(out, signal.dt_s, signal.start_s)


def sample_at(signal, times_s):
    """Linearly interpolate ``signal`` at ``times_s``; zero outside its span."""
    times_s = np.asarray(times_s, dtype=np.float64)
    if not np.all(np.isfinite(times_s)):
        raise ValueError("sample times must be finite")
    if len(signal) == 0:
        return np.zeros_like(times_s)
    return np.interp(times_s, signal.times, signal.values, left=0.0, right=0.0)


def parametric_regressor(events, modulators):
    """Events re-weighted by mean-centered modulator values."""
    modulators = np.asarray(modulators, dtype=np.float64)
    if len(modulators) != len(events):
        raise LengthMismatch(f"{len(modulators)} modulators for {len(events)} events")
    if len(events) == 0:
        return []
    centered = modulators - modulators.mean()
    return [replace(ev, amplitude=float(a)) for ev, a in zip(events, centered)]


def scan_times(n_scans, tr_s):
    return np.arange(n_scans) * tr_s


def hemodynamic_regressor(events, n_scans, tr_s, hrf=None, dt_frac=100):
    """Predicted BOLD response for ``events`` at each scan onset ``n * TR``.

    The neural model and HRF are built on a grid of ``TR / dt_frac``
    seconds and convolved there. Each convolved sample stands for the
    interval it opens, so it is placed at the interval midpoint before
    interpolation; this removes the half-step lag of the rectangle rule
    and makes the sampled regressor converge at second order in ``dt``.
    """
    if dt_frac < 1:
        raise ValueError("dt_frac must be at least 1")
    dt = tr_s / dt_frac
    neural = neural_signal(events, dt, n_scans * tr_s)
    response = convolve(neural, hrf_samples(hrf, dt))
    centered = SampledSignal(response.values, dt, response.start_s + dt / 2)
    return sample_at(centered, scan_times(n_scans, tr_s))


def drift_columns(n_scans, order):
    """Mean-centered polynomial drift terms ``t, t**2, ...`` with t in [-1, 1]."""
    if order not in (1, 2):
        raise UnsupportedOrder(f"drift order must be 1 or 2, got {order}")
    if n_scans < 3:
        raise ValueError("drift columns need at least 3 scans")
    t = np.linspace(-1.0, 1.0, n_scans)
    cols = np.column_stack([t ** j for j in range(1, order + 1)])
    return cols - cols.mean(axis=0)


def assemble_design(task_columns=None, confound_columns=None, n_scans=None,
                    tr_s=1.0, task_names=None, confound_names=None):
    """Stack ``[intercept | task | confounds]`` into a :class:`DesignMatrix`.

    Columns may be given as 2D arrays (one column each) or sequences of
    1D vectors. An all-zero column is rejected here; collinear columns
    are not, and surface later as rank deficiency in the fit.
    """
    blocks, names = [], []
    for cols, given, prefix in ((task_columns, task_names, "task"),
                                (confound_columns, confound_names, "confound")):
        cols = _as_columns(cols, n_scans)
        if cols.shape[1]:
            if n_scans is None:
                n_scans = cols.shape[0]
            if cols.shape[0] != n_scans:
                raise LengthMismatch(f"{prefix} columns have {cols.shape[0]} rows, expected {n_scans}")
        given = list(given) if given is not None else [
            f"{prefix}{i + 1}" for i in range(cols.shape[1])]
        if len(given) != cols.shape[1]:
            raise LengthMismatch(f"{len(given)} names for {cols.shape[1]} {prefix} columns")
        blocks.append(cols)
        names.extend(given)
    if n_scans is None:
        raise ValueError("n_scans is required when no columns are given")
    X = np.column_stack([np.ones(n_scans)] + [b for b in blocks if b.shape[1]])
    for j, name in enumerate(names, 1):
        if not np.any(X[:, j]):
            raise AllZeroColumn(f"column {name!r} is all zeros")
    return DesignMatrix(X, ["intercept"] + names, float(tr_s))


def _as_columns(cols, n_scans):
    if cols is None:
        return np.zeros((n_scans or 0, 0))
    arr = np.asarray(cols, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, np.newaxis]
    elif arr.ndim == 2 and not isinstance(cols, np.ndarray):
        # list of column vectors
        arr = arr.T
    if arr.size == 0:
        return np.zeros((n_scans or 0, 0))
    return arr


def build_design(event_lists, n_scans, tr_s, hrf=None, drift_order=0,
                 dt_frac=100, names=None):
    """Design with one convolved regressor per event list plus drift terms."""
    task = [hemodynamic_regressor(evs, n_scans, tr_s, hrf, dt_frac)
            for evs in event_lists]
    names = list(names) if names is not None else [
        f"task{i + 1}" for i in range(len(task))]
    confounds = drift_columns(n_scans, drift_order) if drift_order else None
    confound_names = [f"drift{j}" for j in range(1, drift_order + 1)]
    return assemble_design(task, confounds, n_scans, tr_s, task_names=names,
                           confound_names=confound_names)


def format_design(design):
    """Text form: ``# name ...`` header then rows of 17-significant-digit reals."""
    lines = ["# " + " ".join(design.column_names)]
    for row in design.X:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def parse_design(text, tr_s=1.0):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("design file must start with a '# name ...' header")
    names = lines[0][1:].split()
    X = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    return DesignMatrix(X.reshape(len(lines) - 1, len(names)), names, tr_s)
