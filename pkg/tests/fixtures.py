"""Synthetic data generators shared by unit and acceptance tests."""

import os

import numpy as np

from voxelrun.nifti import Image


def spike_fixture(seed, n_vols=40, shape=(6, 6, 4), noise_sd=1.0, spike_factor=10.0,
                  max_spikes=3):
    """Noise image with a few volumes hit by large zero-mean spikes.

    Returns ``(img, X, spikes)`` where ``X`` is an intercept plus block
    regressor design and ``spikes`` the sorted injected volume indices.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_vols)
    task = ((t // 5) % 2).astype(float)
    X = np.column_stack([np.ones(n_vols), task])
    baseline = 100.0 + rng.normal(scale=0.5, size=shape)
    data = baseline[..., None] + 2.0 * task + rng.normal(scale=noise_sd, size=shape + (n_vols,))
    n_spikes = int(rng.integers(1, max_spikes + 1))
    spikes = sorted(int(i) for i in rng.choice(np.arange(1, n_vols - 1), n_spikes, replace=False))
    for i in spikes:
        data[..., i] += rng.normal(scale=spike_factor * noise_sd, size=shape)
    return Image(data, np.diag([3.0, 3.0, 3.0, 1.0]), 2.0), X, spikes


def write_activation_dataset(directory, seed=0, shape=(8, 8, 4), n_scans=60, tr=2.0,
                             effect=50.0, noise_sd=1.0):
    """Write a block-design run with a known active cube.

    Returns ``(image_path, events_path, active_mask)``.
    """
    from voxelrun.design import Event, hemodynamic_regressor
    from voxelrun.nifti import save_image

    rng = np.random.default_rng(seed)
    events = [Event(10.0 + 30.0 * b, 12.0, 1.0) for b in range(4)]
    reg = hemodynamic_regressor(events, n_scans, tr)
    reg = reg / reg.max()
    active = np.zeros(shape, bool)
    active[2:5, 2:5, 1:3] = True
    data = 100.0 + rng.normal(scale=noise_sd, size=shape + (n_scans,))
    data[active] += effect * noise_sd * reg
    img_path = os.path.join(directory, "run.nii")
    ev_path = os.path.join(directory, "task.txt")
    save_image(Image(data, np.diag([3.0, 3.0, 3.0, 1.0]), tr), img_path)
    with open(ev_path, "w") as fobj:
        fobj.writelines(f"{e.onset_s:g} {e.duration_s:g} {e.amplitude:g}\n" for e in events)
    return img_path, ev_path, active
