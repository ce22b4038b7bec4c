"""Regenerate the synthetic demo run shipped in this directory.

Writes ``ds_demo_bold.nii`` (int16 with scaling, 10 x 10 x 6 x 173,
TR 2 s) and ``cond001.txt`` (block design). The committed files are the
reference copies listed in ``../hashes.json``; rerunning this script is
only needed to change the dataset.
"""

import os

import numpy as np

from voxelrun.design import Event, hemodynamic_regressor
from voxelrun.nifti import NiftiHeader, header_bytes

HERE = os.path.dirname(os.path.abspath(__file__))
SHAPE = (10, 10, 6)
N_VOLS = 173
TR = 2.0
SEED = 2015


def block_events():
    # 12 s task blocks every 40 s, onsets deliberately off the scan grid
    return [Event(round(9.3 + 40.0 * b, 1), 12.0, 1.0) for b in range(8)]


def main():
    rng = np.random.default_rng(SEED)
    i, j, k = np.meshgrid(*(np.arange(n) for n in SHAPE), indexing="ij")
    centre = (np.array(SHAPE) - 1) / 2.0
    r2 = ((i - centre[0]) / 4.5) ** 2 + ((j - centre[1]) / 4.5) ** 2 + ((k - centre[2]) / 3.0) ** 2
    baseline = np.where(r2 <= 1.0, 1000.0, 30.0)
    events = block_events()
    reg = hemodynamic_regressor(events, N_VOLS, TR)
    reg = reg / reg.max()
    active = (i >= 2) & (i <= 4) & (j >= 5) & (j <= 7) & (k >= 2) & (k <= 3)
    t = np.arange(N_VOLS)
    drift = 0.02 * (t - t.mean())
    data = baseline[..., None] + rng.normal(0.0, 8.0, SHAPE + (N_VOLS,))
    data += np.where(r2 <= 1.0, 1.0, 0.0)[..., None] * drift
    data[active] += 40.0 * reg
    data[..., :4] += 150.0 * (r2 <= 1.0)[..., None]  # T1 equilibration volumes
    for vol in (60, 121):
        data[..., vol] += rng.normal(0.0, 120.0, SHAPE)  # spike volumes
    slope = 0.1
    raw = np.clip(np.rint(data / slope), -32768, 32767).astype("<i2")
    affine = np.array([[-3.0, 0, 0, 13.5], [0, 3.0, 0, -13.5], [0, 0, 3.0, -7.5], [0, 0, 0, 1]])
    hdr = NiftiHeader(dim=(4,) + SHAPE + (N_VOLS, 1, 1, 1), datatype=4, bitpix=16,
                      pixdim=(1.0, 3.0, 3.0, 3.0, TR, 1.0, 1.0, 1.0), vox_offset=352.0,
                      scl_slope=slope, scl_inter=0.0, xyzt_units=10,
                      descrip=b"voxelrun synthetic demo run", sform_code=1,
                      srow_x=tuple(affine[0]), srow_y=tuple(affine[1]),
                      srow_z=tuple(affine[2]))
    with open(os.path.join(HERE, "ds_demo_bold.nii"), "wb") as fobj:
        fobj.write(header_bytes(hdr) + b"\x00" * 4 + raw.tobytes(order="F"))
    with open(os.path.join(HERE, "cond001.txt"), "w") as fobj:
        fobj.write("# onset duration amplitude\n")
        for ev in events:
            fobj.write(f"{ev.onset_s:g} {ev.duration_s:g} {ev.amplitude:g}\n")


if __name__ == "__main__":
    main()
