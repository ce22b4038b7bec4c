"""Reading and writing single-file NIfTI-1 (``.nii``) images.

Only the subset of the format needed for curated FMRI runs is handled:
uncompressed single files, datatypes uint8/int16/int32/float32/float64,
and the ``sform`` affine. Voxel data are always promoted to float64.
"""

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._fileio import atomic_write
from .exceptions import (BadMagic, BadSizeofHdr, DropTooMany, HeaderTooShort,
                         IndexOutOfRange, TruncatedData, UnsupportedDatatype)

HEADER_SIZE = 348
#: Offset written by :func:`save_image`: header plus the 4-byte extension flag.
WRITE_VOX_OFFSET = 352

# datatype code -> (numpy kind, bitpix)
DATATYPES = {
    2: ("u1", 8),
    4: ("i2", 16),
    8: ("i4", 32),
    16: ("f4", 32),
    64: ("f8", 64),
}

# (name, offset, struct format) for every field we decode.
_FIELDS = (
    ("sizeof_hdr", 0, "i"),
    ("dim", 40, "8h"),
    ("datatype", 70, "h"),
    ("bitpix", 72, "h"),
    ("pixdim", 76, "8f"),
    ("vox_offset", 108, "f"),
    ("scl_slope", 112, "f"),
    ("scl_inter", 116, "f"),
    ("xyzt_units", 123, "B"),
    ("descrip", 148, "80s"),
    ("qform_code", 252, "h"),
    ("sform_code", 254, "h"),
    ("srow_x", 280, "4f"),
    ("srow_y", 296, "4f"),
    ("srow_z", 312, "4f"),
    ("magic", 344, "4s"),
)


@dataclass
class NiftiHeader:
    """Decoded NIfTI-1 header fields."""

    sizeof_hdr: int = HEADER_SIZE
    dim: tuple = (0, 1, 1, 1, 1, 1, 1, 1)
    datatype: int = 16
    bitpix: int = 32
    pixdim: tuple = (1.0,) * 8
    vox_offset: float = float(WRITE_VOX_OFFSET)
    scl_slope: float = 1.0
    scl_inter: float = 0.0
    xyzt_units: int = 0
    descrip: bytes = b""
    qform_code: int = 0
    sform_code: int = 0
    srow_x: tuple = (1.0, 0.0, 0.0, 0.0)
    srow_y: tuple = (0.0, 1.0, 0.0, 0.0)
    srow_z: tuple = (0.0, 0.0, 1.0, 0.0)
    magic: bytes = b"n+1\x00"
    byte_order: str = "little"

    @property
    def ndim(self):
        return self.dim[0]

    @property
    def shape(self):
        return tuple(self.dim[1:self.dim[0] + 1])

    @property
    def endian(self):
        return "<" if self.byte_order == "little" else ">"


@dataclass
class Image:
    """A 3D or 4D image: voxel data, a voxel-to-mm affine, and the TR.

    ``data`` is always 4D, indexed ``(i, j, k, t)``; 3D images have a
    time extent of one.
    """

    data: np.ndarray
    affine: np.ndarray = field(default_factory=lambda: np.eye(4))
    tr_s: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 3:
            data = data[..., np.newaxis]
        if data.ndim != 4:
            raise ValueError(f"image data must be 3D or 4D, got {data.ndim}D")
        affine = np.asarray(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise ValueError("affine must be 4x4")
        if not np.array_equal(affine[3], [0, 0, 0, 1]):
            raise ValueError("affine bottom row must be (0, 0, 0, 1)")
        if abs(np.linalg.det(affine[:3, :3])) == 0:
            raise ValueError("affine 3x3 block is singular")
        self.data = data
        self.affine = affine
        self.tr_s = float(self.tr_s)

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_volumes(self):
        return self.data.shape[3]

    @property
    def voxel_sizes(self):
        return np.sqrt((self.affine[:3, :3] ** 2).sum(axis=0))


def _unpack(buf, endian):
    values = {}
    for name, offset, fmt in _FIELDS:
        out = struct.unpack_from(endian + fmt, buf, offset)
        values[name] = out if len(out) > 1 else out[0]
    return values


def parse_header(buf):
    """Decode a 348-byte NIfTI-1 header.

    Byte order is detected by checking which interpretation of
    ``sizeof_hdr`` gives 348.
    """
    buf = bytes(buf)
    if len(buf) < HEADER_SIZE:
        raise HeaderTooShort(f"need {HEADER_SIZE} header bytes, got {len(buf)}")
    for endian, order in (("<", "little"), (">", "big")):
        if struct.unpack_from(endian + "i", buf, 0)[0] == HEADER_SIZE:
            break
    else:
        raise BadSizeofHdr("sizeof_hdr is not 348 in either byte order")
    fields = _unpack(buf, endian)
    if fields["magic"][:3] != b"n+1":
        raise BadMagic(f"magic {fields['magic']!r} is not single-file NIfTI-1 ('n+1')")
    if fields["datatype"] not in DATATYPES:
        raise UnsupportedDatatype(f"datatype code {fields['datatype']} not supported")
    fields["descrip"] = fields["descrip"].rstrip(b"\x00")
    return NiftiHeader(byte_order=order, **fields)


def header_bytes(hdr):
    """Encode a header back to 348 bytes in ``hdr.byte_order``."""
    buf = bytearray(HEADER_SIZE)
    for name, offset, fmt in _FIELDS:
        value = getattr(hdr, name)
        args = value if isinstance(value, (tuple, list)) else (value,)
        struct.pack_into(hdr.endian + fmt, buf, offset, *args)
    # regular = 'r' for legacy readers
    buf[38] = ord("r")
    return bytes(buf)


def _affine_from_header(hdr):
    if hdr.sform_code > 0:
        affine = np.eye(4)
        affine[0] = hdr.srow_x
        affine[1] = hdr.srow_y
        affine[2] = hdr.srow_z
        return affine
    warnings.warn("sform_code is 0; using diagonal pixdim affine (qform is ignored)",
                  stacklevel=3)
    return np.diag([hdr.pixdim[1], hdr.pixdim[2], hdr.pixdim[3], 1.0])


def load_image(path):
    """Load a single-file NIfTI-1 image as float64 data plus affine and TR."""
    with open(path, "rb") as fobj:
        raw = fobj.read()
    hdr = parse_header(raw[:HEADER_SIZE])
    shape = hdr.shape
    kind, bitpix = DATATYPES[hdr.datatype]
    count = int(np.prod(shape))
    offset = int(hdr.vox_offset)
    needed = offset + count * bitpix // 8
    if len(raw) < needed:
        raise TruncatedData(f"{path}: expected at least {needed} bytes, file has {len(raw)}")
    dtype = np.dtype(hdr.endian + kind)
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    data = data.astype(np.float64).reshape(shape, order="F")
    if hdr.scl_slope != 0:
        data = data * hdr.scl_slope + hdr.scl_inter
    while data.ndim < 4:
        data = data[..., np.newaxis]
    if data.ndim > 4:
        data = data.reshape(data.shape[:3] + (-1,), order="F")
    tr = hdr.pixdim[4] if hdr.ndim >= 4 else 1.0
    return Image(data, _affine_from_header(hdr), tr)


def image_header(img):
    """Header that :func:`save_image` writes for ``img``."""
    n_t = img.shape[3]
    shape = img.shape if n_t > 1 else img.shape[:3]
    dim = (len(shape),) + tuple(shape) + (1,) * (7 - len(shape))
    sizes = img.voxel_sizes
    pixdim = (1.0, *sizes, img.tr_s, 1.0, 1.0, 1.0)
    return NiftiHeader(
        dim=dim, datatype=16, bitpix=32, pixdim=pixdim,
        vox_offset=float(WRITE_VOX_OFFSET), scl_slope=1.0, scl_inter=0.0,
        xyzt_units=2 | 8,  # mm, seconds
        sform_code=1,
        srow_x=tuple(img.affine[0]), srow_y=tuple(img.affine[1]),
        srow_z=tuple(img.affine[2]),
    )


def save_image(img, path):
    """Write ``img`` as little-endian float32 single-file NIfTI-1.

    The file is written to a temporary name and renamed into place, so
    a failed write never leaves a partial ``path``.
    """
    payload = header_bytes(image_header(img)) + b"\x00" * 4
    payload += np.asarray(img.data, dtype="<f4").tobytes(order="F")
    atomic_write(path, payload)


def slice_volume(img, t):
    """Return volume ``t`` as a 3D image sharing the affine."""
    if not 0 <= t < img.n_volumes:
        raise IndexOutOfRange(f"volume {t} outside 0..{img.n_volumes - 1}")
    return Image(img.data[..., t:t + 1].copy(), img.affine.copy(), img.tr_s)


def drop_initial(img, n):
    """Drop the first ``n`` volumes (dummy scans)."""
    if n < 0:
        raise IndexOutOfRange("cannot drop a negative number of volumes")
    if n >= img.n_volumes:
        raise DropTooMany(f"cannot drop {n} of {img.n_volumes} volumes")
    return Image(img.data[..., n:].copy(), img.affine.copy(), img.tr_s)


def voxel_timecourse(img, i, j, k):
    for idx, extent in zip((i, j, k), img.shape[:3]):
        if not 0 <= idx < extent:
            raise IndexOutOfRange(f"voxel ({i}, {j}, {k}) outside {img.shape[:3]}")
    return img.data[i, j, k, :].copy()
