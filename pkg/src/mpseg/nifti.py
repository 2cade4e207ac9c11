"""Minimal NIfTI-1 single-file (.nii / .nii.gz) reader and writer.

Supports the axis-aligned case this toolkit produces: 3D volumes with a
diagonal affine (per-axis spacing + physical origin, no rotations). Data
are stored x-fastest (Fortran order) as the format requires.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFile

_HEADER_SIZE = 348
_VOX_OFFSET = 352.0
_MAGIC = b"n+1\x00"

# NIfTI-1 datatype codes
_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


def _open_maybe_gz(path: Path, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def write_nifti(
    path: str | Path,
    voxels: np.ndarray,
    spacing: tuple[float, float, float],
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
    dtype: np.dtype | type = np.float32,
) -> None:
    """Write a 3D array indexed [x, y, z] to a NIfTI-1 file."""
    voxels = np.asarray(voxels)
    if voxels.ndim != 3:
        raise ValueError(f"expected a 3D volume, got shape {voxels.shape}")
    dtype = np.dtype(dtype)
    if dtype not in _CODES:
        raise ValueError(f"unsupported storage dtype {dtype}")
    data = np.ascontiguousarray(voxels.astype(dtype, copy=False))

    hdr = bytearray(_HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, _HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *data.shape, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, _CODES[dtype])
    struct.pack_into("<h", hdr, 72, dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", hdr, 108, _VOX_OFFSET)
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    struct.pack_into("<B", hdr, 123, 2)  # xyzt_units: mm
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform_code=0, sform_code=1
    srow = np.zeros((3, 4))
    srow[0, 0], srow[1, 1], srow[2, 2] = spacing
    srow[:, 3] = origin
    struct.pack_into("<12f", hdr, 280, *srow.ravel())
    hdr[344:348] = _MAGIC

    with _open_maybe_gz(Path(path), "wb") as f:
        f.write(bytes(hdr))
        f.write(b"\x00\x00\x00\x00")  # no header extensions
        f.write(data.tobytes(order="F"))


def read_nifti(path: str | Path):
    """Read a NIfTI-1 file.

    Returns (voxels, spacing, origin) with voxels indexed [x, y, z].
    Raises CorruptFile on anything that does not parse.
    """
    path = Path(path)
    try:
        with _open_maybe_gz(path, "rb") as f:
            raw = f.read()
    except (OSError, gzip.BadGzipFile) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc

    if len(raw) < _HEADER_SIZE:
        raise CorruptFile(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[344:348] != _MAGIC:
        raise CorruptFile(f"{path}: bad magic {raw[344:348]!r}")

    dim = struct.unpack_from("<8h", raw, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 3:
        raise CorruptFile(f"{path}: only 3D volumes supported, dim[0]={ndim}")
    shape = tuple(max(1, d) for d in dim[1:4])

    (datatype,) = struct.unpack_from("<h", raw, 70)
    if datatype not in _DTYPES:
        raise CorruptFile(f"{path}: unsupported datatype code {datatype}")
    dtype = np.dtype(_DTYPES[datatype])

    pixdim = struct.unpack_from("<8f", raw, 76)
    spacing = tuple(float(p) if p > 0 else 1.0 for p in pixdim[1:4])
    (vox_offset,) = struct.unpack_from("<f", raw, 108)
    slope, inter = struct.unpack_from("<2f", raw, 112)
    qform_code, sform_code = struct.unpack_from("<2h", raw, 252)
    if sform_code > 0:
        srow = np.array(struct.unpack_from("<12f", raw, 280)).reshape(3, 4)
        origin = tuple(float(v) for v in srow[:, 3])
    elif qform_code > 0:
        origin = tuple(float(v) for v in struct.unpack_from("<3f", raw, 268))
    else:
        origin = (0.0, 0.0, 0.0)

    offset = int(vox_offset)
    count = int(np.prod(shape))
    expected = offset + count * dtype.itemsize
    if len(raw) < expected:
        raise CorruptFile(f"{path}: truncated data ({len(raw)} < {expected})")
    voxels = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    voxels = voxels.reshape(shape, order="F").copy()
    if slope not in (0.0, 1.0) or inter != 0.0:
        voxels = voxels * slope + inter
    return voxels, spacing, origin
