"""Volume containers, grid resampling, normalization, splits, and case I/O.

All volumes use a cell-centered grid convention: voxel i along an axis is
centered at origin + (i + 0.5) * spacing, so a volume spans a physical
extent of shape * spacing per axis. Resampling preserves that extent with
the origin fixed (the usual align-corners-false convention).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    MissingChannel,
    NonPositiveSpacing,
    SizeMismatch,
    UnknownMode,
)
from .nifti import read_nifti, write_nifti

CHANNEL_KINDS = ("T2W", "B1000", "ADC", "MASK")

# Paper-recipe target grid (mm).
DEFAULT_SPACING = (0.6, 0.6, 4.0)


@dataclass(frozen=True)
class ImageVolume:
    """A scalar 3D volume with physical spacing and origin (mm)."""

    voxels: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    channel_kind: str = "T2W"

    def __post_init__(self):
        if self.voxels.ndim != 3:
            raise ValueError(f"expected 3D voxels, got shape {self.voxels.shape}")
        if any(s <= 0 for s in self.spacing):
            raise NonPositiveSpacing(f"spacing must be > 0, got {self.spacing}")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        if not np.isfinite(self.voxels).all():
            raise ValueError("voxels must be finite")
        if self.channel_kind == "MASK":
            vals = np.unique(self.voxels)
            if not np.isin(vals, (0, 1)).all():
                raise ValueError(f"MASK volumes must be binary, got values {vals[:8]}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.voxels.shape

    def extent(self) -> tuple[float, float, float]:
        """Physical size (mm) per axis."""
        return tuple(n * s for n, s in zip(self.voxels.shape, self.spacing))


@dataclass(frozen=True)
class MultiparametricCase:
    """Co-gridded T2W / b1000 / ADC channels plus the tumor mask."""

    case_id: str
    t2w: ImageVolume
    b1000: ImageVolume
    adc: ImageVolume
    mask: ImageVolume

    def __post_init__(self):
        ref = self.t2w
        for name in ("b1000", "adc", "mask"):
            vol = getattr(self, name)
            if vol.shape != ref.shape or vol.spacing != ref.spacing or vol.origin != ref.origin:
                raise ValueError(f"channel {name} is not on the shared grid")
        if self.mask.channel_kind != "MASK":
            raise ValueError("mask volume must have channel_kind MASK")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.t2w.shape

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.t2w.spacing

    def channel(self, name: str) -> ImageVolume:
        return {"T2W": self.t2w, "B1000": self.b1000, "ADC": self.adc}[name]

    def stacked(self, names) -> np.ndarray:
        """Selected channels as a (C, x, y, z) float32 array."""
        return np.stack([self.channel(n).voxels.astype(np.float32) for n in names])


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int

    def to_dict(self) -> dict:
        return {
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
            "test_ids": list(self.test_ids),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSplit":
        return cls(tuple(d["train_ids"]), tuple(d["val_ids"]), tuple(d["test_ids"]), d["seed"])


def _axis_coords(n_out: int, out_spacing: float, out_origin: float,
                 in_spacing: float, in_origin: float) -> np.ndarray:
    """Fractional source indices of output voxel centers along one axis."""
    centers = out_origin + (np.arange(n_out, dtype=np.float64) + 0.5) * out_spacing
    return (centers - in_origin) / in_spacing - 0.5


def _take_nearest(arr: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
    idx = np.floor(coords + 0.5).astype(np.intp)
    np.clip(idx, 0, arr.shape[axis] - 1, out=idx)
    return np.take(arr, idx, axis=axis)


def _take_linear(arr: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
    lo = np.floor(coords).astype(np.intp)
    w = coords - lo
    lo_c = np.clip(lo, 0, arr.shape[axis] - 1)
    hi_c = np.clip(lo + 1, 0, arr.shape[axis] - 1)
    shape = [1, 1, 1]
    shape[axis] = len(coords)
    w = w.reshape(shape)
    a = np.take(arr, lo_c, axis=axis)
    b = np.take(arr, hi_c, axis=axis)
    return a * (1.0 - w) + b * w


def resample_to_grid(
    volume: ImageVolume,
    shape: tuple[int, int, int],
    spacing: tuple[float, float, float],
    origin: tuple[float, float, float],
    mode: str,
) -> ImageVolume:
    """Resample onto an explicit reference grid (separable, axis-aligned).

    mode "linear" interpolates; "nearest" picks the closest source voxel
    and therefore never invents values absent from the input. Positions
    outside the source extent clamp to the nearest edge voxel.
    """
    if mode not in ("linear", "nearest"):
        raise UnknownMode(f"mode must be 'linear' or 'nearest', got {mode!r}")
    if any(s <= 0 for s in spacing):
        raise NonPositiveSpacing(f"target spacing must be > 0, got {spacing}")
    take = _take_linear if mode == "linear" else _take_nearest
    out = volume.voxels.astype(np.float64, copy=False)
    for axis in range(3):
        coords = _axis_coords(shape[axis], spacing[axis], origin[axis],
                              volume.spacing[axis], volume.origin[axis])
        out = take(out, coords, axis=axis)
    if volume.channel_kind == "MASK":
        out = out.astype(volume.voxels.dtype)
    return replace(volume, voxels=out, spacing=tuple(spacing), origin=tuple(origin))


def resample(volume: ImageVolume, target_spacing, mode: str) -> ImageVolume:
    """Resample to a new spacing, keeping the physical extent and origin.

    Output shape per axis is round(extent / target_spacing), at least 1,
    so the covered extent matches the input to within one voxel per axis.
    """
    target_spacing = tuple(float(s) for s in target_spacing)
    if any(s <= 0 for s in target_spacing):
        raise NonPositiveSpacing(f"target spacing must be > 0, got {target_spacing}")
    shape = tuple(
        max(1, int(round(ext / ts)))
        for ext, ts in zip(volume.extent(), target_spacing)
    )
    return resample_to_grid(volume, shape, target_spacing, volume.origin, mode)


def normalize_zscore(volume: ImageVolume) -> ImageVolume:
    """Shift/scale to zero mean and unit variance over the whole volume.

    Near-constant input (std < 1e-8) maps to all zeros instead of raising,
    which keeps flat augmentation-produced patches usable downstream.
    """
    if volume.channel_kind == "MASK":
        raise ValueError("z-score normalization is undefined for MASK volumes")
    v = volume.voxels.astype(np.float64)
    std = float(v.std())
    if std < 1e-8:
        return replace(volume, voxels=np.zeros_like(v))
    return replace(volume, voxels=(v - v.mean()) / std)


def split_dataset(ids, sizes, seed: int) -> DatasetSplit:
    """Deterministic random partition into train/val/test of the given sizes."""
    ids = list(ids)
    n_train, n_val, n_test = sizes
    if n_train + n_val + n_test != len(ids):
        raise SizeMismatch(
            f"sizes {sizes} sum to {n_train + n_val + n_test}, expected {len(ids)}"
        )
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    return DatasetSplit(
        train_ids=tuple(shuffled[:n_train]),
        val_ids=tuple(shuffled[n_train:n_train + n_val]),
        test_ids=tuple(shuffled[n_train + n_val:]),
        seed=seed,
    )


def default_split_sizes(n: int) -> tuple[int, int, int]:
    """Scale the 157/25/25-of-207 split proportions to a cohort of n cases."""
    val = max(1, round(n * 25 / 207)) if n >= 3 else (1 if n == 2 else 0)
    test = val if n - 2 * val >= 1 else max(0, n - val - 1)
    return (n - val - test, val, test)


CASE_CHANNEL_FILES = {"t2w": "t2w", "b1000": "b1000", "adc": "adc", "mask": "mask"}


def save_volume(volume: ImageVolume, path: str | Path, dtype=None) -> None:
    """Write a volume as NIfTI; spacing/origin metadata round-trips."""
    if dtype is None:
        dtype = np.uint8 if volume.channel_kind == "MASK" else np.float32
    write_nifti(path, volume.voxels, volume.spacing, volume.origin, dtype=dtype)


def load_volume(path: str | Path, channel_kind: str) -> ImageVolume:
    voxels, spacing, origin = read_nifti(path)
    if channel_kind == "MASK":
        voxels = (voxels > 0.5).astype(np.uint8)
    else:
        voxels = voxels.astype(np.float64)
    return ImageVolume(voxels=voxels, spacing=spacing, origin=origin,
                       channel_kind=channel_kind)


def load_case(
    paths: dict,
    target_spacing=None,
    normalize: bool = True,
) -> MultiparametricCase:
    """Load one case's channels and preprocess them onto a shared grid.

    paths maps {"case_id", "t2w", "b1000", "adc", "mask"} to NIfTI files.
    The reference grid is the T2W volume resampled to target_spacing
    (linear); b1000 joins by linear interpolation, ADC and mask by nearest
    neighbor. Non-mask channels are then z-score normalized per channel.
    """
    for key in ("t2w", "b1000", "adc", "mask"):
        if key not in paths:
            raise MissingChannel(f"case is missing the {key} entry")
        if not Path(paths[key]).exists():
            raise MissingChannel(f"{key} file not found: {paths[key]}")

    t2w = load_volume(paths["t2w"], "T2W")
    b1000 = load_volume(paths["b1000"], "B1000")
    adc = load_volume(paths["adc"], "ADC")
    mask = load_volume(paths["mask"], "MASK")

    if target_spacing is not None:
        t2w = resample(t2w, target_spacing, "linear")
    grid = (t2w.shape, t2w.spacing, t2w.origin)
    b1000 = resample_to_grid(b1000, *grid, mode="linear")
    adc = resample_to_grid(adc, *grid, mode="nearest")
    mask = resample_to_grid(mask, *grid, mode="nearest")

    if normalize:
        t2w = normalize_zscore(t2w)
        b1000 = normalize_zscore(b1000)
        adc = normalize_zscore(adc)

    return MultiparametricCase(
        case_id=str(paths.get("case_id", Path(paths["t2w"]).stem)),
        t2w=t2w, b1000=b1000, adc=adc, mask=mask,
    )


def read_manifest(path: str | Path) -> list[dict]:
    """Read a JSON manifest of per-case channel paths (relative to it)."""
    path = Path(path)
    with open(path) as f:
        manifest = json.load(f)
    root = path.parent
    entries = []
    for case in manifest["cases"]:
        entry = {"case_id": case["case_id"]}
        for key in ("t2w", "b1000", "adc", "mask"):
            entry[key] = str(root / case[key])
        entries.append(entry)
    return entries


def write_manifest(path: str | Path, entries: list[dict]) -> None:
    """Write a manifest; channel paths are stored relative to the file."""
    path = Path(path)
    root = path.parent
    cases = []
    for entry in entries:
        case = {"case_id": entry["case_id"]}
        for key in ("t2w", "b1000", "adc", "mask"):
            case[key] = str(Path(entry[key]).relative_to(root))
        cases.append(case)
    with open(path, "w") as f:
        json.dump({"cases": cases}, f, indent=2)
        f.write("\n")


def load_cases(manifest_path: str | Path, ids=None, target_spacing=None,
               normalize: bool = True) -> list[MultiparametricCase]:
    entries = read_manifest(manifest_path)
    if ids is not None:
        wanted = set(ids)
        entries = [e for e in entries if e["case_id"] in wanted]
    return [load_case(e, target_spacing=target_spacing, normalize=normalize)
            for e in entries]
