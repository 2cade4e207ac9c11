"""Tumor-constrained training patch extraction and augmentation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import MultiparametricCase
from .errors import EmptyMask

DEFAULT_PATCH_SIZE = (256, 256, 16)


@dataclass(frozen=True)
class Patch:
    """One training sample: image channels, binary label, and provenance."""

    image: np.ndarray  # (C, x, y, z) float32
    label: np.ndarray  # (1, x, y, z) uint8
    case_id: str
    corner: tuple[int, int, int]

    @property
    def spatial_shape(self) -> tuple[int, int, int]:
        return self.image.shape[1:]


@dataclass(frozen=True)
class AugmentConfig:
    """Magnitudes and per-op probabilities for training augmentation.

    Ranges are symmetric about the identity: intensity shift is drawn from
    [-shift, +shift], scale from [1 - scale, 1 + scale], and crop jitter is
    an integer translation within +/- jitter voxels per axis.
    """

    shift: float = 0.1
    scale: float = 0.1
    jitter: tuple[int, int, int] = (8, 8, 2)
    shift_prob: float = 0.5
    scale_prob: float = 0.5
    jitter_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for p in (self.shift_prob, self.scale_prob, self.jitter_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must lie in [0, 1], got {p}")
        if self.shift < 0 or self.scale < 0 or any(j < 0 for j in self.jitter):
            raise ValueError("augmentation magnitudes must be >= 0")


def _pad_to_patch(arr: np.ndarray, patch_size) -> np.ndarray:
    """Symmetric zero-padding of trailing spatial axes up to patch_size."""
    pads = [(0, 0)] * (arr.ndim - 3)
    for dim, target in zip(arr.shape[-3:], patch_size):
        short = max(0, target - dim)
        pads.append((short // 2, short - short // 2))
    if any(p != (0, 0) for p in pads):
        arr = np.pad(arr, pads)
    return arr


def valid_corners(mask: np.ndarray, patch_size) -> np.ndarray:
    """Boolean grid of corner validity: the window must contain foreground.

    Shape is (X - px + 1, Y - py + 1, Z - pz + 1) for a (possibly padded)
    mask of shape (X, Y, Z). Computed with a summed-area table, so each
    entry is exact.
    """
    px, py, pz = patch_size
    sat = np.zeros(tuple(s + 1 for s in mask.shape), dtype=np.int64)
    sat[1:, 1:, 1:] = np.cumsum(np.cumsum(np.cumsum(mask, 0), 1), 2)
    nx, ny, nz = (mask.shape[i] - patch_size[i] + 1 for i in range(3))
    counts = (
        sat[px:px + nx, py:py + ny, pz:pz + nz]
        - sat[:nx, py:py + ny, pz:pz + nz]
        - sat[px:px + nx, :ny, pz:pz + nz]
        - sat[px:px + nx, py:py + ny, :nz]
        + sat[:nx, :ny, pz:pz + nz]
        + sat[:nx, py:py + ny, :nz]
        + sat[px:px + nx, :ny, :nz]
        - sat[:nx, :ny, :nz]
    )
    return counts > 0


def sample_patch(
    case: MultiparametricCase,
    rng: np.random.Generator,
    patch_size=DEFAULT_PATCH_SIZE,
    channels=("T2W", "B1000", "ADC"),
) -> Patch:
    """Extract one patch whose window contains annotated tumor.

    The corner is drawn uniformly among all valid corners. Volumes smaller
    than the patch are zero-padded symmetrically first.
    """
    mask = case.mask.voxels
    if not mask.any():
        raise EmptyMask(f"case {case.case_id} has an empty mask")
    image = _pad_to_patch(case.stacked(channels), patch_size)
    label = _pad_to_patch(mask.astype(np.uint8), patch_size)

    ok = valid_corners(label, patch_size)
    flat = np.flatnonzero(ok)
    pick = flat[rng.integers(len(flat))]
    corner = np.unravel_index(pick, ok.shape)
    sl = tuple(slice(c, c + p) for c, p in zip(corner, patch_size))
    return Patch(
        image=np.ascontiguousarray(image[(slice(None),) + sl]),
        label=label[sl][None],
        case_id=case.case_id,
        corner=tuple(int(c) for c in corner),
    )


def _translate(arr: np.ndarray, offsets) -> np.ndarray:
    """Shift trailing spatial axes by integer offsets, zero-filling."""
    out = np.zeros_like(arr)
    src, dst = [], []
    for n, off in zip(arr.shape[-3:], offsets):
        if abs(off) >= n:
            return out
        src.append(slice(max(0, -off), min(n, n - off)))
        dst.append(slice(max(0, off), min(n, n + off)))
    lead = (slice(None),) * (arr.ndim - 3)
    out[lead + tuple(dst)] = arr[lead + tuple(src)]
    return out


def augment(patch: Patch, cfg: AugmentConfig, rng: np.random.Generator) -> Patch:
    """Random intensity shift, intensity scale, and crop-translation jitter.

    Intensity ops touch only the image; the label moves only under the
    spatial jitter. A jitter that would leave the label empty is dropped,
    preserving the tumor-slice guarantee. Deterministic for a fixed rng
    state: every random draw happens whether or not the op fires.
    """
    image, label = patch.image, patch.label

    u_scale = rng.uniform()
    scale = 1.0 + rng.uniform(-cfg.scale, cfg.scale)
    if u_scale < cfg.scale_prob:
        image = image * np.float32(scale)

    u_shift = rng.uniform()
    shift = rng.uniform(-cfg.shift, cfg.shift)
    if u_shift < cfg.shift_prob:
        image = image + np.float32(shift)

    u_jit = rng.uniform()
    offsets = tuple(int(rng.integers(-j, j + 1)) for j in cfg.jitter)
    if u_jit < cfg.jitter_prob and any(offsets):
        new_label = _translate(label, offsets)
        if new_label.any():
            image = _translate(image, offsets)
            label = new_label

    return replace(patch, image=np.ascontiguousarray(image, dtype=np.float32),
                   label=label)
