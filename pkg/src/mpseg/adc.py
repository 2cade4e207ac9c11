"""Apparent diffusion coefficient fitting from diffusion-weighted series.

The signal model is mono-exponential decay, S_b = S_0 * exp(-b * D), with
the diffusion weighting b in s/mm^2 and D (the ADC) in mm^2/s. Two fitters
are provided: a closed-form two-point fit for a (b=0, b>0) pair and an
ordinary least-squares line fit of ln(S) against b for two or more
b-values. Both run in double precision regardless of input dtype.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesign, MissingB0, ShapeMismatch

# Signals at or below this level (normalized scanner units) cannot be
# log-transformed; affected voxels get D = 0 and a False validity flag.
SIGNAL_FLOOR = 1e-6


@dataclass(frozen=True)
class DWISeries:
    """Aligned diffusion-weighted volumes, one per b-value."""

    b_values: tuple[float, ...]
    signals: tuple[np.ndarray, ...]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        b = self.b_values
        if len(b) != len(self.signals):
            raise ShapeMismatch(
                f"{len(b)} b-values but {len(self.signals)} signal volumes"
            )
        if len(b) < 2:
            raise ValueError("a DWI series needs at least two b-values")
        if any(bi < 0 for bi in b):
            raise ValueError(f"b-values must be >= 0, got {b}")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError(f"b-values must be strictly increasing, got {b}")
        shape = self.signals[0].shape
        for i, s in enumerate(self.signals):
            if s.shape != shape:
                raise ShapeMismatch(
                    f"signal volume {i} has shape {s.shape}, expected {shape}"
                )
        if any(float(np.min(s)) < 0 for s in self.signals):
            raise ValueError("signal values must be >= 0")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.signals[0].shape

    def stacked(self) -> np.ndarray:
        """Signals as a (n_b, x, y, z) float64 array."""
        return np.stack([np.asarray(s, dtype=np.float64) for s in self.signals])


@dataclass(frozen=True)
class ADCMap:
    """Voxelwise ADC (mm^2/s) plus a fit-validity mask."""

    values: np.ndarray
    fit_method: str  # "two_point" or "least_squares"
    spacing: tuple[float, float, float]
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", np.ones(self.values.shape, bool))
        if self.valid.shape != self.values.shape:
            raise ShapeMismatch("validity mask shape differs from values")


def predict_signal(s0, b, d):
    """Forward signal model S_0 * exp(-b * D); the fitters' test oracle."""
    return s0 * np.exp(-np.asarray(b, dtype=np.float64) * np.asarray(d, dtype=np.float64))


def fit_adc_two_point(series: DWISeries) -> ADCMap:
    """Closed-form ADC from a (b=0, b>0) pair: D = -ln(S_b/S_0) / b.

    Voxels where either signal is at or below SIGNAL_FLOOR are unfittable;
    they get D = 0 and are flagged False in the validity mask.
    """
    if len(series.b_values) != 2:
        raise ValueError(
            f"two-point fit needs exactly two b-values, got {len(series.b_values)}"
        )
    b0, b1 = series.b_values
    if b0 != 0:
        raise MissingB0(f"first b-value must be 0, got {b0}")
    s0 = np.asarray(series.signals[0], dtype=np.float64)
    s1 = np.asarray(series.signals[1], dtype=np.float64)
    valid = (s0 > SIGNAL_FLOOR) & (s1 > SIGNAL_FLOOR)
    d = np.zeros(s0.shape, dtype=np.float64)
    np.divide(np.log(s1, where=valid, out=np.zeros_like(s1))
              - np.log(s0, where=valid, out=np.zeros_like(s0)),
              -b1, out=d, where=valid)
    return ADCMap(values=d, fit_method="two_point", spacing=series.spacing, valid=valid)


def fit_adc_least_squares(series: DWISeries) -> ADCMap:
    """ADC as the negated OLS slope of ln(S) against b.

    D = -(N*sum(b_i*ln S_i) - sum(b_i)*sum(ln S_i))
        / (N*sum(b_i^2) - (sum(b_i))^2)

    Works without a b=0 volume (e.g. b = [200, 600, 1000]). Voxels with
    any signal at or below SIGNAL_FLOOR get D = 0 and a False flag.
    """
    b = np.asarray(series.b_values, dtype=np.float64)
    n = len(b)
    denom = n * np.sum(b * b) - np.sum(b) ** 2
    if denom == 0:
        raise DegenerateDesign(f"all b-values equal: {series.b_values}")
    s = series.stacked()
    valid = np.all(s > SIGNAL_FLOOR, axis=0)
    y = np.log(s, where=valid[None], out=np.zeros_like(s))
    num = n * np.tensordot(b, y, axes=(0, 0)) - np.sum(b) * y.sum(axis=0)
    d = np.where(valid, -num / denom, 0.0)
    return ADCMap(values=d, fit_method="least_squares", spacing=series.spacing, valid=valid)
