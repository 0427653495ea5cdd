"""Uniform quantization, empirical entropy and information-dimension estimation."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dist import SampleBatch

DEFAULT_LADDER = (8, 16, 32, 64)
UNDERSAMPLING_FRACTION = 0.1
MONOTONE_SLACK_BITS = 0.02
MAX_AUTO_OCTAVE = 40
AUTO_RUNGS = 4


class UndersamplingWarning(UserWarning):
    """Finest resolution has more occupied cells than a tenth of the samples."""


@dataclass(frozen=True)
class QuantizerGrid:
    resolution: int

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 1:
            raise ValueError(f"resolution must be a positive integer, got {self.resolution}")


def quantize(batch: SampleBatch, grid: QuantizerGrid | int) -> np.ndarray:
    """Cell index ``floor(n * x)`` of every coordinate, shape ``dims x count``.

    The quantized value is ``index / n``.
    """
    n = grid.resolution if isinstance(grid, QuantizerGrid) else QuantizerGrid(grid).resolution
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    return np.floor(values * n).astype(np.int64)


def _cell_keys(idx: np.ndarray) -> np.ndarray:
    """One sortable key per column of an integer index matrix."""
    dims = idx.shape[0]
    if dims == 1:
        return idx[0]
    lo = idx.min(axis=1)
    span = idx.max(axis=1) - lo + 1
    if np.sum(np.log2(span.astype(float))) < 62:
        key = np.zeros(idx.shape[1], dtype=np.int64)
        for row, base, width in zip(idx, lo, span):
            key = key * width + (row - base)
        return key
    # fall back to the raw bytes of each index vector
    packed = np.ascontiguousarray(idx.T)
    return packed.view(np.dtype((np.void, packed.dtype.itemsize * dims))).ravel()


@dataclass
class EmpiricalPMF:
    """Occupied cells and their counts; empty cells are never stored."""

    dims: int
    cells: np.ndarray
    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 1):
            raise ValueError("counts must be >= 1")
        self.total = int(self.counts.sum())

    @classmethod
    def from_indices(cls, idx: np.ndarray) -> "EmpiricalPMF":
        idx = np.atleast_2d(idx)
        keys = _cell_keys(idx)
        _, first, counts = np.unique(keys, return_index=True, return_counts=True)
        return cls(idx.shape[0], idx[:, first], counts)

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "EmpiricalPMF":
        counts = np.fromiter(counts, dtype=np.int64)
        return cls(1, np.arange(counts.size)[None, :], counts)

    @property
    def occupied(self) -> int:
        return int(self.counts.size)

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in cell): int(c) for cell, c in zip(self.cells.T, self.counts)}


def empirical_entropy(pmf: EmpiricalPMF, correction: str = "miller_madow") -> float:
    """Entropy of the empirical distribution in bits.

    ``miller_madow`` adds the first-order bias term (K - 1) / (2 T ln 2),
    K being the number of occupied cells.
    """
    if pmf.total < 1:
        raise ValueError("empty pmf")
    p = pmf.counts / pmf.total
    h = float(-np.sum(p * np.log2(p)))
    if correction == "plugin":
        return h
    if correction == "miller_madow":
        return h + (pmf.occupied - 1) / (2 * pmf.total * math.log(2))
    raise ValueError(f"unknown correction {correction!r}")


@dataclass
class DimensionEstimate:
    value: float
    resolutions: list[int]
    entropies_bits: list[float]
    slope_stderr: float
    sample_count: int
    intercept: float = 0.0
    occupied_cells: list[int] = field(default_factory=list)
    undersampled: bool = False
    scale: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def _standardize(values: np.ndarray) -> tuple[np.ndarray, float]:
    # one global factor: a similarity map, so dimension is untouched
    centered = values - values.mean(axis=1, keepdims=True)
    rms = math.sqrt(float(np.mean(np.sum(centered**2, axis=0))))
    if rms == 0.0 or not math.isfinite(rms):
        return values, 1.0
    return values / rms, rms


def _fit_slope(resolutions: Sequence[int], entropies: Sequence[float]) -> tuple[float, float, float]:
    x = np.log2(np.asarray(resolutions, dtype=float))
    y = np.asarray(entropies, dtype=float)
    xm = x.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xm)
    dof = x.size - 2
    if dof > 0:
        resid = y - (intercept + slope * x)
        stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    else:
        stderr = 0.0
    return slope, stderr, intercept


def _auto_ladder(values: np.ndarray, correction: str, rungs: int):
    count = values.shape[1]
    limit = UNDERSAMPLING_FRACTION * count
    found = []
    for k in range(1, MAX_AUTO_OCTAVE + 1):
        pmf = EmpiricalPMF.from_indices(quantize(values, 1 << k))
        if pmf.occupied > limit:
            break
        found.append((1 << k, empirical_entropy(pmf, correction), pmf.occupied))
        if len(found) > rungs and found[-1][2] == found[-1 - rungs][2]:
            # occupancy has saturated: the law is atomic at this scale
            break
    if len(found) < 2:
        # even the coarsest rungs are over the guard; use them and flag
        for k in range(len(found) + 1, 3):
            pmf = EmpiricalPMF.from_indices(quantize(values, 1 << k))
            found.append((1 << k, empirical_entropy(pmf, correction), pmf.occupied))
    return found[-rungs:]


def estimate_dimension(
    batch: SampleBatch,
    resolutions: Sequence[int] | str | None = None,
    correction: str = "miller_madow",
    rungs: int = AUTO_RUNGS,
) -> DimensionEstimate:
    """Information dimension as the slope of quantized entropy against log2(n).

    ``resolutions`` is either an explicit list of integer resolutions, applied
    to the raw coordinates, or ``"auto"`` (the default): the batch is rescaled
    to unit RMS radius and the ``rungs`` finest dyadic resolutions that stay
    within the undersampling guard are used.
    """
    values = batch.values if isinstance(batch, SampleBatch) else np.atleast_2d(np.asarray(batch, dtype=float))
    count = values.shape[1]
    if resolutions is None or isinstance(resolutions, str):
        if resolutions not in (None, "auto"):
            raise ValueError(f"unknown resolution ladder {resolutions!r}")
        scaled, scale = _standardize(values)
        rows = _auto_ladder(scaled, correction, rungs)
    else:
        ladder = sorted({int(n) for n in resolutions})
        if len(ladder) < 2 or ladder[0] < 2:
            raise ValueError("need at least two distinct resolutions, each >= 2")
        scale = 1.0
        rows = []
        for n in ladder:
            pmf = EmpiricalPMF.from_indices(quantize(values, n))
            rows.append((n, empirical_entropy(pmf, correction), pmf.occupied))

    res = [r[0] for r in rows]
    ent = [r[1] for r in rows]
    occ = [r[2] for r in rows]
    slope, stderr, intercept = _fit_slope(res, ent)
    undersampled = occ[-1] > UNDERSAMPLING_FRACTION * count
    if undersampled:
        warnings.warn(
            f"{occ[-1]} occupied cells at resolution {res[-1]} for {count} samples; "
            "entropy is biased low and the slope is unreliable",
            UndersamplingWarning,
            stacklevel=2,
        )
    return DimensionEstimate(
        value=slope,
        resolutions=res,
        entropies_bits=ent,
        slope_stderr=stderr,
        sample_count=count,
        intercept=intercept,
        occupied_cells=occ,
        undersampled=undersampled,
        scale=scale,
    )
