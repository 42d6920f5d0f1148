"""Discrete ambiguity function over chip-lag delays and arbitrary Doppler axes."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sequences import ChipSequence, aperiodic_xcorr

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class AfGrid:
    """|X(τ, f_d)| sampled on (delay_bin, doppler_bin)."""

    values: np.ndarray
    delay_axis: np.ndarray
    doppler_axis: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        d = np.asarray(self.delay_axis, dtype=float)
        f = np.asarray(self.doppler_axis, dtype=float)
        if v.shape != (d.size, f.size):
            raise ValueError(f"values shape {v.shape} does not match axes ({d.size}, {f.size})")
        for name, ax in (("delay", d), ("doppler", f)):
            if ax.size > 1 and np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} axis must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("grid values must be finite and nonnegative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "delay_axis", d)
        object.__setattr__(self, "doppler_axis", f)

    def to_csv(self, path) -> None:
        """Write ``delay,doppler,value`` triples, delay-major."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delay_s", "doppler_hz", "value"])
            for i, tau in enumerate(self.delay_axis):
                for j, fd in enumerate(self.doppler_axis):
                    w.writerow([repr(float(tau)), repr(float(fd)), repr(float(self.values[i, j]))])


@dataclass(frozen=True)
class LazMetrics:
    peak: float
    max_auto_sidelobe: float
    max_cross: float
    zone: tuple


def doppler_limit(center_freq: float, max_speed: float) -> float:
    """Largest Doppler shift ``f_c * v_max / c`` of interest in a LAZ."""
    return center_freq * max_speed / SPEED_OF_LIGHT


def lag_axis(a: ChipSequence, b: ChipSequence | None = None, max_lag: int | None = None) -> np.ndarray:
    """Delay axis (seconds) covering every chip lag of the a/b correlation."""
    b = a if b is None else b
    lags = np.arange(-(len(b) - 1), len(a))
    if max_lag is not None:
        lags = lags[np.abs(lags) <= max_lag]
    return lags / a.chip_rate


def ambiguity(a: ChipSequence, b: ChipSequence, delays=None, dopplers=(0.0,)) -> AfGrid:
    """Evaluate ``|sum_t a(t) b*(t - τ) exp(j 2π f_d t)|²`` on a grid.

    Delays (seconds) are snapped to the nearest integer chip lag. Each Doppler
    row is a direct sum, no FFT over the Doppler axis.
    """
    if a.chip_rate != b.chip_rate:
        raise ValueError("chip rates differ")
    fs = a.chip_rate
    if delays is None:
        delays = lag_axis(a, b)
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    dopplers = np.atleast_1d(np.asarray(dopplers, dtype=float))
    lags = np.rint(delays * fs).astype(np.int64)
    lo, hi = -(len(b) - 1), len(a) - 1
    if lags.min() < lo or lags.max() > hi:
        raise ValueError("delay axis exceeds the sequence overlap")
    if np.any(np.abs(dopplers) > fs / 2):
        raise ValueError("Doppler axis exceeds ±chip_rate/2")
    if np.unique(lags).size != lags.size:
        raise ValueError("delay axis collapses onto repeated chip lags")

    n = np.arange(len(a))
    x = a.chips.astype(complex)
    out = np.empty((lags.size, dopplers.size))
    idx = lags - lo
    for j, fd in enumerate(dopplers):
        if fd == 0.0:
            c = aperiodic_xcorr(a, b)
        else:
            xm = ChipSequence(x * np.exp(2j * np.pi * fd * n / fs), fs)
            c = aperiodic_xcorr(xm, b)
        out[:, j] = np.abs(c[idx]) ** 2
    return AfGrid(out, lags / fs, dopplers)


def _zone_mask(grid: AfGrid, max_delay: float, max_doppler: float):
    # relative slack absorbs float rounding of lag / chip_rate
    tol = 1e-12 + 1e-9 * max(abs(max_delay), 1e-30)
    dm = np.abs(grid.delay_axis) <= max_delay + tol
    fm = np.abs(grid.doppler_axis) <= max_doppler * (1 + 1e-12)
    return dm[:, None] & fm[None, :]


def laz_metrics(grid: AfGrid, max_delay: float, max_doppler: float, cross: bool = False) -> LazMetrics:
    """Peak, sidelobe and cross levels inside ``|τ| <= max_delay, |f_d| <= max_doppler``.

    For an auto grid ``peak`` is the origin value and ``max_auto_sidelobe`` the
    largest in-zone value off the origin. For a cross grid (``cross=True``)
    ``max_cross`` is the in-zone maximum and ``peak`` the global maximum.
    """
    mask = _zone_mask(grid, max_delay, max_doppler)
    if not mask.any():
        raise ValueError("the zone holds no grid bins")
    zone = (float(max_delay), float(max_doppler))
    if cross:
        return LazMetrics(float(grid.values.max()), 0.0, float(grid.values[mask].max()), zone)
    i0 = np.flatnonzero(np.isclose(grid.delay_axis, 0.0, atol=0.0))
    j0 = np.flatnonzero(grid.doppler_axis == 0.0)
    if i0.size == 0 or j0.size == 0:
        raise ValueError("auto metrics need the origin on the grid")
    peak = float(grid.values[i0[0], j0[0]])
    side = mask.copy()
    side[i0[0], j0[0]] = False
    sidelobe = float(grid.values[side].max()) if side.any() else 0.0
    return LazMetrics(peak, sidelobe, 0.0, zone)


def zero_doppler_cut(grid: AfGrid) -> np.ndarray:
    j = np.flatnonzero(grid.doppler_axis == 0.0)
    if j.size == 0:
        raise ValueError("f_d = 0 is not on the Doppler axis")
    return grid.values[:, j[0]].copy()
