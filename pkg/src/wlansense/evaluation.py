"""Parameter estimation from measured channels, RMSE, accuracy-vs-SNR curves
and per-instance accuracy histograms."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ambiguity import SPEED_OF_LIGHT
from .channel import (advance, cfr_at, radial_velocity, random_multipath_cfr, snr_at, target_range,
                      targets_at)
from .feedback import Cir, cfr_to_cir
from .quantization import (dequantize, quant_error, quantize_fractional, quantize_legacy,
                           quantize_pow2, quantize_simplified)

SCHEMES = {"legacy": quantize_legacy, "simplified": quantize_simplified,
           "pow2": quantize_pow2, "fractional": quantize_fractional}

PARAMS = ("range", "velocity", "azimuth")
DETECTION_FACTOR = 10.0  # peak power over mean tap power needed to declare a detection


@dataclass(frozen=True)
class EstimateRecord:
    instance_id: int
    estimated: dict
    truth: dict
    snr: float
    miss: bool = False

    def __post_init__(self):
        if not self.miss:
            given = [v for v in self.estimated.values() if v is not None]
            if not all(math.isfinite(v) for v in given):
                raise ValueError("non-miss records need finite estimates")


@dataclass
class AccuracyReport:
    rmse: dict
    curve: list = field(default_factory=list)  # (snr_db, {param: rmse})
    hist_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hist_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    misses: int = 0
    n_records: int = 0
    high_variance: bool = False


# -- estimators -------------------------------------------------------------------

def _parabolic(y_prev, y0, y_next) -> float:
    den = y_prev - 2 * y0 + y_next
    if den == 0:
        return 0.0
    return float(np.clip(0.5 * (y_prev - y_next) / den, -0.5, 0.5))


def estimate_range(cir: Cir, monostatic: bool = True, exclude_taps: int = 0,
                   detection_factor: float = DETECTION_FACTOR):
    """Range (m) from the strongest tap with 3-point parabolic refinement.

    ``exclude_taps`` skips the first taps (the LOS tap in a bistatic link).
    Monostatic returns one-way range, bistatic the total path length. Returns
    None when no tap stands ``detection_factor`` above the mean tap power.
    """
    p = cir.power_delay_profile()
    if exclude_taps:
        p = p.copy()
        p[:exclude_taps] = 0.0
    if not np.any(p > 0):
        return None
    k = int(np.argmax(p))
    if p[k] < detection_factor * p.mean():
        return None
    a = np.sqrt(p)
    n = p.size
    delta = _parabolic(a[(k - 1) % n], a[k], a[(k + 1) % n]) if n >= 3 else 0.0
    tau = (k + delta) * cir.tap_spacing
    return tau * SPEED_OF_LIGHT / (2 if monostatic else 1)


@dataclass(frozen=True)
class VelocityEstimate:
    velocity: float
    max_unambiguous: float
    bin_width: float
    range_tap: int


def max_unambiguous_velocity(center_freq: float, interval: float) -> float:
    """``c / (4 f_c Δt)``: the monostatic Doppler Nyquist limit."""
    return SPEED_OF_LIGHT / (4 * center_freq * interval)


def is_ambiguous(velocity: float, center_freq: float, interval: float) -> bool:
    return abs(velocity) > max_unambiguous_velocity(center_freq, interval)


def estimate_velocity(burst, center_freq: float, intra_burst_interval: float, times=None,
                      range_tap: int | None = None, pad: int = 1, notch_bins: int = 0):
    """Monostatic radial velocity (m/s) from the slow-time spectrum.

    Without ``range_tap`` the range-Doppler cell with the most power picks the
    tap. ``notch_bins`` blanks that many bins either side of zero Doppler
    first, so slowly varying clutter cannot win; speeds inside the notch are
    then unmeasurable. ``times`` (if given) must be uniformly spaced.
    """
    burst = list(burst)
    if len(burst) < 4:
        raise ValueError("need at least four instances")
    if times is not None:
        dt = np.diff(np.asarray(times, float))
        if np.any(dt <= 0) or not np.allclose(dt, intra_burst_interval, rtol=1e-9, atol=0.0):
            raise ValueError("instances are not uniformly spaced")
    x = np.stack([c.taps for c in burst], axis=1)
    x = x.reshape(x.shape[0], x.shape[1], -1).sum(axis=2)
    n = x.shape[1] * pad
    if 2 * notch_bins + 1 >= n:
        raise ValueError("the zero-Doppler notch covers every bin")
    spec = np.abs(np.fft.fft(x, n, axis=1)) ** 2
    if notch_bins:
        spec[:, :notch_bins + 1] = 0.0
        spec[:, n - notch_bins:] = 0.0
    if range_tap is None:
        range_tap = int(np.unravel_index(np.argmax(spec), spec.shape)[0])
    row = spec[range_tap]
    k = int(np.argmax(row))
    delta = _parabolic(np.sqrt(row[(k - 1) % n]), np.sqrt(row[k]), np.sqrt(row[(k + 1) % n]))
    f = np.fft.fftfreq(n, intra_burst_interval)
    fd = f[k] + delta / (n * intra_burst_interval)
    vmax = max_unambiguous_velocity(center_freq, intra_burst_interval)
    v = -fd * SPEED_OF_LIGHT / (2 * center_freq)  # receding (positive range rate) lowers the phase
    return VelocityEstimate(float(v), vmax, SPEED_OF_LIGHT / (2 * center_freq * n * intra_burst_interval),
                            range_tap)


# -- metrics ---------------------------------------------------------------------

def rmse(records) -> dict:
    """Per-parameter root mean square error over non-miss records."""
    good = [r for r in records if not r.miss]
    if not good:
        raise ValueError("every record is a miss")
    out = {}
    for p in PARAMS:
        errs = [(r.estimated[p] - r.truth[p]) ** 2 for r in good
                if r.estimated.get(p) is not None and r.truth.get(p) is not None]
        out[p] = math.sqrt(math.fsum(errs) / len(errs)) if errs else float("nan")
    return out


def histogram(errors, bin_width: float):
    """Counts of absolute errors in ``[i w, (i+1) w)`` bins starting at 0."""
    e = np.abs(np.asarray(errors, float))
    if e.size == 0:
        return np.zeros(1), np.zeros(0, dtype=int)
    n = int(np.floor(e.max() / bin_width)) + 1
    edges = np.arange(n + 1) * bin_width
    idx = np.minimum((e / bin_width).astype(int), n - 1)
    return edges, np.bincount(idx, minlength=n)


# -- measurement pipeline ------------------------------------------------------------

def measure_echo(scenario, t: float, rng: np.random.Generator, snr_db: float | None = None) -> Cir:
    """Background-subtracted CIR of the scenario's link at time ``t``.

    With ``snr_db`` the noise power per subcarrier is set from the target
    echo power; otherwise it follows the scene noise floor.
    """
    sc, band = scenario.scene, scenario.band
    H = cfr_at(sc, band, scenario.tx, scenario.rx, t)
    bg = cfr_at(sc, band, scenario.tx, scenario.rx, t, include={"los", "scatterers"})
    if snr_db is None:
        var = 10 ** ((sc.noise_floor_dbm - scenario.tx_power_dbm) / 10)
    else:
        echo = cfr_at(sc, band, scenario.tx, scenario.rx, t, include={"targets"})
        var = float(np.mean(np.abs(echo.h) ** 2)) / 10 ** (snr_db / 10)
    noise = (rng.standard_normal(band.n_subcarriers) + 1j * rng.standard_normal(band.n_subcarriers))
    y = H.h - bg.h + noise * math.sqrt(var / 2)
    return cfr_to_cir(H.replace(y))


def _truth(scenario, t):
    return {"range": target_range(scenario.scene, scenario.tx, 0, t),
            "velocity": radial_velocity(scenario.scene, scenario.tx, 0, t),
            "azimuth": None}


def range_record(scenario, t, rng, snr_db=None, instance_id=0) -> EstimateRecord:
    cir = measure_echo(scenario, t, rng, snr_db)
    mono = scenario.tx == scenario.rx
    # the background (LOS included) is subtracted, so only taps before the LOS delay go
    excl = 0 if mono else int(_los_delay(scenario) / cir.tap_spacing)
    est = estimate_range(cir, mono, excl)
    truth = _truth(scenario, t)
    if not mono:
        truth["range"] = _bistatic_path(scenario, t)
    snr = snr_db if snr_db is not None else snr_at(scenario.scene, scenario.band, scenario.tx,
                                                   scenario.rx, scenario.tx_power_dbm, "target", 0, t)
    if est is None:
        return EstimateRecord(instance_id, {"range": None, "velocity": None, "azimuth": None},
                              truth, snr, miss=True)
    return EstimateRecord(instance_id, {"range": est, "velocity": None, "azimuth": None}, truth, snr)


def _los_delay(scenario):
    a = np.asarray(scenario.scene.sta(scenario.tx).position)
    b = np.asarray(scenario.scene.sta(scenario.rx).position)
    return float(np.linalg.norm(a - b)) / SPEED_OF_LIGHT


def _bistatic_path(scenario, t):
    p = np.asarray(targets_at(scenario.scene, t)[0].position)
    a = np.asarray(scenario.scene.sta(scenario.tx).position)
    b = np.asarray(scenario.scene.sta(scenario.rx).position)
    return float(np.linalg.norm(p - a) + np.linalg.norm(p - b))


def velocity_record(scenario, t0, n_instances, interval, rng, snr_db=None, instance_id=0,
                    notch_bins: int = 1):
    """Burst of ``n_instances`` CIRs from ``t0`` and the resulting velocity estimate.

    The clutter is not background-subtracted, so by default the bins next to
    zero Doppler are notched out of the search.
    """
    times = t0 + interval * np.arange(n_instances)
    burst = [measure_echo(scenario, float(t), rng, snr_db) for t in times]
    est = estimate_velocity(burst, scenario.band.center_freq, interval, times, notch_bins=notch_bins)
    truth = _truth(scenario, float(times[n_instances // 2]))
    return EstimateRecord(instance_id, {"range": None, "velocity": est.velocity, "azimuth": None},
                          truth, snr_db if snr_db is not None else float("nan")), est


# -- experiments -------------------------------------------------------------------

def accuracy_vs_snr(scenario, snr_grid, runs_per_point: int, seed: int = 0) -> AccuracyReport:
    """Range RMSE per SNR point; noise is scaled to the target echo power."""
    grid = list(snr_grid)
    if not grid:
        raise ValueError("empty SNR grid")
    if runs_per_point < 1:
        raise ValueError("need at least one run per point")
    curve, all_recs, misses = [], [], 0
    for i, snr in enumerate(grid):
        recs = []
        for run in range(runs_per_point):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, run]))
            recs.append(range_record(scenario, scenario.scene.time, rng, float(snr), run))
        misses += sum(r.miss for r in recs)
        try:
            point = rmse(recs)
        except ValueError:
            point = {p: float("nan") for p in PARAMS}
        curve.append((float(snr), point))
        all_recs.extend(recs)
    good = [r for r in all_recs if not r.miss]
    total = rmse(good) if good else {p: float("nan") for p in PARAMS}
    return AccuracyReport(total, curve, misses=misses, n_records=len(all_recs),
                          high_variance=runs_per_point < 2)


def run_trajectory(scenario, n_instances: int, interval: float, seed: int = 0) -> list:
    """Range records along the target's trajectory with geometry-driven SNR."""
    if n_instances < 1 or interval <= 0:
        raise ValueError("need a positive instance count and interval")
    out = []
    sc = scenario
    for i in range(n_instances):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        out.append(range_record(sc, sc.scene.time, rng, None, i))
        sc = sc.replace(scene=advance(sc.scene, interval))
    return out


def accuracy_histogram(records, bin_width: float = 0.25) -> AccuracyReport:
    """Histogram of absolute range errors; misses are counted, not binned."""
    records = list(records)
    good = [r for r in records if not r.miss]
    errs = [r.estimated["range"] - r.truth["range"] for r in good]
    edges, counts = histogram(errs, bin_width)
    total = rmse(good) if good else {p: float("nan") for p in PARAMS}
    return AccuracyReport(total, [], edges, counts, misses=len(records) - len(good),
                          n_records=len(records), high_variance=len(good) < 2)


def quantizer_benchmark(n_channels: int, n_b_values=(8,), seed: int = 0, n_subcarriers: int = 256):
    """Mean MSE and NMSE per (scheme, n_b) over seeded random multipath channels.

    Channel ``i`` is drawn from ``SeedSequence([seed, i])`` and shared by every
    scheme and bit width. NMSE is the ratio of mean error to mean channel power.
    """
    rows = []
    chans = [random_multipath_cfr(np.random.default_rng(np.random.SeedSequence([seed, i])), n_subcarriers)
             for i in range(n_channels)]
    power = math.fsum(float(np.mean(np.abs(H.h) ** 2)) for H in chans) / max(n_channels, 1)
    for n_b in n_b_values:
        for name, fn in SCHEMES.items():
            mses = [quant_error(H, dequantize(fn(H, n_b=n_b)))["mse"] for H in chans]
            mse = math.fsum(mses) / max(len(mses), 1)
            nmse = 10 * math.log10(mse / power) if mse > 0 and power > 0 else float("-inf")
            rows.append({"scheme": name, "n_b": int(n_b), "mse": mse, "nmse_db": nmse})
    return rows


# -- CSV ---------------------------------------------------------------------------

def _num(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def write_curve_csv(report: AccuracyReport, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "rmse_range_m", "rmse_vel_mps", "rmse_az_deg"])
        for snr, r in report.curve:
            w.writerow([_num(snr), _num(r["range"]), _num(r["velocity"]), _num(r["azimuth"])])


def write_bench_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheme", "n_b", "mse", "nmse_db"])
        for r in rows:
            w.writerow([r["scheme"], r["n_b"], _num(r["mse"]), _num(r["nmse_db"])])


def write_hist_csv(report: AccuracyReport, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        e = report.hist_edges
        for i, c in enumerate(report.hist_counts):
            w.writerow([_num(e[i]), _num(e[i + 1]), int(c)])
