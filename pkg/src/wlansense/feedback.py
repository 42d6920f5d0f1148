"""Sensing feedback payloads: full and partial CSI, truncated CIR, differential
CSI quantization, range-Doppler-angle maps, target lists, and TRN masking."""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter

from .ambiguity import SPEED_OF_LIGHT
from .quantization import (Cfr, QuantizedCfr, code_limit, decode_quantized,
                           dequantize, encode_quantized, quantize_simplified,
                           round_half_away)
from .sequences import DMG_CHIP_RATE, ChipSequence, base_pair, concat


@dataclass(frozen=True)
class Cir:
    taps: np.ndarray  # axis 0 is delay
    tap_spacing: float

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=complex)
        if t.ndim == 0 or t.shape[0] < 1:
            raise ValueError("a CIR needs at least one tap")
        if not np.all(np.isfinite(t)):
            raise ValueError("CIR taps must be finite")
        if self.tap_spacing <= 0:
            raise ValueError("tap_spacing must be positive")
        object.__setattr__(self, "taps", t)

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]

    def delays(self) -> np.ndarray:
        return np.arange(self.n_taps) * self.tap_spacing

    def power_delay_profile(self) -> np.ndarray:
        p = np.abs(self.taps) ** 2
        return p.reshape(self.n_taps, -1).sum(axis=1)


def cfr_to_cir(H: Cfr) -> Cir:
    """Unitary inverse DFT across subcarriers; tap spacing is 1/bandwidth."""
    return Cir(np.fft.ifft(H.h, axis=0, norm="ortho"), 1.0 / H.bandwidth)


def cir_to_cfr(cir: Cir, center_freq: float = 5.8e9) -> Cfr:
    n = cir.n_taps
    return Cfr(np.fft.fft(cir.taps, axis=0, norm="ortho"), 1.0 / (n * cir.tap_spacing), center_freq)


def truncate_cir(cir: Cir, L: int) -> Cir:
    if not 1 <= L <= cir.n_taps:
        raise ValueError(f"L must lie in 1..{cir.n_taps}")
    return Cir(cir.taps[:L], cir.tap_spacing)


def required_taps(max_range: float, tap_spacing: float) -> int:
    """Taps needed to cover monostatic echoes out to ``max_range``."""
    return math.ceil(2 * max_range / SPEED_OF_LIGHT / tap_spacing)


# -- payload bodies ------------------------------------------------------------

@dataclass(frozen=True)
class FullCsi:
    csi: QuantizedCfr


@dataclass(frozen=True)
class PartialCsi:
    """Amplitude codes are unsigned ``n_b``-bit; phase codes split 2π into ``2**n_b``."""

    kind: str  # "amplitude" | "phase"
    codes: np.ndarray
    n_b: int
    scale: float = 1.0  # amplitude represented by the top code

    def __post_init__(self):
        if self.kind not in ("amplitude", "phase"):
            raise ValueError(f"unknown partial CSI kind {self.kind!r}")
        object.__setattr__(self, "codes", np.asarray(self.codes, dtype=np.int64))


@dataclass(frozen=True)
class Tcir:
    taps: QuantizedCfr  # first L taps, axis 0 is delay
    tap_spacing: float
    n_total: int

    @property
    def L(self) -> int:
        return self.taps.shape[0]


@dataclass(frozen=True)
class DiffQuant:
    first: np.ndarray  # codes of subcarrier 0, trailing (I, Q)
    diffs: np.ndarray  # codes of subcarriers 1.., trailing (I, Q)
    step_first: float
    step_diff: float
    n_b_first: int
    n_b_diff: int
    saturated: bool = False
    subcarrier_spacing: float = 312.5e3
    center_freq: float = 5.8e9


@dataclass(frozen=True)
class RdaMap:
    """Power over (range, Doppler, angle)."""

    values: np.ndarray
    range_axis: np.ndarray
    doppler_axis: np.ndarray
    angle_axis: np.ndarray = field(default_factory=lambda: np.zeros(1))
    center_freq: float = 5.8e9

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        axes = [np.asarray(a, dtype=float) for a in (self.range_axis, self.doppler_axis, self.angle_axis)]
        if v.shape != tuple(a.size for a in axes):
            raise ValueError(f"map shape {v.shape} does not match its axes")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "range_axis", axes[0])
        object.__setattr__(self, "doppler_axis", axes[1])
        object.__setattr__(self, "angle_axis", axes[2])

    @property
    def velocity_axis(self) -> np.ndarray:
        return self.doppler_axis * SPEED_OF_LIGHT / (2 * self.center_freq)

    def to_csv(self, path) -> None:
        vel = self.velocity_axis
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["range_m", "doppler_hz", "velocity_mps", "angle_deg", "power"])
            for i, r in enumerate(self.range_axis):
                for j, fd in enumerate(self.doppler_axis):
                    for a, ang in enumerate(self.angle_axis):
                        w.writerow([repr(float(r)), repr(float(fd)), repr(float(vel[j])),
                                    repr(float(ang)), repr(float(self.values[i, j, a]))])


@dataclass(frozen=True)
class Target:
    range: float
    velocity: float
    azimuth: float
    elevation: float
    power: float


@dataclass(frozen=True)
class TargetParams:
    targets: tuple = ()


BODY_TAGS = {FullCsi: 1, PartialCsi: 2, Tcir: 3, DiffQuant: 4, RdaMap: 5, TargetParams: 6}


@dataclass(frozen=True)
class FeedbackPayload:
    body: object
    setup_id: int = 0
    instance_id: int = 0

    def __post_init__(self):
        if type(self.body) not in BODY_TAGS:
            raise ValueError(f"unknown feedback body {type(self.body).__name__}")

    @property
    def kind(self) -> str:
        return type(self.body).__name__

    def to_bytes(self) -> bytes:
        return encode_payload(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeedbackPayload":
        return decode_payload(data)


# -- full / partial CSI --------------------------------------------------------

def encode_full(H: Cfr, quantizer=quantize_simplified, **kw) -> FullCsi:
    return FullCsi(quantizer(H, **kw))


def encode_partial(H: Cfr, kind: str, n_b: int = 8) -> PartialCsi:
    if kind == "amplitude":
        amp = np.abs(H.h)
        scale = float(amp.max()) or 1.0
        codes = round_half_away(amp / scale * ((1 << n_b) - 1))
        return PartialCsi(kind, codes, n_b, scale)
    if kind == "phase":
        levels = 1 << n_b
        codes = round_half_away(np.angle(H.h) / (2 * np.pi) * levels) % levels
        return PartialCsi(kind, codes, n_b)
    raise ValueError(f"unknown partial CSI kind {kind!r}")


def decode_partial(p: PartialCsi) -> np.ndarray:
    if p.kind == "amplitude":
        return p.codes * (p.scale / ((1 << p.n_b) - 1))
    return p.codes * (2 * np.pi / (1 << p.n_b))


def compose_partial(amplitude: PartialCsi, phase: PartialCsi, like: Cfr | None = None) -> Cfr:
    """Rebuild a complex CFR from matching amplitude-only and phase-only codes."""
    if amplitude.kind != "amplitude" or phase.kind != "phase":
        raise ValueError("need one amplitude and one phase payload")
    if amplitude.codes.shape != phase.codes.shape:
        raise ValueError("amplitude and phase shapes differ")
    h = decode_partial(amplitude) * np.exp(1j * decode_partial(phase))
    if like is None:
        return Cfr(h)
    return like.replace(h)


# -- TCIR ----------------------------------------------------------------------

def encode_tcir(H: Cfr, L: int, n_b: int = 8) -> Tcir:
    if L < 1:
        raise ValueError("L must be at least 1")
    cir = truncate_cir(cfr_to_cir(H), L)
    q = quantize_simplified(Cfr(cir.taps, H.subcarrier_spacing, H.center_freq), n_b)
    return Tcir(q, cir.tap_spacing, H.n_subcarriers)


def decode_tcir(p: Tcir, zero_pad: bool = True) -> Cir:
    taps = dequantize(p.taps).h
    if zero_pad:
        full = np.zeros((p.n_total,) + taps.shape[1:], dtype=complex)
        full[: taps.shape[0]] = taps
        taps = full
    return Cir(taps, p.tap_spacing)


# -- differential CSI quantization ----------------------------------------------

def _iq(h):
    return np.stack([h.real, h.imag], axis=-1)


def encode_diff(H: Cfr, n_b_first: int = 8, n_b_diff: int = 4, diff_step: float | None = None) -> DiffQuant:
    """Quantize subcarrier 0 at full width, then each residual against the
    decoder's reconstruction of the previous subcarrier.

    Without ``diff_step`` the residual step is sized so that no residual can
    saturate: it covers the largest raw neighbour difference plus half an LSB
    of reconstruction error.
    """
    if not 2 <= n_b_diff <= n_b_first <= 16:
        raise ValueError("need 2 <= n_b_diff <= n_b_first <= 16")
    x = _iq(H.h)
    lim1, lim2 = code_limit(n_b_first), code_limit(n_b_diff)
    m = float(np.abs(x).max())
    step1 = (m / lim1) if m > 0 else 1.0
    if diff_step is None:
        d = float(np.abs(np.diff(x, axis=0)).max()) if H.n_subcarriers > 1 else 0.0
        step2 = max(d / (lim2 - 0.5), (d + step1 / 2) / lim2)
        step2 = step2 if step2 > 0 else step1
    else:
        if diff_step <= 0:
            raise ValueError("diff_step must be positive")
        step2 = float(diff_step)
    first = np.clip(round_half_away(x[0] / step1), -lim1, lim1)
    recon = first * step1
    diffs = np.empty((H.n_subcarriers - 1,) + x.shape[1:], dtype=np.int64)
    saturated = False
    for k in range(1, H.n_subcarriers):
        c = round_half_away((x[k] - recon) / step2)
        if np.any(np.abs(c) > lim2):
            saturated = True
            c = np.clip(c, -lim2, lim2)
        diffs[k - 1] = c
        recon = recon + c * step2
    return DiffQuant(first, diffs, step1, step2, n_b_first, n_b_diff, saturated,
                     H.subcarrier_spacing, H.center_freq)


def decode_diff(p: DiffQuant) -> Cfr:
    first = p.first[None] * p.step_first
    steps = np.cumsum(p.diffs * p.step_diff, axis=0)
    x = np.concatenate([first, first + steps], axis=0)
    return Cfr(x[..., 0] + 1j * x[..., 1], p.subcarrier_spacing, p.center_freq)


# -- range-Doppler-angle map ------------------------------------------------------

def _uniform_interval(times) -> float:
    t = np.asarray(times, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two instances")
    dt = np.diff(t)
    if np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("instances are not uniformly spaced")
    return float(dt[0])


def build_rda_map(burst, times, center_freq: float, angles_deg=None,
                  element_spacing: float = 0.5, window: str = "rect",
                  monostatic: bool = True) -> RdaMap:
    """Stack a burst of CIRs into a power map over range, Doppler and angle.

    Range comes from the tap index, Doppler from a DFT across instances at
    each tap. With ``angles_deg`` each CIR must carry a trailing antenna axis
    (uniform linear array, spacing in wavelengths) and the map gains a
    beamformed angle axis.
    """
    burst = list(burst)
    if len(burst) < 2:
        raise ValueError("need at least two instances")
    dt = _uniform_interval(times)
    if len(times) != len(burst):
        raise ValueError("one timestamp per CIR")
    spacing = burst[0].tap_spacing
    x = np.stack([c.taps for c in burst], axis=1)  # (taps, instances[, antennas])
    n_inst = x.shape[1]
    if angles_deg is None:
        if x.ndim != 2:
            raise ValueError("multi-antenna CIRs need an angle grid")
        x = x[:, :, None]
        ang = np.zeros(1)
    else:
        if x.ndim != 3:
            raise ValueError("angle processing needs a trailing antenna axis")
        ang = np.asarray(angles_deg, dtype=float)
        n_ant = x.shape[2]
        steer = np.exp(2j * np.pi * element_spacing * np.outer(np.arange(n_ant), np.sin(np.radians(ang))))
        x = x @ steer.conj() / n_ant
    if window == "rect":
        w = np.ones(n_inst)
    elif window == "hann":
        w = np.hanning(n_inst)
    else:
        raise ValueError(f"unknown window {window!r}")
    spec = np.fft.fftshift(np.fft.fft(x * w[None, :, None], axis=1), axes=1) / n_inst
    dop = np.fft.fftshift(np.fft.fftfreq(n_inst, dt))
    rng_axis = np.arange(x.shape[0]) * spacing * SPEED_OF_LIGHT / (2 if monostatic else 1)
    return RdaMap(np.abs(spec) ** 2, rng_axis, dop, ang, center_freq)


def map_noise_floor(rda: RdaMap, false_alarm: float = 1e-3) -> float:
    """Level that exponential (noise-only) map power exceeds with probability
    ``false_alarm`` anywhere on the map, estimated from the median bin."""
    v = rda.values.ravel()
    mean = np.median(v) / np.log(2)
    return float(mean * np.log(v.size / false_alarm))


def extract_targets(rda: RdaMap, threshold: float) -> TargetParams:
    """Strict local maxima above ``threshold``, strongest first."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    v = rda.values
    fp = np.ones((3, 3, 3 if v.shape[2] > 1 else 1), dtype=bool)
    fp[1, 1, fp.shape[2] // 2] = False
    neigh = maximum_filter(v, footprint=fp, mode="constant", cval=-np.inf)
    idx = np.argwhere((v > neigh) & (v > threshold))
    vel = rda.velocity_axis
    found = [Target(float(rda.range_axis[i]), float(vel[j]), float(rda.angle_axis[a]), 0.0,
                    float(v[i, j, a])) for i, j, a in idx]
    found.sort(key=lambda t: (-t.power, t.range, t.velocity, t.azimuth))
    return TargetParams(tuple(found))


# -- masked TRN ------------------------------------------------------------------

class MaskKeyError(ValueError):
    """Raised when a TRN pair does not match the claimed mask key."""


def trn_mask(n: int, key: int) -> np.ndarray:
    rng = np.random.default_rng(key)
    return np.exp(2j * np.pi * rng.random(n))


def mask_trn(trn2: ChipSequence, key: int | None) -> ChipSequence:
    """TRN1: ``trn2`` with a keyed unit-magnitude mask on every DFT bin.

    ``key=None`` is the identity mask.
    """
    if key is None:
        return trn2
    spec = np.fft.fft(trn2.chips) * trn_mask(len(trn2), key)
    return ChipSequence(np.fft.ifft(spec), trn2.chip_rate)


def implied_mask(trn1: ChipSequence, trn2: ChipSequence, rel_floor: float = 1e-9) -> np.ndarray:
    if len(trn1) != len(trn2):
        raise ValueError("TRN lengths differ")
    s1, s2 = np.fft.fft(trn1.chips), np.fft.fft(trn2.chips)
    if np.any(np.abs(s2) <= rel_floor * np.abs(s2).max()):
        raise ValueError("TRN2 spectrum has a null; the mask is not invertible")
    return s1 / s2


def apply_mask(H: Cfr, trn1: ChipSequence, trn2: ChipSequence) -> Cfr:
    """What a responder estimating against ``trn2`` reports when TRN1 was sent."""
    mask = implied_mask(trn1, trn2)
    return H.replace(H.h * mask.reshape((-1,) + (1,) * (H.h.ndim - 1)))


def unmask_measurement(H_false: Cfr, trn1: ChipSequence, trn2: ChipSequence,
                       key: int | None = None, tol: float = 1e-9) -> Cfr:
    """Divide the mask back out of a measurement.

    With ``key`` given, ``trn1`` is first checked against ``mask_trn(trn2, key)``
    and a mismatch raises :class:`MaskKeyError` carrying the normalized error.
    """
    if H_false.n_subcarriers != len(trn2):
        raise ValueError("measurement and TRN lengths differ")
    if key is not None:
        expected = mask_trn(trn2, key)
        err = reconstruction_error(expected.chips, trn1.chips)
        if err > tol:
            raise MaskKeyError(f"TRN1 does not match key {key}: normalized error {err:.3g}")
    mask = implied_mask(trn1, trn2)
    return H_false.replace(H_false.h / mask.reshape((-1,) + (1,) * (H_false.h.ndim - 1)))


def reconstruction_error(h, h_hat) -> float:
    """``1 - |<h, h_hat>| / (|h| |h_hat|)``; 1 when either side is zero."""
    a, b = np.ravel(h), np.ravel(h_hat)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0
    return float(max(0.0, 1.0 - abs(np.vdot(a, b)) / (na * nb)))


# -- byte layout -----------------------------------------------------------------
#
# <B tag><I setup_id><I instance_id><body>

def _arr(a, dt):
    a = np.asarray(a)
    return struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape) + a.astype(dt).tobytes()


def _read_arr(buf, off, dt):
    (nd,) = struct.unpack_from("<B", buf, off)
    off += 1
    shape = struct.unpack_from(f"<{nd}I", buf, off)
    off += 4 * nd
    n = int(np.prod(shape)) if nd else 1
    a = np.frombuffer(buf, dt, n, off).reshape(shape)
    return a, off + n * np.dtype(dt).itemsize


def _encode_body(b) -> bytes:
    if isinstance(b, FullCsi):
        return encode_quantized(b.csi)
    if isinstance(b, PartialCsi):
        kind = 0 if b.kind == "amplitude" else 1
        return struct.pack("<BBd", kind, b.n_b, b.scale) + _arr(b.codes, "<u2")
    if isinstance(b, Tcir):
        return struct.pack("<dI", b.tap_spacing, b.n_total) + encode_quantized(b.taps)
    if isinstance(b, DiffQuant):
        head = struct.pack("<ddBBBdd", b.step_first, b.step_diff, b.n_b_first, b.n_b_diff,
                           int(b.saturated), b.subcarrier_spacing, b.center_freq)
        return head + _arr(b.first, "<i2") + _arr(b.diffs, "<i2")
    if isinstance(b, RdaMap):
        return (struct.pack("<d", b.center_freq) + _arr(b.range_axis, "<f8")
                + _arr(b.doppler_axis, "<f8") + _arr(b.angle_axis, "<f8") + _arr(b.values, "<f8"))
    if isinstance(b, TargetParams):
        out = struct.pack("<I", len(b.targets))
        for t in b.targets:
            out += struct.pack("<5d", t.range, t.velocity, t.azimuth, t.elevation, t.power)
        return out
    raise ValueError("unknown feedback body")


def encode_payload(p: FeedbackPayload) -> bytes:
    return struct.pack("<BII", BODY_TAGS[type(p.body)], p.setup_id, p.instance_id) + _encode_body(p.body)


def decode_payload(buf: bytes) -> FeedbackPayload:
    tag, setup_id, instance_id = struct.unpack_from("<BII", buf, 0)
    off = 9
    if tag == 1:
        body = FullCsi(decode_quantized(buf, off)[0])
    elif tag == 2:
        kind, n_b, scale = struct.unpack_from("<BBd", buf, off)
        codes, _ = _read_arr(buf, off + 10, "<u2")
        body = PartialCsi("amplitude" if kind == 0 else "phase", codes.astype(np.int64), n_b, scale)
    elif tag == 3:
        spacing, n_total = struct.unpack_from("<dI", buf, off)
        body = Tcir(decode_quantized(buf, off + 12)[0], spacing, n_total)
    elif tag == 4:
        fmt = "<ddBBBdd"
        s1, s2, nb1, nb2, sat, sp, fc = struct.unpack_from(fmt, buf, off)
        off += struct.calcsize(fmt)
        first, off = _read_arr(buf, off, "<i2")
        diffs, off = _read_arr(buf, off, "<i2")
        body = DiffQuant(first.astype(np.int64), diffs.astype(np.int64), s1, s2, nb1, nb2,
                         bool(sat), sp, fc)
    elif tag == 5:
        (fc,) = struct.unpack_from("<d", buf, off)
        off += 8
        r, off = _read_arr(buf, off, "<f8")
        d, off = _read_arr(buf, off, "<f8")
        a, off = _read_arr(buf, off, "<f8")
        v, off = _read_arr(buf, off, "<f8")
        body = RdaMap(v.copy(), r.copy(), d.copy(), a.copy(), fc)
    elif tag == 6:
        (n,) = struct.unpack_from("<I", buf, off)
        off += 4
        ts = []
        for _ in range(n):
            ts.append(Target(*struct.unpack_from("<5d", buf, off)))
            off += 40
        body = TargetParams(tuple(ts))
    else:
        raise ValueError(f"corrupt feedback tag {tag}")
    return FeedbackPayload(body, setup_id, instance_id)


def default_trn(chip_rate: float | None = None) -> ChipSequence:
    """One TRN unit ``[Ga128, Gb128]``; unlike Ga alone its spectrum has no nulls."""
    a, b = base_pair(7)
    seq = concat([a, b])
    return seq if chip_rate in (None, DMG_CHIP_RATE) else ChipSequence(seq.chips, chip_rate)
