"""CSI scaling and quantization: legacy 802.11n-style, simplified, power-of-two
and fractional scaling, with a little-endian byte layout for traces.

Every scheme quantizes the in-phase and quadrature parts of each element of
``H(k)`` to signed ``n_b``-bit integers after scaling by a factor derived from
``m_H(k)``, the largest |I| or |Q| on subcarrier ``k``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_N_B = 8
DEFAULT_N_P = 12
DEFAULT_ALPHA_SET = tuple(range(1, 256))
DEFAULT_BETA_MAX_EXP = 15

LEGACY_DB_STEP = 20 * np.log10(2.0)  # "6 dB": one factor of two in amplitude
LEGACY_DB_LEVELS = 8


@dataclass(frozen=True)
class Cfr:
    """Channel frequency response; axis 0 indexes subcarriers."""

    h: np.ndarray
    subcarrier_spacing: float = 312.5e3
    center_freq: float = 5.8e9

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim == 0:
            h = h.reshape(1)
        if h.shape[0] < 1:
            raise ValueError("a CFR needs at least one subcarrier")
        if not np.all(np.isfinite(h)):
            raise ValueError("CFR entries must be finite")
        object.__setattr__(self, "h", h)

    @property
    def n_subcarriers(self) -> int:
        return self.h.shape[0]

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    def subcarrier_freqs(self) -> np.ndarray:
        """Absolute frequency of each subcarrier, centred on ``center_freq``."""
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2
        return self.center_freq + k * self.subcarrier_spacing

    def replace(self, h) -> "Cfr":
        return Cfr(h, self.subcarrier_spacing, self.center_freq)


# -- scaling payloads ---------------------------------------------------------

@dataclass(frozen=True)
class Legacy11n:
    """Per-subcarrier scale ``M_H(k)``.

    With ``db_step`` unset the scale is ``m_H(k)`` itself. With ``db_step`` set
    it is ``reference * 10**(-db_step * code / 20)`` for a 3-bit ``code``.
    """

    scales: np.ndarray
    db_codes: np.ndarray | None = None
    db_step: float | None = None
    reference: float | None = None


@dataclass(frozen=True)
class Simplified:
    scale: float


@dataclass(frozen=True)
class Pow2:
    """``α_H = 2**exponents``; one exponent per subcarrier, or one for all."""

    exponents: np.ndarray
    n_p: int
    per_subcarrier: bool = True


@dataclass(frozen=True)
class Fractional:
    alpha: np.ndarray
    beta_exp: np.ndarray


SCHEME_TAGS = {Legacy11n: 1, Simplified: 2, Pow2: 3, Fractional: 4}


@dataclass(frozen=True)
class QuantizedCfr:
    q: np.ndarray  # integer, shape h.shape + (2,)
    scaling: object
    n_b: int
    subcarrier_spacing: float = 312.5e3
    center_freq: float = 5.8e9
    shape: tuple = field(default=())

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.int64)
        if q.shape[-1] != 2:
            raise ValueError("codes need a trailing (I, Q) axis")
        lim = code_limit(self.n_b)
        if np.any(np.abs(q) > lim):
            raise ValueError(f"codes exceed ±{lim}")
        if type(self.scaling) not in SCHEME_TAGS:
            raise ValueError(f"unknown scaling payload {type(self.scaling).__name__}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "shape", q.shape[:-1])

    @property
    def complex_codes(self) -> np.ndarray:
        return self.q[..., 0] + 1j * self.q[..., 1]

    def to_bytes(self) -> bytes:
        return encode_quantized(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "QuantizedCfr":
        q, _ = decode_quantized(data)
        return q


# -- helpers -------------------------------------------------------------------

def code_limit(n_b: int) -> int:
    return (1 << (n_b - 1)) - 1


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=float)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def _check_nb(n_b):
    if not 2 <= n_b <= 16:
        raise ValueError("n_b must lie in 2..16")


def _iq(h):
    return np.stack([h.real, h.imag], axis=-1)


def max_component(H: Cfr) -> np.ndarray:
    """``m_H(k)``: largest |I| or |Q| over all elements of each subcarrier."""
    a = np.abs(_iq(H.h)).reshape(H.n_subcarriers, -1)
    return a.max(axis=1)


def _bcast(per_k, h):
    """Reshape a per-subcarrier vector to broadcast against ``h`` (+ I/Q axis)."""
    return np.asarray(per_k).reshape((-1,) + (1,) * (h.ndim - 1))


def _finish(H, q, scaling, n_b):
    return QuantizedCfr(q, scaling, n_b, H.subcarrier_spacing, H.center_freq)


# -- schemes -------------------------------------------------------------------

def quantize_legacy(H: Cfr, n_b: int = DEFAULT_N_B, db_step: float | None = None) -> QuantizedCfr:
    """Per-subcarrier scaling ``Round(h / M_H(k) * (2**(n_b-1) - 1))``.

    By default ``M_H(k) = m_H(k)``. Passing ``db_step`` quantizes the scale to
    3 bits in dB relative to ``max_k m_H(k)``, rounding the scale up so no
    code ever clips (``db_step=LEGACY_DB_STEP`` gives the 0, 6, ..., 42 dB grid).
    """
    _check_nb(n_b)
    m = max_component(H)
    lim = code_limit(n_b)
    codes = None
    ref = None
    if db_step is None:
        scales = m.copy()
    else:
        if db_step <= 0:
            raise ValueError("db_step must be positive")
        ref = float(m.max())
        if ref == 0.0:
            ref = 1.0
        with np.errstate(divide="ignore"):
            drop_db = 20 * np.log10(ref / m)
        codes = np.minimum(LEGACY_DB_LEVELS - 1, np.floor(drop_db / db_step)).astype(np.int64)
        scales = ref * 10 ** (-db_step * codes / 20)
        # guard the floor against float error: the scale must never undercut m_H
        while np.any(bad := (scales < m) & (codes > 0)):
            codes[bad] -= 1
            scales = ref * 10 ** (-db_step * codes / 20)
    scales = np.where(scales == 0.0, 1.0, scales)
    x = _iq(H.h) / _bcast(scales, H.h)[..., None] * lim
    q = round_half_away(x)
    scaling = Legacy11n(scales, codes, None if db_step is None else float(db_step), ref)
    return _finish(H, q, scaling, n_b)


def quantize_simplified(H: Cfr, n_b: int = DEFAULT_N_B) -> QuantizedCfr:
    """One linear scale ``M_lin = max_k m_H(k)`` for every subcarrier."""
    _check_nb(n_b)
    scale = float(max_component(H).max())
    if scale == 0.0:
        scale = 1.0
    q = round_half_away(_iq(H.h) / scale * code_limit(n_b))
    return _finish(H, q, Simplified(scale), n_b)


def pow2_exponents(m, n_p: int) -> np.ndarray:
    """Largest ``e`` with ``2**e * m <= 2**(n_p-1) - 1`` (``e = 0`` where m is 0).

    For nonzero ``m`` this also gives ``2**e * m >= 2**(n_p-2)`` except in the
    sliver ``(2**(n_p-1) - 1, 2**(n_p-1))``, where the upper bound wins.
    """
    m = np.asarray(m, dtype=float)
    top = (1 << (n_p - 1)) - 1
    e = np.zeros(m.shape, dtype=np.int64)
    nz = m > 0
    e[nz] = np.floor(np.log2(top / m[nz])).astype(np.int64)
    over = nz & (np.ldexp(m, e) > top)
    while np.any(over):
        e[over] -= 1
        over = nz & (np.ldexp(m, e) > top)
    under = nz & (np.ldexp(m, e + 1) <= top)
    while np.any(under):
        e[under] += 1
        under = nz & (np.ldexp(m, e + 1) <= top)
    return e


def quantize_pow2(H: Cfr, n_b: int = DEFAULT_N_B, n_p: int = DEFAULT_N_P,
                  per_subcarrier: bool = True) -> QuantizedCfr:
    """``Round(α_H h 2**(n_b - n_p))`` with a power-of-two ``α_H``.

    ``α_H m_H`` lands in ``[2**(n_p-2), 2**(n_p-1) - 1]``. The rounded code can
    still reach ``2**(n_b-1)`` at the top of that bracket, so codes saturate
    at ``±(2**(n_b-1) - 1)``.
    """
    _check_nb(n_b)
    if n_p < n_b:
        raise ValueError("n_p must be at least n_b")
    m = max_component(H)
    if not per_subcarrier:
        m = np.full_like(m, m.max())
    e = pow2_exponents(m, n_p)
    shift = _bcast(e + n_b - n_p, H.h)[..., None]
    x = np.ldexp(_iq(H.h), shift)
    lim = code_limit(n_b)
    q = np.clip(round_half_away(x), -lim, lim)
    stored = e if per_subcarrier else e[:1]
    return _finish(H, q, Pow2(stored, n_p, per_subcarrier), n_b)


def pow2_codes_shift(iq_int, exponents, n_b: int, n_p: int) -> np.ndarray:
    """Integer-only power-of-two quantizer using shifts.

    ``iq_int`` holds integer I/Q samples (shape ``(K, ..., 2)``) and
    ``exponents`` one exponent per subcarrier. Right shifts round half away
    from zero, matching :func:`round_half_away`.
    """
    v = np.asarray(iq_int, dtype=np.int64)
    s = np.asarray(exponents, dtype=np.int64) + n_b - n_p
    s = s.reshape((-1,) + (1,) * (v.ndim - 1))
    s = np.broadcast_to(s, v.shape)
    mag = np.abs(v)
    left = np.where(s >= 0, mag << np.maximum(s, 0), 0)
    r = np.maximum(-s, 0)
    half = np.where(r > 0, np.left_shift(1, np.maximum(r - 1, 0)), 0)
    right = (mag + half) >> r
    out = np.sign(v) * np.where(s >= 0, left, right)
    lim = code_limit(n_b)
    return np.clip(out, -lim, lim)


def fractional_factors(m, n_b: int, alpha_set, beta_max_exp: int = DEFAULT_BETA_MAX_EXP):
    """Per-subcarrier ``(α, log2 β)`` maximising ``α/β <= (2**(n_b-1)-1)/m``.

    ``β`` ranges over ``2**0 .. 2**beta_max_exp``. Ties go to the smaller α.
    Zero ``m`` maps to ``(1, 0)``.
    """
    alphas = np.unique(np.asarray(sorted(alpha_set), dtype=np.int64))
    if alphas.size == 0:
        raise ValueError("alpha_set is empty")
    if np.any(alphas < 1):
        raise ValueError("alpha_set entries must be positive integers")
    m = np.asarray(m, dtype=float)
    lim = code_limit(n_b)
    alpha = np.ones(m.shape, dtype=np.int64)
    bexp = np.zeros(m.shape, dtype=np.int64)
    nz = np.flatnonzero(m > 0)
    if nz.size == 0:
        return alpha, bexp
    mm = m[nz][:, None]
    exps = np.arange(beta_max_exp + 1)
    caps = np.ldexp(float(lim), exps)[None, :]  # α m <= lim 2**e
    # largest α in the set under each bound, nudged by one where the division rounded
    k = np.searchsorted(alphas, caps / mm, side="right") - 1
    over = (k >= 0) & (alphas[np.maximum(k, 0)] * mm > caps)
    k[over] -= 1
    nxt = np.minimum(k + 1, alphas.size - 1)
    k = np.where((k + 1 < alphas.size) & (alphas[nxt] * mm <= caps), nxt, k)
    ratio = np.where(k >= 0, np.ldexp(alphas[np.maximum(k, 0)].astype(float), -exps[None, :]), -np.inf)
    # scanning e upward, the first maximum carries the smallest α
    e_best = np.argmax(ratio, axis=1)
    rows = np.arange(nz.size)
    if np.any(~np.isfinite(ratio[rows, e_best])):
        raise ValueError("no (α, β) pair satisfies the scaling bound; raise beta_max_exp")
    best = k[rows, e_best]
    alpha[nz] = alphas[best]
    bexp[nz] = e_best
    return alpha, bexp


def quantize_fractional(H: Cfr, n_b: int = DEFAULT_N_B, alpha_set=DEFAULT_ALPHA_SET,
                        beta_max_exp: int = DEFAULT_BETA_MAX_EXP) -> QuantizedCfr:
    """``Round((α/β) h)`` with the largest admissible ratio per subcarrier."""
    _check_nb(n_b)
    alpha, bexp = fractional_factors(max_component(H), n_b, alpha_set, beta_max_exp)
    ratio = np.ldexp(alpha.astype(float), -bexp)
    q = round_half_away(_iq(H.h) * _bcast(ratio, H.h)[..., None])
    return _finish(H, q, Fractional(alpha, bexp), n_b)


def effective_scale(qc: QuantizedCfr) -> np.ndarray:
    """Per-subcarrier factor mapping channel values to codes."""
    s = qc.scaling
    k = qc.shape[0]
    lim = code_limit(qc.n_b)
    if isinstance(s, Legacy11n):
        return lim / np.asarray(s.scales, dtype=float)
    if isinstance(s, Simplified):
        return np.full(k, lim / s.scale)
    if isinstance(s, Pow2):
        e = np.asarray(s.exponents, dtype=np.int64)
        if not s.per_subcarrier:
            e = np.full(k, e[0])
        return np.ldexp(1.0, e + qc.n_b - s.n_p)
    if isinstance(s, Fractional):
        return np.ldexp(np.asarray(s.alpha, dtype=float), -np.asarray(s.beta_exp))
    raise ValueError(f"corrupt scaling tag {type(s).__name__}")


def dequantize(qc: QuantizedCfr) -> Cfr:
    scale = effective_scale(qc)
    h = qc.complex_codes / scale.reshape((-1,) + (1,) * (len(qc.shape) - 1))
    return Cfr(h, qc.subcarrier_spacing, qc.center_freq)


def quant_error(H: Cfr, H_hat: Cfr) -> dict:
    """``mse``, ``max_abs`` and ``nmse_db`` between a channel and its estimate."""
    a, b = np.asarray(H.h), np.asarray(H_hat.h)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    err = np.abs(a - b) ** 2
    mse = float(err.mean())
    power = float(np.mean(np.abs(a) ** 2))
    if mse == 0.0:
        nmse_db = -np.inf
    elif power == 0.0:
        nmse_db = np.inf
    else:
        nmse_db = 10 * np.log10(mse / power)
    return {"mse": mse, "max_abs": float(np.sqrt(err.max())), "nmse_db": float(nmse_db)}


# -- byte layout ----------------------------------------------------------------
#
# <B tag><B n_b><B ndim><I dim>*ndim<d spacing><d center_freq><scaling><h I, h Q>*

def _pack_scaling(s, k):
    if isinstance(s, Legacy11n):
        if s.db_codes is None:
            return struct.pack("<B", 0) + np.asarray(s.scales, "<f8").tobytes()
        return (struct.pack("<Bdd", 1, s.reference, s.db_step)
                + np.asarray(s.db_codes, "<u1").tobytes())
    if isinstance(s, Simplified):
        return struct.pack("<d", s.scale)
    if isinstance(s, Pow2):
        e = np.asarray(s.exponents, "<i2")
        return struct.pack("<BB", int(s.per_subcarrier), s.n_p) + e.tobytes()
    if isinstance(s, Fractional):
        return np.asarray(s.alpha, "<u2").tobytes() + np.asarray(s.beta_exp, "<u1").tobytes()
    raise ValueError("unknown scaling payload")


def _unpack_scaling(tag, buf, off, k):
    if tag == 1:
        (mode,) = struct.unpack_from("<B", buf, off)
        off += 1
        if mode == 0:
            scales = np.frombuffer(buf, "<f8", k, off).astype(float)
            return Legacy11n(scales), off + 8 * k
        ref, step = struct.unpack_from("<dd", buf, off)
        off += 16
        codes = np.frombuffer(buf, "<u1", k, off).astype(np.int64)
        scales = ref * 10 ** (-step * codes / 20)
        return Legacy11n(scales, codes, step, ref), off + k
    if tag == 2:
        (scale,) = struct.unpack_from("<d", buf, off)
        return Simplified(scale), off + 8
    if tag == 3:
        per, n_p = struct.unpack_from("<BB", buf, off)
        off += 2
        n = k if per else 1
        e = np.frombuffer(buf, "<i2", n, off).astype(np.int64)
        return Pow2(e, n_p, bool(per)), off + 2 * n
    if tag == 4:
        alpha = np.frombuffer(buf, "<u2", k, off).astype(np.int64)
        off += 2 * k
        bexp = np.frombuffer(buf, "<u1", k, off).astype(np.int64)
        return Fractional(alpha, bexp), off + k
    raise ValueError(f"corrupt scaling tag {tag}")


def encode_quantized(qc: QuantizedCfr) -> bytes:
    tag = SCHEME_TAGS[type(qc.scaling)]
    shape = qc.shape
    head = struct.pack("<BBB", tag, qc.n_b, len(shape)) + struct.pack(f"<{len(shape)}I", *shape)
    head += struct.pack("<dd", qc.subcarrier_spacing, qc.center_freq)
    return head + _pack_scaling(qc.scaling, shape[0]) + np.asarray(qc.q, "<i2").tobytes()


def decode_quantized(buf: bytes, offset: int = 0):
    """Parse one QuantizedCfr; returns it and the offset just past it."""
    tag, n_b, ndim = struct.unpack_from("<BBB", buf, offset)
    off = offset + 3
    shape = struct.unpack_from(f"<{ndim}I", buf, off)
    off += 4 * ndim
    spacing, fc = struct.unpack_from("<dd", buf, off)
    off += 16
    scaling, off = _unpack_scaling(tag, buf, off, shape[0])
    n = int(np.prod(shape)) * 2
    q = np.frombuffer(buf, "<i2", n, off).astype(np.int64).reshape(tuple(shape) + (2,))
    return QuantizedCfr(q, scaling, n_b, spacing, fc), off + 2 * n
