"""Golay complementary pairs, CE0/CE1 channel-estimation sequences and the
eight multistatic Sync sequences.

All binary sequences are kept as integer ``±1`` arrays so that correlations
are exact; complex sequences fall back to double precision.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

# DMG single-carrier chip rate (Hz).
DMG_CHIP_RATE = 1.76e9

GOLAY_BLOCK = 128
SYNC_LENGTH = 8 * GOLAY_BLOCK


@dataclass(frozen=True)
class ChipSequence:
    """A finite chip sequence with its chip rate in Hz."""

    chips: np.ndarray
    chip_rate: float = DMG_CHIP_RATE

    def __post_init__(self):
        chips = np.asarray(self.chips)
        if chips.ndim != 1 or chips.size < 1:
            raise ValueError("a chip sequence needs at least one chip")
        if self.chip_rate <= 0:
            raise ValueError("chip_rate must be positive")
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    def __len__(self):
        return self.chips.size

    def __neg__(self):
        return ChipSequence(-self.chips, self.chip_rate)

    @property
    def duration(self) -> float:
        return len(self) / self.chip_rate

    @property
    def is_binary(self) -> bool:
        c = self.chips
        if np.iscomplexobj(c) and np.any(c.imag != 0):
            return False
        return bool(np.all(np.abs(c.real) == 1))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.chips) ** 2))

    def to_csv(self, path) -> None:
        """Write one chip per line as ``real,imag``."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["real", "imag"])
            for c in self.chips:
                c = complex(c)
                w.writerow([_fmt(c.real), _fmt(c.imag)])


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def concat(parts, chip_rate=None) -> ChipSequence:
    rate = chip_rate or parts[0].chip_rate
    return ChipSequence(np.concatenate([p.chips for p in parts]), rate)


@dataclass(frozen=True)
class GolaySeed:
    """Delay exponents and ±1 weights driving the Golay recursion.

    Stage ``k`` uses delay ``2**delay_exponents[k]`` and weight ``weights[k]``.
    """

    delay_exponents: tuple = field(default=())
    weights: tuple = field(default=())

    def __post_init__(self):
        d = tuple(int(x) for x in self.delay_exponents)
        w = tuple(int(x) for x in self.weights)
        if len(d) != len(w):
            raise ValueError("delay_exponents and weights differ in length")
        if sorted(d) != list(range(len(d))):
            raise ValueError(f"delay_exponents {d} is not a permutation of 0..{len(d) - 1}")
        if any(x not in (-1, 1) for x in w):
            raise ValueError("weights must be ±1")
        object.__setattr__(self, "delay_exponents", d)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.delay_exponents)

    @classmethod
    def random(cls, n_exp: int, rng: np.random.Generator) -> "GolaySeed":
        return cls(tuple(rng.permutation(n_exp)), tuple(rng.choice([-1, 1], n_exp)))


# Seeds for the two 128-chip pairs. SEED_7 follows the 802.11ad Ga128/Gb128
# delay/weight vectors; SEED_8 was found by search so that (Ga8, Gb8) is
# orthogonal to (Ga7, Gb7) in the sense <Ga7,Ga8> + <Gb7,Gb8> = 0, which is
# what makes the in-group Sync cross-correlation vanish at the aligned lag.
SEED_7 = GolaySeed((0, 3, 1, 2, 4, 5, 6), (-1, -1, -1, -1, 1, -1, -1))
SEED_8 = GolaySeed((0, 2, 6, 3, 1, 5, 4), (-1, 1, -1, 1, 1, -1, 1))


def golay_pair(n_exp: int, seed: GolaySeed, chip_rate: float = DMG_CHIP_RATE):
    """Build a complementary pair ``(Ga, Gb)`` of length ``2**n_exp``.

    Uses the delay/weight recursion::

        a_k[n] = w_k a_{k-1}[n] + b_{k-1}[n - D_k]
        b_k[n] = w_k a_{k-1}[n] - b_{k-1}[n - D_k]

    with ``a_0 = b_0 = δ`` and ``D_k = 2**delay_exponents[k]``.
    """
    if not 1 <= n_exp <= 16:
        raise ValueError("n_exp must lie in 1..16")
    if len(seed) != n_exp:
        raise ValueError(f"seed has length {len(seed)}, expected {n_exp}")
    n = 1 << n_exp
    a = np.zeros(n, dtype=np.int64)
    a[0] = 1
    b = a.copy()
    for p, w in zip(seed.delay_exponents, seed.weights):
        d = 1 << p
        shifted = np.zeros(n, dtype=np.int64)
        shifted[d:] = b[: n - d]
        a, b = w * a + shifted, w * a - shifted
    return ChipSequence(a, chip_rate), ChipSequence(b, chip_rate)


@lru_cache(maxsize=None)
def _base_pairs(chip_rate: float):
    return {7: golay_pair(7, SEED_7, chip_rate), 8: golay_pair(7, SEED_8, chip_rate)}


def base_pair(superscript: int, chip_rate: float = DMG_CHIP_RATE):
    """The recorded 128-chip pair ``(Ga^p, Gb^p)`` for ``p`` in {7, 8}."""
    if superscript not in (7, 8):
        raise ValueError("superscript must be 7 or 8")
    return _base_pairs(float(chip_rate))[superscript]


def build_ce(variant: str, chip_rate: float = DMG_CHIP_RATE) -> ChipSequence:
    """CE0 or CE1: ``[Ga, -Gb, Ga, -Gb, Ga, Gb, Ga, Gb]`` from pair 7 or 8."""
    key = variant.upper()
    if key not in ("CE0", "CE1"):
        raise ValueError("variant must be 'CE0' or 'CE1'")
    ga, gb = base_pair(7 if key == "CE0" else 8, chip_rate)
    return concat([ga, -gb, ga, -gb, ga, gb, ga, gb])


SYNC_MATRIX = np.array(
    [
        [1, -1, 1, -1, 1, 1, 1, 1],
        [1, -1, 1, -1, 1, 1, 1, 1],
        [1, 1, -1, -1, 1, -1, -1, 1],
        [1, 1, -1, -1, 1, -1, -1, 1],
        [-1, 1, -1, 1, 1, 1, 1, 1],
        [-1, 1, -1, 1, 1, 1, 1, 1],
        [1, -1, -1, 1, -1, -1, 1, 1],
        [1, -1, -1, 1, -1, -1, 1, 1],
    ],
    dtype=np.int64,
)
SYNC_MATRIX.setflags(write=False)

# (Gi, Gj) per row r = 1..8 as (superscript, 'a'|'b').
_SYNC_PAIRS = (
    ((7, "a"), (7, "b")),
    ((8, "a"), (8, "b")),
    ((7, "a"), (7, "b")),
    ((8, "a"), (8, "b")),
    ((7, "b"), (7, "a")),
    ((8, "b"), (8, "a")),
    ((7, "b"), (7, "a")),
    ((8, "b"), (8, "a")),
)

# Block c carries Gj when bit c is set, Gi otherwise: [Gi, Gi, Gj, Gj, Gi, Gi, Gi, Gi].
# Chosen by select_sync_pattern() over all 256 patterns and frozen here.
SYNC_BLOCK_PATTERN = 0b00001100


def sync_matrix() -> np.ndarray:
    return SYNC_MATRIX.copy()


def _golay(sup, which, chip_rate):
    ga, gb = base_pair(sup, chip_rate)
    return ga if which == "a" else gb


def build_sync(r: int, chip_rate: float = DMG_CHIP_RATE, pattern: int = SYNC_BLOCK_PATTERN) -> ChipSequence:
    """Sync sequence for STA row ``r`` (1..8): 8 sign-weighted 128-chip blocks."""
    if not 1 <= r <= 8:
        raise ValueError("Sync row r must lie in 1..8")
    if not 0 <= pattern < 256:
        raise ValueError("pattern must be an 8-bit integer")
    gi_key, gj_key = _SYNC_PAIRS[r - 1]
    gi = _golay(*gi_key, chip_rate)
    gj = _golay(*gj_key, chip_rate)
    blocks = []
    for c in range(8):
        g = gj if (pattern >> c) & 1 else gi
        blocks.append(g.chips * SYNC_MATRIX[r - 1, c])
    return ChipSequence(np.concatenate(blocks), chip_rate)


def aperiodic_xcorr(a: ChipSequence, b: ChipSequence) -> np.ndarray:
    """Aperiodic cross-correlation ``sum_n a[n + k] * conj(b[n])``.

    Returned for lags ``k = -(len(b) - 1) .. len(a) - 1`` (use
    :func:`xcorr_lags`). Integer inputs give exact integer output.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty input")
    if a.chip_rate != b.chip_rate:
        raise ValueError("chip rates differ")
    x, y = a.chips, b.chips
    if np.iscomplexobj(x) or np.iscomplexobj(y):
        return np.correlate(x.astype(complex), y.astype(complex), mode="full")
    # np.correlate on int64 is exact
    return np.correlate(x, y, mode="full")


def xcorr_lags(a: ChipSequence, b: ChipSequence) -> np.ndarray:
    return np.arange(-(len(b) - 1), len(a))


def max_sidelobe(x: ChipSequence) -> float:
    """Largest autocorrelation magnitude away from lag 0."""
    r = np.abs(aperiodic_xcorr(x, x))
    mid = len(x) - 1
    r[mid] = 0
    return float(r.max()) if r.size > 1 else 0.0


def max_xcorr(a: ChipSequence, b: ChipSequence, max_lag: int | None = None) -> float:
    """Largest |cross-correlation| over ``|lag| <= max_lag`` (all lags if None)."""
    c = np.abs(aperiodic_xcorr(a, b))
    if max_lag is not None:
        lags = xcorr_lags(a, b)
        c = c[np.abs(lags) <= max_lag]
    return float(c.max())


def correlation_summary(seqs, max_lag: int | None = None) -> np.ndarray:
    """Square summary matrix: diagonal holds the max autocorrelation sidelobe,
    off-diagonal entries the max |cross-correlation|, both restricted to
    ``|lag| <= max_lag`` when given."""
    n = len(seqs)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                r = np.abs(aperiodic_xcorr(seqs[i], seqs[i]))
                lags = xcorr_lags(seqs[i], seqs[i])
                keep = lags != 0
                if max_lag is not None:
                    keep &= np.abs(lags) <= max_lag
                out[i, i] = r[keep].max() if keep.any() else 0.0
            else:
                out[i, j] = max_xcorr(seqs[i], seqs[j], max_lag)
    return out


def sync_family(chip_rate: float = DMG_CHIP_RATE, pattern: int = SYNC_BLOCK_PATTERN):
    return [build_sync(r, chip_rate, pattern) for r in range(1, 9)]


GROUPS = ((0, 1, 2, 3), (4, 5, 6, 7))


def _pattern_cost(pattern: int):
    fam = sync_family(pattern=pattern)
    aligned = max(
        abs(int(aperiodic_xcorr(fam[i], fam[j])[SYNC_LENGTH - 1]))
        for g in GROUPS for i in g for j in g if i < j
    )
    cross = max(max_xcorr(fam[i], fam[j]) for i in GROUPS[0] for j in GROUPS[1])
    within = max(max_xcorr(fam[i], fam[j]) for g in GROUPS for i in g for j in g if i < j)
    peak = min(float(np.abs(aperiodic_xcorr(s, s)).max()) for s in fam)
    return aligned, peak, cross, within


def select_sync_pattern() -> int:
    """Search the 256 block-assignment patterns for the recorded seeds.

    Constraints: every in-group pair has zero correlation at the aligned lag and
    every peak autocorrelation is 1024. Among feasible patterns minimise the
    worst off-diagonal correlation over all lags, then the in-group max, then
    the cross-group max, then the pattern value.
    """
    best = None
    for pattern in range(256):
        aligned, peak, cross, within = _pattern_cost(pattern)
        if aligned != 0 or peak != SYNC_LENGTH:
            continue
        key = (max(within, cross), within, cross, pattern)
        if best is None or key < best:
            best = key
    if best is None:
        raise RuntimeError("no feasible Sync block pattern for the recorded seeds")
    return best[-1]
