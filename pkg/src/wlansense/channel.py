"""Indoor channel synthesis: single-bounce rays off targets and static scatterers,
free-space LOS, and AR(1) clutter taps standing in for diffuse scattering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ambiguity import SPEED_OF_LIGHT
from .quantization import Cfr

COMPONENTS = frozenset({"los", "scatterers", "targets", "clutter"})
DIRECTIONAL_FLOOR_DB = -20.0


@dataclass(frozen=True)
class BandConfig:
    center_freq: float
    bandwidth: float
    n_subcarriers: int
    sifs: float

    def __post_init__(self):
        if self.bandwidth <= 0 or self.n_subcarriers < 1 or self.center_freq <= 0:
            raise ValueError("band needs positive frequency, bandwidth and subcarrier count")
        if self.sifs < 0:
            raise ValueError("sifs must be nonnegative")

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.n_subcarriers

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.center_freq

    @property
    def tap_spacing(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def is_dmg(self) -> bool:
        return self.center_freq > 45e9

    def subcarrier_freqs(self) -> np.ndarray:
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2
        return self.center_freq + k * self.subcarrier_spacing


SUB7_SIFS = 16e-6
DMG_SIFS = 3e-6
SUB7_160 = BandConfig(5.8e9, 160e6, 512, SUB7_SIFS)
SUB7_20 = BandConfig(5.8e9, 20e6, 64, SUB7_SIFS)
DMG_2160 = BandConfig(60.48e9, 1.76e9, 512, DMG_SIFS)


@dataclass(frozen=True)
class Directional:
    """Azimuth pattern ``cos(Δ)**n`` with a -20 dB floor; ``n`` sets the
    half-power beamwidth."""

    boresight_deg: float
    beamwidth_deg: float

    def __post_init__(self):
        if not 0 < self.beamwidth_deg < 180:
            raise ValueError("beamwidth must lie in (0, 180) degrees")

    @property
    def exponent(self) -> float:
        return math.log(0.5) / math.log(math.cos(math.radians(self.beamwidth_deg / 2)))

    def power_gain(self, azimuth_deg) -> np.ndarray:
        d = np.radians((np.asarray(azimuth_deg, dtype=float) - self.boresight_deg + 180) % 360 - 180)
        floor = 10 ** (DIRECTIONAL_FLOOR_DB / 10)
        c = np.clip(np.cos(d), 0.0, None)
        return np.maximum(c ** self.exponent, floor)


@dataclass(frozen=True)
class Sta:
    id: str
    position: tuple
    antenna: Directional | None = None  # None is isotropic

    def gain(self, toward) -> float:
        if self.antenna is None:
            return 1.0
        v = np.asarray(toward, float) - np.asarray(self.position, float)
        az = math.degrees(math.atan2(v[1], v[0]))
        return float(np.sqrt(self.antenna.power_gain(az)))


@dataclass(frozen=True)
class Scatterer:
    position: tuple
    reflectivity: float  # radar cross-section, m²


@dataclass(frozen=True)
class MovingTarget:
    position: tuple
    velocity: tuple
    rcs: float = 1.0


@dataclass(frozen=True)
class Clutter:
    ar_coefficient: float = 0.9
    power_db: float = -100.0  # total power of all taps relative to a unit transmit amplitude
    n_taps: int = 8
    update_interval: float = 1e-3

    def __post_init__(self):
        if not 0 <= self.ar_coefficient < 1:
            raise ValueError("AR(1) coefficient must lie in [0, 1)")
        if self.n_taps < 0 or self.update_interval <= 0:
            raise ValueError("bad clutter tap count or update interval")


class _ClutterProcess:
    """Lazily generated AR(1) clutter states per unordered STA pair.

    Innovations for steps ``[b*BLOCK, (b+1)*BLOCK)`` of a link come from
    ``SeedSequence([seed, i, j, b])`` so any query order gives the same taps.
    """

    BLOCK = 1024

    def __init__(self, seed: int, clutter: Clutter):
        self.seed = seed
        self.clutter = clutter
        self._blocks = {}
        self._states = {}  # link -> (step, state)

    def _innov(self, link, block):
        key = (link, block)
        if key not in self._blocks:
            ss = np.random.SeedSequence([self.seed, link[0], link[1], block])
            g = np.random.default_rng(ss)
            n = self.clutter.n_taps
            self._blocks[key] = (g.standard_normal((self.BLOCK, n))
                                 + 1j * g.standard_normal((self.BLOCK, n))) / np.sqrt(2)
        return self._blocks[key]

    def state(self, link, step: int) -> np.ndarray:
        rho = self.clutter.ar_coefficient
        s = math.sqrt(1 - rho * rho)
        cached = self._states.get(link)
        if cached is None or cached[0] > step:
            cur, x = 0, self._innov(link, 0)[0].copy()
        else:
            cur, x = cached
            x = x.copy()
        while cur < step:
            cur += 1
            w = self._innov(link, cur // self.BLOCK)[cur % self.BLOCK]
            x = rho * x + s * w
        self._states[link] = (cur, x.copy())
        return x

    def series(self, link, n_steps: int) -> np.ndarray:
        return np.array([self.state(link, k) for k in range(n_steps)])


@dataclass(frozen=True)
class Scene:
    room: tuple  # (Lx, Ly, Lz), box from the origin
    stas: tuple
    targets: tuple = ()
    scatterers: tuple = ()
    clutter: Clutter = field(default_factory=Clutter)
    noise_floor_dbm: float = -93.4
    seed: int = 0
    time: float = 0.0
    _process: _ClutterProcess | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        room = tuple(float(x) for x in self.room)
        if len(room) != 3 or min(room) <= 0:
            raise ValueError("room must be three positive extents")
        object.__setattr__(self, "room", room)
        ids = [s.id for s in self.stas]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate STA ids")
        for what, p in ([("sta " + s.id, s.position) for s in self.stas]
                        + [("target", t.position) for t in self.targets]
                        + [("scatterer", s.position) for s in self.scatterers]):
            if not self.inside(p):
                raise ValueError(f"{what} at {p} lies outside the room")
        if self._process is None:
            object.__setattr__(self, "_process", _ClutterProcess(self.seed, self.clutter))

    def inside(self, p) -> bool:
        p = np.asarray(p, float)
        return p.shape == (3,) and bool(np.all(p >= 0) and np.all(p <= np.asarray(self.room)))

    def sta(self, sta_id: str) -> Sta:
        for s in self.stas:
            if s.id == sta_id:
                return s
        raise KeyError(f"unknown STA id {sta_id!r}")

    def sta_index(self, sta_id: str) -> int:
        for i, s in enumerate(self.stas):
            if s.id == sta_id:
                return i
        raise KeyError(f"unknown STA id {sta_id!r}")

    def with_seed(self, seed: int) -> "Scene":
        return replace(self, seed=seed, _process=None)


def _fold(x, v, lo, hi):
    """Elastic reflection of coordinate ``x`` moving at ``v`` into ``[lo, hi]``."""
    L = hi - lo
    if L == 0:
        return lo, v
    y = (x - lo) % (2 * L)
    if y > L:
        return lo + 2 * L - y, -v
    return lo + y, v


def _move(target: MovingTarget, room, dt: float) -> MovingTarget:
    pos, vel = [], []
    for p, v, hi in zip(target.position, target.velocity, room):
        x, u = _fold(p + v * dt, v, 0.0, hi)
        pos.append(x)
        vel.append(u)
    return replace(target, position=tuple(pos), velocity=tuple(vel))


def advance(scene: Scene, dt: float) -> Scene:
    """Move every target by ``velocity * dt``, reflecting elastically off walls."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return scene
    moved = tuple(_move(t, scene.room, dt) for t in scene.targets)
    return replace(scene, targets=moved, time=scene.time + dt)


def targets_at(scene: Scene, t: float) -> tuple:
    dt = t - scene.time
    if dt == 0:
        return scene.targets
    return tuple(_move(x, scene.room, dt) for x in scene.targets)


@dataclass(frozen=True)
class Path:
    kind: str  # "los" | "scatterer" | "target"
    index: int
    delay: float
    gain: float  # real amplitude, phase carried by the delay


def _dist(a, b):
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def paths(scene: Scene, band: BandConfig, tx_id: str, rx_id: str, t: float | None = None) -> list:
    """Deterministic rays between two STAs at time ``t``."""
    t = scene.time if t is None else t
    tx, rx = scene.sta(tx_id), scene.sta(rx_id)
    lam = band.wavelength
    out = []
    if tx_id != rx_id:
        d = _dist(tx.position, rx.position)
        if d > 0:
            g = lam / (4 * math.pi * d) * tx.gain(rx.position) * rx.gain(tx.position)
            out.append(Path("los", 0, d / SPEED_OF_LIGHT, g))
    bounce = [("scatterer", i, s.position, s.reflectivity) for i, s in enumerate(scene.scatterers)]
    bounce += [("target", i, x.position, x.rcs) for i, x in enumerate(targets_at(scene, t))]
    for kind, i, p, sigma in bounce:
        d1, d2 = _dist(tx.position, p), _dist(p, rx.position)
        if d1 == 0 or d2 == 0:
            continue
        g = (lam * math.sqrt(sigma) / ((4 * math.pi) ** 1.5 * d1 * d2)
             * tx.gain(p) * rx.gain(p))
        out.append(Path(kind, i, (d1 + d2) / SPEED_OF_LIGHT, g))
    return out


def clutter_taps(scene: Scene, tx_id: str, rx_id: str, t: float) -> np.ndarray:
    c = scene.clutter
    if c.n_taps == 0:
        return np.zeros(0, complex)
    i, j = sorted((scene.sta_index(tx_id), scene.sta_index(rx_id)))
    step = int(math.floor(t / c.update_interval + 1e-9))
    x = scene._process.state((i, j), max(step, 0))
    return x * math.sqrt(10 ** (c.power_db / 10) / c.n_taps)


def cfr_at(scene: Scene, band: BandConfig, tx_id: str, rx_id: str, t: float | None = None,
           include=COMPONENTS) -> Cfr:
    """``H(k) = Σ gain · exp(-j2π f_k τ)`` over rays, plus clutter taps.

    Clutter taps sit one tap spacing apart after the LOS delay (after zero
    delay for a monostatic link). ``include`` selects components.
    """
    t = scene.time if t is None else t
    bad = set(include) - COMPONENTS
    if bad:
        raise ValueError(f"unknown components {sorted(bad)}")
    f = band.subcarrier_freqs()
    h = np.zeros(band.n_subcarriers, complex)
    keep = {"los": "los", "scatterer": "scatterers", "target": "targets"}
    for p in paths(scene, band, tx_id, rx_id, t):
        if keep[p.kind] in include:
            h += p.gain * np.exp(-2j * np.pi * f * p.delay)
    if "clutter" in include and scene.clutter.n_taps:
        taps = clutter_taps(scene, tx_id, rx_id, t)
        tx, rx = scene.sta(tx_id), scene.sta(rx_id)
        tau0 = _dist(tx.position, rx.position) / SPEED_OF_LIGHT
        delays = tau0 + (1 + np.arange(taps.size)) * band.tap_spacing
        h += np.exp(-2j * np.pi * np.outer(f, delays)) @ taps
    return Cfr(h, band.subcarrier_spacing, band.center_freq)


def path_gain(scene: Scene, band: BandConfig, tx_id: str, rx_id: str, path: str = "target",
              index: int = 0, t: float | None = None) -> float:
    for p in paths(scene, band, tx_id, rx_id, t):
        if p.kind == ("los" if path == "los" else path) and (path == "los" or p.index == index):
            return p.gain
    raise ValueError(f"no {path} path between {tx_id} and {rx_id}")


def snr_at(scene: Scene, band: BandConfig, tx_id: str, rx_id: str, tx_power_dbm: float,
           path: str = "target", index: int = 0, t: float | None = None) -> float:
    """Received power of one path over the noise floor, dB."""
    if path not in ("los", "target", "scatterer"):
        raise ValueError(f"unknown path kind {path!r}")
    g = path_gain(scene, band, tx_id, rx_id, path, index, t)
    return tx_power_dbm + 20 * math.log10(g) - scene.noise_floor_dbm


def add_noise(H: Cfr, noise_power: float, rng: np.random.Generator) -> Cfr:
    """Add circular complex Gaussian noise of the given per-subcarrier power."""
    n = rng.standard_normal(H.h.shape) + 1j * rng.standard_normal(H.h.shape)
    return H.replace(H.h + n * math.sqrt(noise_power / 2))


def noisy_cfr(scene: Scene, band: BandConfig, tx_id: str, rx_id: str, tx_power_dbm: float,
              rng: np.random.Generator, t: float | None = None) -> Cfr:
    """CFR normalized to unit transmit amplitude with thermal noise from the scene floor."""
    H = cfr_at(scene, band, tx_id, rx_id, t)
    return add_noise(H, 10 ** ((scene.noise_floor_dbm - tx_power_dbm) / 10), rng)


def target_range(scene: Scene, sta_id: str, index: int = 0, t: float | None = None) -> float:
    t = scene.time if t is None else t
    return _dist(scene.sta(sta_id).position, targets_at(scene, t)[index].position)


def radial_velocity(scene: Scene, sta_id: str, index: int = 0, t: float | None = None) -> float:
    """Range rate of a target as seen from a STA (positive receding)."""
    t = scene.time if t is None else t
    x = targets_at(scene, t)[index]
    d = np.asarray(x.position, float) - np.asarray(scene.sta(sta_id).position, float)
    n = np.linalg.norm(d)
    return float(np.dot(d, x.velocity) / n) if n else 0.0


def target_azimuth(scene: Scene, sta_id: str, index: int = 0, t: float | None = None) -> float:
    t = scene.time if t is None else t
    d = np.asarray(targets_at(scene, t)[index].position, float) - np.asarray(scene.sta(sta_id).position, float)
    return math.degrees(math.atan2(d[1], d[0]))


def random_multipath_cfr(rng: np.random.Generator, n_subcarriers: int = 256, n_taps: int = 16,
                         decay_taps: float = 4.0, n_p: int = 12, integer: bool = True) -> Cfr:
    """Frequency-selective test channel as fixed-point CSI.

    Rayleigh taps with an exponential power delay profile, FFT to subcarriers,
    then scaled so the largest I/Q component is uniform in
    ``[2**(n_p-2), 2**(n_p-1) - 1]`` and (by default) rounded to integers.
    """
    if n_taps < 1 or n_taps > n_subcarriers:
        raise ValueError("need 1 <= n_taps <= n_subcarriers")
    pdp = np.exp(-np.arange(n_taps) / decay_taps)
    pdp /= pdp.sum()
    taps = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) * np.sqrt(pdp / 2)
    h = np.fft.fft(taps, n_subcarriers)
    peak = max(np.abs(h.real).max(), np.abs(h.imag).max())
    h *= rng.uniform(2 ** (n_p - 2), 2 ** (n_p - 1) - 1) / peak
    if integer:
        h = np.round(h.real) + 1j * np.round(h.imag)
    return Cfr(h)
