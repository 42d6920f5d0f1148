"""JSON scenario files: scene, band, evaluation link, procedure and evaluation settings.

Schema (keys not listed are rejected)::

    name              str
    room              [Lx, Ly, Lz] metres, box anchored at the origin
    band              {"profile": "sub7_160" | "sub7_20" | "dmg"} or explicit
                      {center_freq, bandwidth, n_subcarriers, sifs}
    noise_floor_dbm   float
    tx_power_dbm      float
    clutter           {ar_coefficient, power_db, n_taps, update_interval}
    stas              [{id, position, is_ap?, aid? | uid?, mac?, antenna?,
                        dmg?, sbp?, passive?}]
    static_scatterers [{position, reflectivity}]
    targets           [{position, velocity, rcs?}]
    link              {tx, rx}   the evaluation link (tx == rx is monostatic)
    procedure         {mode, phases?, responders?, initiator?, report_type?,
                       reporting?, burst?, n_bursts?, ...}
    evaluation        {snr_grid, runs_per_point, trajectory_instances,
                       trajectory_interval, hist_bin_width}
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .channel import (DMG_2160, SUB7_20, SUB7_160, BandConfig, Clutter, Directional, MovingTarget,
                      Scatterer, Scene, Sta)

BAND_PROFILES = {"sub7_160": SUB7_160, "sub7_20": SUB7_20, "dmg": DMG_2160}
TOP_KEYS = {"name", "room", "band", "noise_floor_dbm", "tx_power_dbm", "clutter", "stas",
            "static_scatterers", "targets", "link", "procedure", "evaluation", "comment"}
DEFAULT_EVALUATION = {"snr_grid": [0, 5, 10, 13, 20, 30], "runs_per_point": 20,
                      "trajectory_instances": 20, "trajectory_interval": 0.1,
                      "hist_bin_width": 0.25}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    scene: Scene
    band: BandConfig
    tx: str
    rx: str
    tx_power_dbm: float
    procedure: dict = field(default_factory=dict)
    evaluation: dict = field(default_factory=dict)
    stas_config: tuple = ()

    def replace(self, **kw) -> "Scenario":
        return replace(self, **kw)


def _band(cfg) -> BandConfig:
    if isinstance(cfg, str):
        cfg = {"profile": cfg}
    if "profile" in cfg:
        base = BAND_PROFILES.get(cfg["profile"])
        if base is None:
            raise ScenarioError(f"unknown band profile {cfg['profile']!r}")
        extra = {k: v for k, v in cfg.items() if k != "profile"}
        return replace(base, **extra)
    return BandConfig(**cfg)


def _sta(d) -> Sta:
    ant = d.get("antenna")
    antenna = None if ant in (None, "isotropic") else Directional(**ant)
    return Sta(d["id"], tuple(d["position"]), antenna)


def from_dict(raw: dict) -> Scenario:
    raw = copy.deepcopy(raw)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
    try:
        band = _band(raw.get("band", "sub7_160"))
        stas = tuple(_sta(s) for s in raw["stas"])
        scene = Scene(
            room=tuple(raw["room"]),
            stas=stas,
            targets=tuple(MovingTarget(tuple(t["position"]), tuple(t.get("velocity", (0, 0, 0))),
                                       t.get("rcs", 1.0)) for t in raw.get("targets", [])),
            scatterers=tuple(Scatterer(tuple(s["position"]), s["reflectivity"])
                             for s in raw.get("static_scatterers", [])),
            clutter=Clutter(**raw.get("clutter", {})),
            noise_floor_dbm=raw.get("noise_floor_dbm", -93.4),
        )
        link = raw.get("link", {})
        tx = link.get("tx", stas[0].id)
        rx = link.get("rx", tx)
        scene.sta(tx), scene.sta(rx)
        ev = dict(DEFAULT_EVALUATION)
        ev.update(raw.get("evaluation", {}))
        return Scenario(raw.get("name", "scenario"), scene, band, tx, rx,
                        float(raw.get("tx_power_dbm", 20.0)), raw.get("procedure", {}), ev,
                        tuple(raw["stas"]))
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"invalid scenario: {e}") from e


def parse_override(text: str):
    if "=" not in text:
        raise ScenarioError(f"override {text!r} is not key=value")
    key, val = text.split("=", 1)
    try:
        value = json.loads(val)
    except json.JSONDecodeError:
        value = val
    return key.strip(), value


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply dotted ``a.b.0.c=value`` overrides; values parse as JSON when they can."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        key, value = parse_override(item) if isinstance(item, str) else item
        parts = key.split(".")
        node = raw
        try:
            for p in parts[:-1]:
                node = node[int(p)] if isinstance(node, list) else node.setdefault(p, {})
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)] = value
            else:
                node[last] = value
        except (IndexError, ValueError, TypeError) as e:
            raise ScenarioError(f"cannot apply override {key}: {e}") from e
    return raw


def load_raw(path) -> dict:
    p = Path(path)
    if not p.is_file():
        shipped = resources.files("wlansense") / "scenarios" / f"{p.stem}.json"
        if p.parent == Path(".") and shipped.is_file():
            return json.loads(shipped.read_text())
        raise ScenarioError(f"scenario file {path} not found")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: {e}") from e


def load(path, overrides=()) -> Scenario:
    return from_dict(apply_overrides(load_raw(path), overrides))


def shipped(name: str) -> Scenario:
    """One of the packaged scenarios by stem, e.g. ``living_room``."""
    f = resources.files("wlansense") / "scenarios" / f"{name}.json"
    if not f.is_file():
        raise ScenarioError(f"no shipped scenario {name!r}")
    return from_dict(json.loads(f.read_text()))


def shipped_names() -> list:
    d = resources.files("wlansense") / "scenarios"
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".json"))
