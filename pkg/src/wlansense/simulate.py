"""End-to-end scenario run: protocol trace, feedback payloads, accuracy CSVs."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .channel import noisy_cfr, snr_at
from .protocol import (DMG_AIRTIME, DMG_MODES, SUB7_AIRTIME, Aid, BurstSchedule, Capabilities,
                       LossModel, ProtocolError, SetupAttributes, Simulator, Sta, Uid,
                       run_dmg_instance, run_non_tb_instance, run_sbp, run_tb_instance,
                       run_threshold_reporting)
from .protocol.validate import check_trace
from .scenario import Scenario, ScenarioError

SUB7_MODES = ("TB", "Threshold", "NonTB", "SBP")
STREAMS = {"channel": 0, "noise": 1, "loss": 2, "evaluation": 3}


def substream(seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), STREAMS[name]])


def stream_seed(seed, name) -> int:
    return int(substream(seed, name).generate_state(1)[0])


def protocol_stas(scenario: Scenario):
    out = []
    for i, d in enumerate(scenario.stas_config):
        is_ap = bool(d.get("is_ap", False))
        if "uid" in d:
            ident = Uid(int(d["uid"]))
        else:
            ident = Aid(int(d.get("aid", i)))
        caps = Capabilities(dmg_sensing=bool(d.get("dmg", scenario.band.is_dmg)),
                            passive_sensing_support=bool(d.get("passive", False)),
                            sbp_support=bool(d.get("sbp", False)))
        out.append(Sta(d["id"], d.get("mac", f"02:00:00:00:00:{i + 1:02x}"), ident, is_ap, caps))
    return out


def _attributes(proc: dict, responder: dict) -> SetupAttributes:
    b = proc.get("burst", {})
    reporting = responder.get("reporting", proc.get("reporting", "immediate"))
    return SetupAttributes(
        responder_roles=frozenset(responder.get("roles", ["receiver"])),
        report_type=responder.get("report_type", proc.get("report_type", "full")),
        reporting=reporting,
        threshold=responder.get("threshold") if reporting == "threshold" else None,
        quantizer=proc.get("quantizer", "legacy"),
        n_b=int(proc.get("n_b", 8)),
        tcir_taps=int(proc.get("tcir_taps", 16)),
        burst=BurstSchedule(**b),
    )


def build_simulator(scenario: Scenario, seed: int) -> Simulator:
    scene = scenario.scene.with_seed(stream_seed(seed, "channel"))
    noise = np.random.default_rng(substream(seed, "noise"))
    band = scenario.band

    def measure(tx, rx, t):
        return noisy_cfr(scene, band, tx, rx, scenario.tx_power_dbm, noise, t)

    loss = None
    cfg = scenario.procedure.get("loss")
    if cfg:
        def link_snr(a, b):
            return snr_at(scene, band, a, b, scenario.tx_power_dbm, "los") if a != b else np.inf
        loss = LossModel(link_snr, np.random.default_rng(substream(seed, "loss")),
                         **(cfg if isinstance(cfg, dict) else {}))
    return Simulator(protocol_stas(scenario), sifs_ns=round(band.sifs * 1e9),
                     airtime=DMG_AIRTIME if band.is_dmg else SUB7_AIRTIME,
                     measure=measure, loss=loss)


def run_protocol(sim: Simulator, scenario: Scenario) -> None:
    proc = scenario.procedure
    mode = proc.get("mode", "TB")
    if mode not in SUB7_MODES and mode not in DMG_MODES:
        raise ScenarioError(f"unknown procedure mode {mode!r}")
    responders = proc.get("responders", [])
    ini = proc.get("initiator")
    if ini is None:
        raise ScenarioError("procedure needs an initiator")
    attrs = [_attributes(proc, r) for r in responders]
    times = BurstSchedule(**proc.get("burst", {})).instance_times(int(proc.get("n_bursts", 1)))

    if mode == "SBP":
        for t in times:
            at = max(round(t * 1e9), sim.engine.now + sim.sifs_ns)
            run_sbp(sim, ini, proc["proxy"], [r["sta"] for r in responders],
                    bool(proc.get("initiator_joins", False)),
                    attrs[0] if attrs else None, at_ns=at)
        return

    dmg = mode in DMG_MODES
    setups = []
    for r, a in zip(responders, attrs):
        if mode == "NonTB":
            sess = sim.setup_session(r["sta"], ini, dmg)
        else:
            sess = sim.setup_session(ini, r["sta"], dmg)
        setups.append(sim.setup_measurement(sess, a))
    opts = proc.get("options", {})
    for t in times:
        at = max(round(t * 1e9), sim.engine.now + sim.sifs_ns)
        if mode == "TB":
            run_tb_instance(sim, setups, proc.get("phases", ("Polling", "TfSounding",
                                                              "NdpaSounding", "Reporting")),
                            proc.get("unavailable", ()), at_ns=at)
        elif mode == "Threshold":
            run_threshold_reporting(sim, setups, proc.get("unavailable", ()), at_ns=at)
        elif mode == "NonTB":
            for i, s in enumerate(setups):
                run_non_tb_instance(sim, s, at_ns=at if i == 0 else None)
        else:
            run_dmg_instance(sim, setups, mode, at_ns=at, **opts)
    if proc.get("terminate", True):
        for s in setups:
            sim.terminate(s.session)


def write_payloads(blobs, path) -> None:
    """Length-prefixed (little-endian u32) feedback payloads, in report order."""
    with open(path, "wb") as fh:
        for b in blobs:
            fh.write(struct.pack("<I", len(b)))
            fh.write(b)


def read_payloads(path) -> list:
    data = Path(path).read_bytes()
    out, i = [], 0
    while i < len(data):
        (n,) = struct.unpack_from("<I", data, i)
        out.append(data[i + 4:i + 4 + n])
        i += 4 + n
    return out


@dataclass
class SimulationResult:
    trace_path: Path
    payload_path: Path
    curve_path: Path
    hist_path: Path
    curve: ev.AccuracyReport
    hist: ev.AccuracyReport


def simulate(scenario: Scenario, seed: int, out_dir, evaluate: bool = True) -> SimulationResult:
    """Run the protocol, check trace invariants, then the accuracy experiments.

    Raises ScenarioError (bad config), ProtocolError (refused procedure) or
    InvariantViolation (trace invariants broken).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = build_simulator(scenario, seed)
    try:
        run_protocol(sim, scenario)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ScenarioError):
            raise
        raise ScenarioError(f"bad procedure: {e}") from e
    finally:
        sim.trace.write(out / "trace.txt")
    check_trace(sim.trace)
    write_payloads(sim.payload_log, out / "payloads.bin")

    e = scenario.evaluation
    sc = scenario.replace(scene=scenario.scene.with_seed(stream_seed(seed, "channel")))
    eseed = stream_seed(seed, "evaluation")
    if evaluate:
        curve = ev.accuracy_vs_snr(sc, e["snr_grid"], int(e["runs_per_point"]), eseed)
        recs = ev.run_trajectory(sc, int(e["trajectory_instances"]), float(e["trajectory_interval"]), eseed)
        hist = ev.accuracy_histogram(recs, float(e["hist_bin_width"]))
    else:
        curve = ev.AccuracyReport({})
        hist = ev.AccuracyReport({})
    ev.write_curve_csv(curve, out / "curve.csv")
    ev.write_hist_csv(hist, out / "hist.csv")
    return SimulationResult(out / "trace.txt", out / "payloads.bin", out / "curve.csv",
                            out / "hist.csv", curve, hist)


__all__ = ["simulate", "build_simulator", "run_protocol", "protocol_stas", "substream", "stream_seed",
           "write_payloads", "read_payloads", "SimulationResult", "ProtocolError"]
