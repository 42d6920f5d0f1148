"""Deterministic protocol runs whose traces are frozen under tests/golden/."""
import numpy as np

from wlansense.protocol import (DMG_AIRTIME, SUB7_AIRTIME, Aid, Capabilities, SetupAttributes, Simulator,
                                Sta, Trace, run_dmg_instance, run_non_tb_instance, run_sbp,
                                run_tb_instance, run_threshold_reporting)
from wlansense.quantization import Cfr

RX, TX = frozenset({"receiver"}), frozenset({"transmitter"})


def stations(n, dmg=False, sbp=False, passive=False):
    ap = Sta("AP", "02:00:00:00:00:01", Aid(0), True,
             Capabilities(dmg_sensing=dmg, sbp_support=sbp, passive_sensing_support=passive))
    return [ap] + [Sta(f"STA{i}", f"02:00:00:00:00:{i + 1:02x}", Aid(i), False,
                       Capabilities(dmg_sensing=dmg)) for i in range(1, n + 1)]


def sub7(n, measure=None, **kw):
    return Simulator(stations(n, **kw), 16_000, SUB7_AIRTIME, measure)


def dmg(n):
    return Simulator(stations(n, dmg=True, passive=True), 3_000, DMG_AIRTIME)


def full(sim):
    return sim.trace


def tb_fig8():
    """Five responders; STA5 misses polling; STA1-2 transmit, STA3-4 receive."""
    sim = sub7(5)
    setups = []
    for i in range(1, 6):
        sess = sim.setup_session("AP", f"STA{i}")
        setups.append(sim.setup_measurement(sess, SetupAttributes(TX if i <= 2 else RX)))
    run_tb_instance(sim, setups, unavailable={"STA5"})
    return full(sim)


def non_tb(roles):
    sim = sub7(1)
    sess = sim.setup_session("STA1", "AP")
    s = sim.setup_measurement(sess, SetupAttributes(frozenset(roles)))
    run_non_tb_instance(sim, s)
    return full(sim)


# per-STA channel drift: STA1 decorrelates fully, STA2 partly, STA3 never
DRIFT = {"STA1": 1.0, "STA2": 0.35, "STA3": 0.0}
THRESHOLDS = {"STA1": 0.3, "STA2": 0.3, "STA3": 0.0}


def drifting_measure(tx, rx, t):
    sta = rx if rx != "AP" else tx
    k = int(round(t * 1e3))
    base = np.exp(1j * np.linspace(0, 3, 16))
    r = np.random.default_rng([int(sta[3:]), k])
    fresh = np.exp(2j * np.pi * r.random(16))
    a = DRIFT[sta]
    return Cfr((1 - a) * base + a * fresh)


def threshold():
    sim = sub7(3, drifting_measure)
    setups = []
    for sta, thr in THRESHOLDS.items():
        sess = sim.setup_session("AP", sta)
        setups.append(sim.setup_measurement(sess, SetupAttributes(RX, "full", "threshold", thr)))
    for at in (1_000_000, 2_000_000, 3_000_000):
        run_threshold_reporting(sim, setups, at_ns=at)
    return full(sim)


def sbp():
    sim = sub7(3, sbp=True)
    run_sbp(sim, "STA1", "AP", ["STA2", "STA3"], initiator_joins=True)
    return full(sim)


def sbp_declined():
    sim = sub7(2)
    run_sbp(sim, "STA1", "AP", ["STA2"])
    return full(sim)


def _dmg_setups(sim, pairs):
    return [sim.setup_measurement(sim.setup_session(a, b, dmg=True)) for a, b in pairs]


def dmg_mode(mode, **opts):
    sim = dmg(3)
    if mode == "Monostatic":
        setups = _dmg_setups(sim, [("STA1", "STA1")])
    elif mode == "Bistatic":
        setups = _dmg_setups(sim, [("AP", "STA1")])
    else:
        setups = _dmg_setups(sim, [("AP", "STA1"), ("AP", "STA2"), ("AP", "STA3")])
    run_dmg_instance(sim, setups, mode, **opts)
    return full(sim)


CASES = {
    "tb_fig8": tb_fig8,
    "non_tb_receiver": lambda: non_tb({"receiver"}),
    "non_tb_transmitter": lambda: non_tb({"transmitter"}),
    "non_tb_both": lambda: non_tb({"transmitter", "receiver"}),
    "threshold": threshold,
    "sbp": sbp,
    "sbp_declined": sbp_declined,
    "dmg_monostatic": lambda: dmg_mode("Monostatic"),
    "dmg_bistatic": lambda: dmg_mode("Bistatic"),
    "dmg_multistatic": lambda: dmg_mode("Multistatic"),
    "dmg_coord_monostatic": lambda: dmg_mode("CoordMonostatic"),
    "dmg_coord_monostatic_simultaneous": lambda: dmg_mode("CoordMonostatic", simultaneous=True),
    "dmg_coord_bistatic": lambda: dmg_mode("CoordBistatic"),
    "dmg_passive_downlink": lambda: dmg_mode("Passive", direction="downlink"),
    "dmg_passive_uplink": lambda: dmg_mode("Passive", direction="uplink"),
}


def trace_text(name) -> str:
    t = CASES[name]()
    assert isinstance(t, Trace)
    return t.text()
