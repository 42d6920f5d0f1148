"""
Sensing procedures as frame traces
==================================

Set up sessions, run a trigger-based instance with one station missing the
poll, switch two responders to threshold-based reporting, and sound three
60 GHz responders with one multistatic PPDU.
"""
import numpy as np

from wlansense.protocol import (DMG_AIRTIME, SUB7_AIRTIME, Aid, Capabilities, SetupAttributes,
                                Simulator, Sta, run_dmg_instance, run_tb_instance,
                                run_threshold_reporting)
from wlansense.protocol.validate import check_trace
from wlansense.quantization import Cfr


def stations(n, dmg=False):
    caps = Capabilities(dmg_sensing=dmg)
    return [Sta("AP", "02:00:00:00:00:01", Aid(0), True, caps)] + [
        Sta(f"STA{i}", f"02:00:00:00:00:{i + 1:02x}", Aid(i), False, caps) for i in range(1, n + 1)]


# -- trigger-based instance: STA1-2 transmit, STA3-4 receive, STA4 is away ------
sim = Simulator(stations(4))
roles = {1: {"transmitter"}, 2: {"transmitter"}, 3: {"receiver"}, 4: {"receiver"}}
setups = [sim.setup_measurement(sim.setup_session("AP", f"STA{i}"), SetupAttributes(frozenset(r)))
          for i, r in roles.items()]
print(run_tb_instance(sim, setups, unavailable={"STA4"}).text())
check_trace(sim.trace)


# -- threshold-based reporting ---------------------------------------------------
# STA1's channel changes a lot between instances, STA2's barely moves
def measure(tx, rx, t):
    sta = rx if rx != "AP" else tx
    drift = {"STA1": 0.9, "STA2": 0.05}[sta]
    base = np.exp(1j * np.linspace(0, 2, 32))
    fresh = np.exp(2j * np.pi * np.random.default_rng([int(sta[3:]), round(t * 1e3)]).random(32))
    return Cfr((1 - drift) * base + drift * fresh)


sim = Simulator(stations(2), measure=measure)
setups = [sim.setup_measurement(sim.setup_session("AP", s),
                                SetupAttributes(frozenset({"receiver"}), "full", "threshold", 0.2))
          for s in ("STA1", "STA2")]
for k in range(3):
    t = run_threshold_reporting(sim, setups, at_ns=(k + 1) * 1_000_000)
    var = {e.src: e.get("value") for e in t if e.kind == "CsiVariationReport"}
    sent = [e.src for e in t.frames("Report")]
    print(f"instance {k + 1}: variation {var} -> reports from {sent}")


# -- 60 GHz multistatic: three responders, one Sync row each --------------------
sim = Simulator(stations(3, dmg=True), 3_000, DMG_AIRTIME)
setups = [sim.setup_measurement(sim.setup_session("AP", f"STA{i}", dmg=True)) for i in (1, 2, 3)]
t = run_dmg_instance(sim, setups, "Multistatic")
print()
print("\n".join(line for line in t.text().splitlines() if "Measure" not in line))
