"""
A person walking through a living room
======================================

Run the shipped living-room scenario end to end, then read the accuracy
curve and histogram it wrote. Finish with a 60 GHz burst that measures
walking speed.
"""
import csv
import tempfile
from pathlib import Path

import numpy as np

from wlansense import evaluation as ev
from wlansense.channel import DMG_2160
from wlansense.scenario import shipped
from wlansense.simulate import read_payloads, simulate

sc = shipped("living_room")
out = Path(tempfile.mkdtemp())
res = simulate(sc, seed=1, out_dir=out)

trace = (out / "trace.txt").read_text().splitlines()
kinds = [line.split(" | ")[2] for line in trace]
print(len(trace), "trace lines;", kinds.count("Report"), "reports;",
      len(read_payloads(out / "payloads.bin")), "payloads on disk")

# range RMSE against the echo SNR, monostatic at the AP
print("\nSNR (dB)   range RMSE (m)")
for row in csv.DictReader(open(out / "curve.csv")):
    print(f"{float(row['snr_db']):6.0f}     {float(row['rmse_range_m']):.3f}")

# per-instance errors while the target walks for two seconds
print("\nerror bin (m)    count")
for row in csv.DictReader(open(out / "hist.csv")):
    print(f"{float(row['bin_lo']):.2f} - {float(row['bin_hi']):.2f}     {row['count']}")
print("misses:", res.hist.misses)

# 60 GHz: 64 instances 0.5 ms apart give 0.0775 m/s Doppler bins
fast = sc.replace(band=DMG_2160)
rng = np.random.default_rng(0)
rec, est = ev.velocity_record(fast, 0.0, 64, 0.5e-3, rng, snr_db=20.0)
print(f"\nradial velocity: true {rec.truth['velocity']:+.3f} m/s, "
      f"estimated {rec.estimated['velocity']:+.3f} m/s (bin {est.bin_width:.4f}, "
      f"unambiguous to +-{est.max_unambiguous:.2f} m/s)")
