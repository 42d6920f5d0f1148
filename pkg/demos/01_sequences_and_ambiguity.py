"""
60 GHz training sequences and their ambiguity
==============================================

Build the CE and Sync sequences, look at how the eight Sync rows correlate,
and check how flat the ambiguity function is near the origin.
"""
import numpy as np

from wlansense.ambiguity import ambiguity, lag_axis, laz_metrics
from wlansense.sequences import (aperiodic_xcorr, build_ce, build_sync, correlation_summary,
                                 max_sidelobe, sync_family)

# CE0 and CE1 are 1024-chip concatenations of Golay blocks
ce0, ce1 = build_ce("CE0"), build_ce("CE1")
print("CE0 length", len(ce0), "peak", int(np.abs(aperiodic_xcorr(ce0, ce0)).max()),
      "max sidelobe", int(max_sidelobe(ce0)))

# Sync rows: diagonal = largest autocorrelation sidelobe, off-diagonal = largest |xcorr|
m = correlation_summary(sync_family())
print("\nSync correlation summary (rows 1..8)")
print(m.astype(int))

# Rows in the same group cancel when their fields line up in time,
# which is what a responder sees inside a slot-aligned Sync section
s1, s2 = build_sync(1), build_sync(2)
print("\nrow 1 vs row 2 at zero lag:", abs(int(np.vdot(s2.chips, s1.chips))))
print("row 1 vs row 2 at the last lag:", abs(int(aperiodic_xcorr(s1, s2)[-1])))

# Ambiguity in a local zone: +-64 chips, +-1 kHz of Doppler
lags = lag_axis(ce0, ce0, 64)
dop = np.linspace(-1000, 1000, 21)
g = ambiguity(ce0, ce0, lags, dop)
z = laz_metrics(g, 64 / ce0.chip_rate, 1000)
# off the origin bin the zone maximum is the zero-delay ridge itself: a 1 kHz
# shift barely rotates the phase across 1024 chips
print("\nlocal zone: peak", z.peak, "largest value off the origin", round(z.max_auto_sidelobe, 3))
off_ridge = g.values[np.abs(g.delay_axis) > 0].max()
print("largest value off the zero-delay ridge: {:.0f} ({:.1f} dB below the peak)".format(
    off_ridge, 10 * np.log10(z.peak / off_ridge)))
cz = laz_metrics(ambiguity(ce0, ce1, lags, dop), 64 / ce0.chip_rate, 1000, cross=True)
print("CE0 x CE1 largest value in the zone:", round(cz.max_cross))
