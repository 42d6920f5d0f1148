"""
Compressing CSI for feedback
============================

Quantize the same channels with four scaling schemes, then try the
differential, truncated-CIR and masked-TRN paths on one channel.
"""
import numpy as np

from wlansense.channel import random_multipath_cfr
from wlansense.evaluation import quantizer_benchmark
from wlansense.feedback import (FeedbackPayload, FullCsi, MaskKeyError, Tcir, apply_mask,
                                cfr_to_cir, decode_diff, decode_payload, decode_tcir, default_trn,
                                encode_diff, encode_payload, encode_tcir, mask_trn,
                                reconstruction_error, unmask_measurement)
from wlansense.quantization import quantize_fractional

# mean squared error over 300 random fixed-point channels, per bit width
print("scheme       n_b   NMSE (dB)")
for row in quantizer_benchmark(300, (4, 6, 8), seed=0):
    print(f"{row['scheme']:<12} {row['n_b']:<5} {row['nmse_db']:7.2f}")

H = random_multipath_cfr(np.random.default_rng(7), 256)

# fractional scaling picks an alpha / 2**e per subcarrier
q = quantize_fractional(H)
print("\nfirst five (alpha, e):", list(zip(q.scaling.alpha[:5].tolist(), q.scaling.beta_exp[:5].tolist())))

# differential coding: 8 bits for subcarrier 0, 4-bit residuals after it
d = encode_diff(H)
err = np.abs(decode_diff(d).h - H.h)
print(f"\ndifferential: step {d.step_diff:.2f}, worst error {err.max():.2f}, "
      f"saturated {d.saturated}")

# truncated CIR: most of the energy sits in the first taps
energy = np.cumsum(np.abs(cfr_to_cir(H).taps) ** 2)
for L in (4, 8, 16, 32):
    back = decode_tcir(encode_tcir(H, L))
    print(f"TCIR L={L:<3} energy kept {energy[L - 1] / energy[-1]:.3f}  "
          f"reconstruction error {reconstruction_error(cfr_to_cir(H).taps, back.taps):.2e}")

# payloads survive a byte round trip
blob = encode_payload(FeedbackPayload(FullCsi(q), setup_id=1, instance_id=3))
print("\nfull CSI payload:", len(blob), "bytes;", decode_payload(blob).kind)
blob = encode_payload(FeedbackPayload(encode_tcir(H, 16)))
print("TCIR payload:", len(blob), "bytes;", isinstance(decode_payload(blob).body, Tcir))

# masked TRN: the responder's report is only useful with the key
trn2 = default_trn()
trn1 = mask_trn(trn2, key=1234)
Hm = random_multipath_cfr(np.random.default_rng(8), len(trn2), integer=False)
reported = apply_mask(Hm, trn1, trn2)
print("\nmasked report vs channel:", f"{reconstruction_error(Hm.h, reported.h):.3f}")
print("unmasked with the key:   ", f"{reconstruction_error(Hm.h, unmask_measurement(reported, trn1, trn2, 1234).h):.1e}")
try:
    unmask_measurement(reported, trn1, trn2, key=999)
except MaskKeyError as e:
    print("wrong key:", e)
