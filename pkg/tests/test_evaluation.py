import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wlansense import evaluation as ev
from wlansense.ambiguity import SPEED_OF_LIGHT
from wlansense.channel import DMG_2160
from wlansense.feedback import Cir
from wlansense.scenario import from_dict, shipped
from wlansense.simulate import stream_seed


def rec(est, truth, miss=False, i=0):
    return ev.EstimateRecord(i, {"range": est, "velocity": None, "azimuth": None},
                             {"range": truth, "velocity": 0.0, "azimuth": None}, 20.0, miss)


def desk_scenario(distance=5.0, velocity=(0.0, 0.0, 0.0), link=("AP", "AP")):
    return from_dict({
        "room": [12.0, 6.0, 3.0],
        "band": {"profile": "sub7_160"},
        "clutter": {"power_db": -200.0},
        "stas": [{"id": "AP", "position": [1.0, 3.0, 1.5], "is_ap": True},
                 {"id": "STA1", "position": [1.0, 2.2, 1.5]}],
        "targets": [{"position": [1.0 + distance, 3.0, 1.5], "velocity": list(velocity)}],
        "link": {"tx": link[0], "rx": link[1]},
    })


# -- RMSE against a hand-written oracle ----------------------------------------------

def rmse_oracle(pairs):
    total = 0.0
    for e, t in pairs:
        total += (e - t) * (e - t)
    return (total / len(pairs)) ** 0.5


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=50))
def test_rmse_matches_oracle(pairs):
    got = ev.rmse([rec(e, t) for e, t in pairs])["range"]
    assert got == pytest.approx(rmse_oracle(pairs), rel=1e-12, abs=1e-12)


def test_rmse_symmetric_errors():
    assert ev.rmse([rec(6.0, 5.0), rec(4.0, 5.0)])["range"] == pytest.approx(1.0)


def test_rmse_skips_misses_and_missing_params():
    out = ev.rmse([rec(5.5, 5.0), rec(None, 5.0, miss=True)])
    assert out["range"] == pytest.approx(0.5)
    assert math.isnan(out["velocity"]) and math.isnan(out["azimuth"])


def test_rmse_all_misses_raises():
    with pytest.raises(ValueError):
        ev.rmse([rec(None, 5.0, miss=True)])


def test_non_miss_record_needs_finite_values():
    with pytest.raises(ValueError):
        rec(float("nan"), 5.0)


# -- histograms ------------------------------------------------------------------------

@given(st.lists(st.floats(-10, 10), max_size=200), st.floats(0.01, 2.0))
def test_histogram_conserves_mass(errors, width):
    edges, counts = ev.histogram(errors, width)
    assert counts.sum() == len(errors)
    if errors:
        assert edges[0] == 0 and edges[-1] >= max(abs(e) for e in errors)


def test_histogram_bins_half_open():
    edges, counts = ev.histogram([0.0, 0.24, 0.25, -0.3, 0.74], 0.25)
    assert list(counts) == [2, 2, 1]
    assert edges == pytest.approx([0, 0.25, 0.5, 0.75])


def test_accuracy_histogram_counts_misses_separately():
    recs = [rec(5.1, 5.0), rec(None, 5.0, miss=True), rec(4.6, 5.0)]
    r = ev.accuracy_histogram(recs, 0.25)
    assert r.hist_counts.sum() + r.misses == len(recs)
    assert r.misses == 1


# -- estimators ---------------------------------------------------------------------

def test_estimate_range_synthetic_echo():
    spacing = 1 / 160e6
    taps = np.zeros(256, complex)
    taps[20] = 1.0
    r = ev.estimate_range(Cir(taps, spacing), monostatic=True)
    assert r == pytest.approx(20 * spacing * SPEED_OF_LIGHT / 2)
    assert ev.estimate_range(Cir(taps, spacing), monostatic=False) == pytest.approx(2 * r)


def test_estimate_range_parabolic_between_taps():
    spacing = 1.0
    taps = np.zeros(64, complex)
    taps[9:12] = [0.5, 1.0, 0.5]
    k = ev.estimate_range(Cir(taps, spacing)) * 2 / SPEED_OF_LIGHT
    assert k == pytest.approx(10.0)
    taps[11] = 0.9
    assert 10.0 < ev.estimate_range(Cir(taps, spacing)) * 2 / SPEED_OF_LIGHT < 10.5


def test_estimate_range_noise_only_is_miss(rng):
    noise = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    assert ev.estimate_range(Cir(noise, 1e-9)) is None
    assert ev.estimate_range(Cir(np.zeros(16), 1e-9)) is None


def test_estimate_range_exclusion():
    taps = np.zeros(64, complex)
    taps[2], taps[30] = 10.0, 1.0
    assert ev.estimate_range(Cir(taps, 1.0), exclude_taps=5) == pytest.approx(30 * SPEED_OF_LIGHT / 2)


def synthetic_burst(v, fc=60e9, dt=0.5e-3, n=64, tap=7):
    out = []
    for i in range(n):
        taps = np.zeros(32, complex)
        # receding target: the round-trip phase falls with time
        taps[tap] = np.exp(-4j * np.pi * fc * v * i * dt / SPEED_OF_LIGHT)
        out.append(Cir(taps, 1e-9))
    return out


@pytest.mark.parametrize("v", [0.0, 0.5, -0.7, 1.0, 2.3])
def test_estimate_velocity_sign_and_value(v):
    est = ev.estimate_velocity(synthetic_burst(v), 60e9, 0.5e-3)
    assert est.velocity == pytest.approx(v, abs=0.02)
    assert est.range_tap == 7


def test_velocity_bin_width_and_nyquist():
    est = ev.estimate_velocity(synthetic_burst(0.0), 60e9, 0.5e-3)
    assert est.bin_width == pytest.approx(SPEED_OF_LIGHT / (2 * 60e9 * 64 * 0.5e-3))
    assert est.max_unambiguous == pytest.approx(SPEED_OF_LIGHT / (4 * 60e9 * 0.5e-3))
    assert ev.is_ambiguous(3.0, 60e9, 0.5e-3) and not ev.is_ambiguous(2.0, 60e9, 0.5e-3)


def test_notch_finds_mover_under_stronger_static_tap():
    burst = synthetic_burst(0.6)
    burst = [Cir(c.taps + np.eye(32)[2] * 5.0, c.tap_spacing) for c in burst]
    plain = ev.estimate_velocity(burst, 60e9, 0.5e-3)
    notched = ev.estimate_velocity(burst, 60e9, 0.5e-3, notch_bins=1)
    assert plain.range_tap == 2 and plain.velocity == pytest.approx(0.0, abs=1e-9)
    assert notched.range_tap == 7 and notched.velocity == pytest.approx(0.6, abs=0.02)
    with pytest.raises(ValueError):
        ev.estimate_velocity(burst[:8], 60e9, 0.5e-3, notch_bins=4)


def test_velocity_needs_uniform_spacing():
    burst = synthetic_burst(0.3, n=8)
    times = np.arange(8) * 0.5e-3
    ev.estimate_velocity(burst, 60e9, 0.5e-3, times)
    times[3] += 1e-5
    with pytest.raises(ValueError):
        ev.estimate_velocity(burst, 60e9, 0.5e-3, times)
    with pytest.raises(ValueError):
        ev.estimate_velocity(burst[:3], 60e9, 0.5e-3)


# -- pipeline --------------------------------------------------------------------------

def test_range_record_desk_target(rng):
    sc = desk_scenario(5.0)
    r = ev.range_record(sc, 0.0, rng, snr_db=30.0)
    assert not r.miss
    assert r.truth["range"] == pytest.approx(5.0)
    assert abs(r.estimated["range"] - 5.0) < 0.94


def test_bistatic_record_truth_is_path_length(rng):
    sc = desk_scenario(5.0, link=("AP", "STA1"))
    r = ev.range_record(sc, 0.0, rng, snr_db=30.0)
    want = 5.0 + math.hypot(5.0, 0.8)
    assert r.truth["range"] == pytest.approx(want)
    assert abs(r.estimated["range"] - want) < 0.94


def test_velocity_record_moving_target(rng):
    sc = desk_scenario(5.0, velocity=(0.4, 0.0, 0.0)).replace(band=DMG_2160)
    r, est = ev.velocity_record(sc, 0.0, 64, 0.5e-3, rng, snr_db=30.0)
    assert r.truth["velocity"] == pytest.approx(0.4)
    assert abs(r.estimated["velocity"] - 0.4) < 0.1


def test_accuracy_vs_snr_contract():
    sc = desk_scenario(4.0)
    rep = ev.accuracy_vs_snr(sc, [0, 30], 1, seed=3)
    assert rep.high_variance and rep.n_records == 2
    assert [p[0] for p in rep.curve] == [0.0, 30.0]
    with pytest.raises(ValueError):
        ev.accuracy_vs_snr(sc, [], 5)
    with pytest.raises(ValueError):
        ev.accuracy_vs_snr(sc, [10], 0)


def test_accuracy_vs_snr_deterministic():
    sc = desk_scenario(4.0)
    a = ev.accuracy_vs_snr(sc, [5, 20], 4, seed=9)
    b = ev.accuracy_vs_snr(sc, [5, 20], 4, seed=9)
    assert repr(a.curve) == repr(b.curve)


def test_static_target_histogram_single_bin():
    recs = ev.run_trajectory(desk_scenario(3.0), 6, 0.1, seed=2)
    r = ev.accuracy_histogram(recs, 0.25)
    assert r.misses == 0 and len(r.hist_counts) == 1 and r.hist_counts[0] == 6


def test_trajectory_follows_target():
    sc = desk_scenario(3.0, velocity=(1.0, 0.0, 0.0))
    recs = ev.run_trajectory(sc, 5, 0.2, seed=1)
    assert [r.truth["range"] for r in recs] == pytest.approx([3.0, 3.2, 3.4, 3.6, 3.8])
    with pytest.raises(ValueError):
        ev.run_trajectory(sc, 0, 0.1)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_living_room_curve_monotone_within_band(seed):
    sc = shipped("living_room")
    sc = sc.replace(scene=sc.scene.with_seed(stream_seed(seed, "channel")))
    rep = ev.accuracy_vs_snr(sc, [0, 5, 10, 13, 20, 30], 20, stream_seed(seed, "evaluation"))
    r = [p[1]["range"] for p in rep.curve]
    for lo, hi in zip(r, r[1:]):
        assert hi <= lo * 1.1


# -- quantizer benchmark and CSV -----------------------------------------------------

def test_quantizer_benchmark_rows():
    rows = ev.quantizer_benchmark(20, (6, 8), seed=4)
    assert [(r["scheme"], r["n_b"]) for r in rows] == [
        (s, b) for b in (6, 8) for s in ("legacy", "simplified", "pow2", "fractional")]
    by = {(r["scheme"], r["n_b"]): r["mse"] for r in rows}
    for s in ev.SCHEMES:
        assert by[(s, 8)] < by[(s, 6)]


def test_csv_writers(tmp_path):
    rep = ev.accuracy_vs_snr(desk_scenario(4.0), [10], 2, seed=1)
    ev.write_curve_csv(rep, tmp_path / "c.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["snr_db", "rmse_range_m", "rmse_vel_mps", "rmse_az_deg"]
    assert rows[1][0] == "10.0" and rows[1][2] == "nan"
    h = ev.accuracy_histogram([rec(5.1, 5.0), rec(5.3, 5.0)], 0.25)
    ev.write_hist_csv(h, tmp_path / "h.csv")
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["bin_lo", "bin_hi", "count"]
    assert sum(int(r[2]) for r in rows[1:]) == 2
