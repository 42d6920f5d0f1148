import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wlansense.channel import (SUB7_160, SUB7_20, BandConfig, Clutter, Directional, MovingTarget,
                               Scatterer, Scene, Sta, advance, cfr_at, clutter_taps, noisy_cfr,
                               path_gain, paths, radial_velocity, random_multipath_cfr, snr_at,
                               target_azimuth, target_range, targets_at)

C = 299_792_458.0


def scene(target_at=(6.0, 5.0, 1.5), velocity=(0.0, 0.0, 0.0), **kw):
    stas = (Sta("A", (1.0, 5.0, 1.5)), Sta("B", (9.0, 5.0, 1.5)))
    return Scene((20.0, 10.0, 3.0), stas, (MovingTarget(target_at, velocity),), **kw)


def test_band_presets():
    assert SUB7_160.subcarrier_spacing == 312.5e3
    assert SUB7_160.tap_spacing == pytest.approx(6.25e-9)
    assert not SUB7_160.is_dmg
    assert SUB7_20.n_subcarriers == 64


def test_monostatic_r4_law():
    s1, s2 = scene((6.0, 5.0, 1.5)), scene((11.0, 5.0, 1.5))
    d = snr_at(s1, SUB7_160, "A", "A", 20) - snr_at(s2, SUB7_160, "A", "A", 20)
    assert d == pytest.approx(40 * math.log10(2))


def test_los_doubling_costs_6db():
    stas = (Sta("A", (1.0, 1.0, 1.0)), Sta("B", (3.0, 1.0, 1.0)), Sta("C", (5.0, 1.0, 1.0)))
    sc = Scene((10.0, 5.0, 3.0), stas)
    d = snr_at(sc, SUB7_160, "A", "B", 20, "los") - snr_at(sc, SUB7_160, "A", "C", 20, "los")
    assert d == pytest.approx(20 * math.log10(2))


def test_presence_threshold_calibration():
    # the default noise floor puts a 1 m² target at 10-15 m in the 10-13 dB band
    snr = {r: snr_at(scene((1.0 + r, 5.0, 1.5)), SUB7_160, "A", "A", 20) for r in (11, 13)}
    assert snr[11] == pytest.approx(13.0, abs=0.1)
    assert 9.9 <= snr[13] <= 10.5


def test_single_ray_phase_and_reciprocity():
    sc = scene(clutter=Clutter(n_taps=0))
    band = SUB7_160
    H = cfr_at(sc, band, "A", "B", include={"los"})
    tau = 8.0 / C
    g = band.wavelength / (4 * math.pi * 8.0)
    f = band.subcarrier_freqs()
    assert np.allclose(H.h, g * np.exp(-2j * np.pi * f * tau))
    assert np.allclose(cfr_at(sc, band, "A", "B").h, cfr_at(sc, band, "B", "A").h, atol=1e-18)


def test_doppler_phase_rotation():
    sc = scene(velocity=(1.0, 0.0, 0.0), clutter=Clutter(n_taps=0))
    band = SUB7_160
    h0 = cfr_at(sc, band, "A", "A", 0.0, include={"targets"}).h
    h1 = cfr_at(sc, band, "A", "A", 1e-3, include={"targets"}).h
    # receding at 1 m/s adds 2 mm of round trip: the carrier phase falls
    dphi = np.angle(h1[band.n_subcarriers // 2] / h0[band.n_subcarriers // 2])
    assert dphi == pytest.approx(-2 * np.pi * 2e-3 / band.wavelength, rel=1e-6)
    assert radial_velocity(sc, "A") == pytest.approx(1.0)


def test_elastic_wall_reflection():
    sc = scene((19.5, 5.0, 1.5), velocity=(1.0, 0.0, 0.0))
    moved = advance(sc, 1.0)
    assert moved.targets[0].position[0] == pytest.approx(19.5)
    assert moved.targets[0].velocity[0] == -1.0
    assert moved.time == 1.0
    assert targets_at(sc, 1.0) == moved.targets
    with pytest.raises(ValueError):
        advance(sc, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 30))
def test_targets_stay_inside(vx, vy, dt):
    sc = scene((10.0, 5.0, 1.5), velocity=(vx, vy, 0.0))
    assert sc.inside(advance(sc, dt).targets[0].position)


def test_positions_validated():
    with pytest.raises(ValueError):
        Scene((5.0, 5.0, 3.0), (Sta("A", (6.0, 1.0, 1.0)),))
    with pytest.raises(ValueError):
        Scene((5.0, 5.0, 3.0), (Sta("A", (1.0, 1.0, 1.0)), Sta("A", (2.0, 1.0, 1.0))))


def test_clutter_ar1_statistics():
    sc = scene(clutter=Clutter(ar_coefficient=0.9, n_taps=4))
    x = sc._process.series((0, 0), 4000)
    r = np.mean(x[1:] * np.conj(x[:-1])).real / np.mean(np.abs(x) ** 2)
    assert r == pytest.approx(0.9, abs=0.03)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, rel=0.15)


def test_clutter_is_query_order_independent():
    a = scene(clutter=Clutter(n_taps=4), seed=5)
    b = scene(clutter=Clutter(n_taps=4), seed=5)
    late = clutter_taps(a, "A", "B", 2.5)
    clutter_taps(b, "A", "B", 0.1)
    assert np.array_equal(clutter_taps(b, "A", "B", 2.5), late)
    assert not np.array_equal(clutter_taps(a.with_seed(6), "A", "B", 2.5), late)


def test_directional_pattern():
    d = Directional(0.0, 60.0)
    assert d.power_gain(0.0) == pytest.approx(1.0)
    assert d.power_gain(30.0) == pytest.approx(0.5)
    assert d.power_gain(180.0) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        Directional(0.0, 200.0)


def test_directional_sta_gain_applies():
    iso = scene()
    stas = (Sta("A", (1.0, 5.0, 1.5), Directional(180.0, 30.0)), iso.stas[1])
    away = Scene(iso.room, stas, iso.targets)
    assert path_gain(away, SUB7_160, "A", "A") == pytest.approx(path_gain(iso, SUB7_160, "A", "A") * 0.01)


def test_truth_helpers():
    sc = scene((4.0, 9.0, 1.5))
    assert target_range(sc, "A") == pytest.approx(5.0)
    assert target_azimuth(sc, "A") == pytest.approx(math.degrees(math.atan2(4, 3)))


def test_noise_power(rng):
    sc = scene(clutter=Clutter(n_taps=0))
    band = BandConfig(5.8e9, 160e6, 4096, 16e-6)
    clean = cfr_at(sc, band, "A", "B")
    noisy = noisy_cfr(sc, band, "A", "B", 20.0, rng)
    p = np.mean(np.abs(noisy.h - clean.h) ** 2)
    assert 10 * math.log10(p) == pytest.approx(-93.4 - 20.0, abs=0.2)


def test_paths_kinds():
    sc = Scene((10.0, 10.0, 3.0), (Sta("A", (1.0, 1.0, 1.0)), Sta("B", (2.0, 1.0, 1.0))),
               (MovingTarget((5.0, 5.0, 1.0), (0.0, 0.0, 0.0)),), (Scatterer((3.0, 3.0, 1.0), 2.0),))
    kinds = [p.kind for p in paths(sc, SUB7_160, "A", "B")]
    assert kinds == ["los", "scatterer", "target"]
    assert [p.kind for p in paths(sc, SUB7_160, "A", "A")] == ["scatterer", "target"]


def test_random_multipath_cfr_is_fixed_point():
    H = random_multipath_cfr(np.random.default_rng(0), 128)
    peak = max(np.abs(H.h.real).max(), np.abs(H.h.imag).max())
    assert 1024 <= peak <= 2047
    assert np.all(H.h.real == np.round(H.h.real))
