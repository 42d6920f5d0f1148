import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wlansense.sequences import (GOLAY_BLOCK, SEED_7, SEED_8, SYNC_LENGTH, SYNC_MATRIX, ChipSequence,
                                 GolaySeed, aperiodic_xcorr, base_pair, build_ce, build_sync, concat,
                                 correlation_summary, golay_pair, max_sidelobe, max_xcorr, sync_family,
                                 sync_matrix, xcorr_lags)

# Cross-group all-lag maximum |xcorr| of the Sync family, frozen as a regression constant.
SYNC_CROSS_GROUP_MAX = 256


def brute_xcorr(a, b):
    """Independent direct-sum oracle for sum_n a[n+k] conj(b[n])."""
    a, b = list(a), list(b)
    out = []
    for k in range(-(len(b) - 1), len(a)):
        out.append(sum(a[n + k] * np.conj(b[n]) for n in range(len(b)) if 0 <= n + k < len(a)))
    return np.array(out)


def test_golay_length_and_binary():
    ga, gb = golay_pair(7, SEED_7)
    assert len(ga) == len(gb) == 128
    assert ga.is_binary and gb.is_binary


def test_complementary_small_case():
    ga, gb = golay_pair(1, GolaySeed((0,), (1,)))
    assert list(ga.chips) == [1, 1] and list(gb.chips) == [1, -1]
    s = aperiodic_xcorr(ga, ga) + aperiodic_xcorr(gb, gb)
    assert list(s) == [0, 4, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_complementary_property(n_exp, seed):
    s = GolaySeed.random(n_exp, np.random.default_rng(seed))
    ga, gb = golay_pair(n_exp, s)
    tot = aperiodic_xcorr(ga, ga) + aperiodic_xcorr(gb, gb)
    expect = np.zeros(2 * (1 << n_exp) - 1, dtype=np.int64)
    expect[(1 << n_exp) - 1] = 2 << n_exp
    assert np.array_equal(tot, expect)


def test_seed_validation():
    with pytest.raises(ValueError):
        GolaySeed((0, 0), (1, 1))
    with pytest.raises(ValueError):
        GolaySeed((0, 1), (1, 2))
    with pytest.raises(ValueError):
        golay_pair(3, SEED_7)


def test_ce_structure():
    ce0, ce1 = build_ce("CE0"), build_ce("CE1")
    ga, gb = base_pair(7)
    assert len(ce0) == len(ce1) == 1024
    assert np.array_equal(ce0.chips[128:256], -gb.chips)
    assert np.array_equal(ce0.chips[:128], ga.chips)
    assert not np.array_equal(ce0.chips, ce1.chips)
    assert aperiodic_xcorr(ce0, ce0)[1023] == 1024
    with pytest.raises(ValueError):
        build_ce("CE2")


def test_pairs_orthogonal_at_zero_lag():
    a7, b7 = base_pair(7)
    a8, b8 = base_pair(8)
    assert int(a7.chips @ a8.chips + b7.chips @ b8.chips) == 0


def test_sync_matrix_shape_and_rows():
    m = sync_matrix()
    assert m.shape == (8, 8) and set(np.unique(m)) == {-1, 1}
    m[0, 0] = 7
    assert SYNC_MATRIX[0, 0] == 1


def test_sync_peak_and_length():
    for r in range(1, 9):
        s = build_sync(r)
        assert len(s) == SYNC_LENGTH and s.is_binary
        assert np.abs(aperiodic_xcorr(s, s)).max() == 1024


def test_sync_aligned_lag_zero_within_groups():
    fam = sync_family()
    for g in ((0, 1, 2, 3), (4, 5, 6, 7)):
        for i in g:
            for j in g:
                if i != j:
                    assert aperiodic_xcorr(fam[i], fam[j])[SYNC_LENGTH - 1] == 0


def test_sync_cross_group_regression():
    fam = sync_family()
    got = max(max_xcorr(fam[i], fam[j]) for i in range(4) for j in range(4, 8))
    assert got == SYNC_CROSS_GROUP_MAX


def test_sync_row_bounds():
    with pytest.raises(ValueError):
        build_sync(0)
    with pytest.raises(ValueError):
        build_sync(9)


def test_xcorr_matches_oracle(rng):
    a = ChipSequence(rng.standard_normal(17) + 1j * rng.standard_normal(17))
    b = ChipSequence(rng.standard_normal(9) + 1j * rng.standard_normal(9))
    assert np.allclose(aperiodic_xcorr(a, b), brute_xcorr(a.chips, b.chips))
    assert len(xcorr_lags(a, b)) == 25


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=40),
       st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=40))
def test_xcorr_integer_exact(a, b):
    A, B = ChipSequence(np.array(a)), ChipSequence(np.array(b))
    got = aperiodic_xcorr(A, B)
    assert got.dtype.kind == "i"
    assert np.array_equal(got, brute_xcorr(a, b).astype(int))
    # symmetry: R_ab(k) = conj R_ba(-k)
    assert np.array_equal(got, aperiodic_xcorr(B, A)[::-1])


def test_chip_rate_mismatch():
    with pytest.raises(ValueError):
        aperiodic_xcorr(ChipSequence(np.ones(3), 1.0), ChipSequence(np.ones(3), 2.0))


def test_summary_matrix():
    fam = sync_family()
    m = correlation_summary(fam)
    assert m.shape == (8, 8)
    assert np.allclose(m, m.T)
    assert np.allclose(np.diag(m), [max_sidelobe(s) for s in fam])


def test_concat_and_csv(tmp_path):
    s = concat([ChipSequence(np.array([1, -1])), ChipSequence(np.array([1]))])
    assert list(s.chips) == [1, -1, 1]
    s.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines() == ["real,imag", "1,0", "-1,0", "1,0"]


def test_chips_read_only():
    ga, _ = base_pair(7)
    with pytest.raises(ValueError):
        ga.chips[0] = 5


def test_block_size():
    assert GOLAY_BLOCK * 8 == SYNC_LENGTH
    assert len(SEED_8) == 7
