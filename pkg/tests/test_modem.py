import numpy as np
import pytest

from otfs_sp._oracle import dft_matrix
from otfs_sp.exceptions import InvalidConfigError, InvalidInputError
from otfs_sp.modem import (
    QPSK_LABELS,
    QPSK_POINTS,
    ModemConfig,
    OTFSModulator,
    dd_to_time,
    decide_symbols,
    map_bits,
    superimpose,
    symbols_to_bits,
    time_to_dd,
    unvec,
    vec,
)

RNG = np.random.default_rng(7)


def crandn(*shape):
    return (RNG.standard_normal(shape) + 1j * RNG.standard_normal(shape)) / np.sqrt(2)


def test_gray_corner_symbols():
    assert map_bits([0, 0])[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    assert map_bits([1, 1])[0] == pytest.approx((-1 - 1j) / np.sqrt(2))


def test_random_bits_give_unit_modulus_symbols():
    s = map_bits(RNG.integers(0, 2, 8))
    assert s.shape == (4,)
    np.testing.assert_allclose(np.abs(s), 1.0, atol=1e-15)


def test_odd_bit_count_rejected():
    with pytest.raises(InvalidInputError):
        map_bits([0, 1, 1])


def test_gray_neighbours_differ_in_one_bit():
    for i, a in enumerate(QPSK_POINTS):
        dist = np.abs(QPSK_POINTS - a)
        nearest = np.where(np.isclose(dist, np.sort(dist)[1]))[0]
        for j in nearest:
            assert np.sum(QPSK_LABELS[i] != QPSK_LABELS[j]) == 1


def test_bits_round_trip():
    bits = RNG.integers(0, 2, 400)
    idx = np.argmin(np.abs(map_bits(bits)[:, None] - QPSK_POINTS[None]), axis=1)
    np.testing.assert_array_equal(symbols_to_bits(idx), bits)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        ModemConfig(M=1)
    with pytest.raises(InvalidConfigError):
        ModemConfig(constellation=2 * QPSK_POINTS)


def test_superimpose_limits_and_power():
    xd, xp = map_bits(RNG.integers(0, 2, 2 * 10_000)), map_bits(RNG.integers(0, 2, 2 * 10_000))
    np.testing.assert_allclose(superimpose(xd, xp, 1e-12), xd, rtol=1e-5)
    np.testing.assert_allclose(superimpose(np.zeros(4), xp[:4], 0.3), np.sqrt(0.3) * xp[:4])
    assert np.mean(np.abs(superimpose(xd, xp, 0.2)) ** 2) == pytest.approx(1.0, rel=0.02)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(InvalidInputError):
            superimpose(xd, xp, bad)


def test_dd_to_time_single_impulse():
    X = np.zeros((8, 4), complex)
    X[0, 0] = 1
    x = dd_to_time(X)
    expected = np.zeros(32)
    expected[::8] = 0.5
    np.testing.assert_allclose(x, expected, atol=1e-15)


def test_dd_to_time_matches_kronecker_oracle():
    M, N = 8, 4
    X = crandn(M, N)
    dense = np.kron(dft_matrix(N).conj().T.T, np.eye(M))  # (F_N^H)^T kron I_M
    np.testing.assert_allclose(dd_to_time(X), dense @ vec(X), atol=1e-10)


def test_transform_pair_is_unitary_and_inverse():
    X = crandn(16, 8)
    x = dd_to_time(X)
    assert np.linalg.norm(x) == pytest.approx(np.linalg.norm(X), abs=1e-12)
    np.testing.assert_allclose(time_to_dd(x, 16, 8), X, atol=1e-12)
    np.testing.assert_array_equal(time_to_dd(np.zeros(128), 16, 8), 0)
    np.testing.assert_array_equal(unvec(vec(X), 16, 8), X)


def test_all_ones_time_signal():
    M, N = 8, 4
    X = time_to_dd(np.ones(M * N), M, N)
    expected = np.zeros((M, N))
    expected[:, 0] = np.sqrt(N)
    np.testing.assert_allclose(X, expected, atol=1e-12)


def test_decisions_and_tie_break():
    sym, bits = decide_symbols(np.array([[1.0, 0, 0, 0], [0.25] * 4]))
    np.testing.assert_array_equal(sym, QPSK_POINTS[[0, 0]])
    np.testing.assert_array_equal(bits, [0, 0, 0, 0])
    with pytest.raises(InvalidInputError):
        decide_symbols(np.ones((2, 3)))


def test_modulator_estimator():
    mod = OTFSModulator(M=8, N=4).fit()
    X = crandn(3, 32)
    out = mod.transform(X)
    for row, x in zip(out, X):
        np.testing.assert_allclose(row, dd_to_time(unvec(x, 8, 4)), atol=1e-12)
    np.testing.assert_allclose(mod.inverse_transform(out), X, atol=1e-12)
    assert mod.get_params() == {"M": 8, "N": 4}
    with pytest.raises(InvalidInputError):
        mod.transform(np.zeros(10))
