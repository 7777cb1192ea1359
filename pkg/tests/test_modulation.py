import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modfront.errors import ConfigError, InputTooShortError
from modfront.filterbank import SincFilterBank, TimeFrequencyMap, Waveform, rectify, tf_decompose
from modfront.modulation import (
    ModulationLayer,
    freq_response,
    hamming_fir_init,
    hamming_slots,
    instance_norm,
    linear_sinc_init,
    max_pool_baseline,
    mod_filter,
    weight_norm,
)


def tfmap(values, frame_rate=1600.0):
    values = np.asarray(values, dtype=np.float64)
    return TimeFrequencyMap(values, frame_rate, np.zeros((values.shape[0], 2)))


# -- initializers -----------------------------------------------------------


def test_hamming_slots_128():
    width, starts = hamming_slots(128)
    assert width == 25
    assert starts == [0, 26, 51, 77, 102]


def test_hamming_init_five_filters():
    taps = hamming_fir_init(5, 128)
    width, starts = hamming_slots(128)
    for m, s in enumerate(starts):
        np.testing.assert_array_equal(taps[m, s : s + width], np.hamming(25))
        assert np.count_nonzero(taps[m]) == np.count_nonzero(np.hamming(25))
        assert taps[m, :s].sum() == 0 and taps[m, s + width :].sum() == 0
    assert np.flatnonzero(taps[0])[0] == 0
    assert np.flatnonzero(taps[4])[0] == 102


def test_hamming_slots_do_not_overlap():
    for n in range(10, 300):
        width, starts = hamming_slots(n)
        assert all(b - a >= width for a, b in zip(starts, starts[1:]))
        assert starts[-1] + width <= n


def test_hamming_init_single_and_cycling():
    np.testing.assert_array_equal(hamming_fir_init(1, 128)[0], hamming_fir_init(5, 128)[0])
    taps = hamming_fir_init(20, 128)
    np.testing.assert_array_equal(taps[0:5], taps[5:10])
    np.testing.assert_array_equal(taps[0:5], taps[15:20])


def test_hamming_init_rejects_short_kernel():
    with pytest.raises(ConfigError):
        hamming_fir_init(5, 9)


def test_linear_sinc_init():
    cut = linear_sinc_init(20, 1600.0, 0.0, 800.0) * 1600.0
    np.testing.assert_allclose(cut[:, 0], np.arange(0, 800, 40), atol=1e-9)
    np.testing.assert_allclose(cut[:, 1], np.arange(40, 801, 40), atol=1e-9)
    np.testing.assert_allclose(cut.mean(axis=1), np.arange(20, 800, 40), atol=1e-9)
    widths = np.diff(linear_sinc_init(5, 1600.0, 0.0, 800.0) * 1600.0, axis=1)
    np.testing.assert_allclose(widths, 160.0)


@pytest.mark.parametrize("lo,hi", [(100.0, 100.0), (0.0, 900.0), (-5.0, 100.0)])
def test_linear_sinc_init_rejects_bad_range(lo, hi):
    with pytest.raises(ConfigError):
        linear_sinc_init(4, 1600.0, lo, hi)


# -- filtering --------------------------------------------------------------


def test_last_tap_impulse_is_shift():
    taps = np.zeros((1, 8))
    taps[0, -1] = 1.0
    layer = ModulationLayer("fir", 1, 8, 1, fir_taps=taps)
    y = np.random.default_rng(0).standard_normal((3, 40))
    out = mod_filter(tfmap(y), layer).values
    # convolution flips the kernel: the last tap meets the first sample of each window
    np.testing.assert_array_equal(out[0], y[:, : 40 - 7])


def test_default_output_length():
    layer = ModulationLayer()
    out = mod_filter(tfmap(np.zeros((2, 7975))), layer)
    assert out.values.shape == (20, 2, 50)
    assert out.frame_rate_out == 10.0


def test_too_short_map():
    with pytest.raises(InputTooShortError):
        mod_filter(tfmap(np.zeros((2, 100))), ModulationLayer())
    with pytest.raises(InputTooShortError):
        max_pool_baseline(tfmap(np.zeros((2, 100))))


def test_am_noise_selects_matching_rate():
    rng = np.random.default_rng(7)
    sr = 16000
    t = np.arange(5 * sr) / sr
    x = 0.25 * rng.standard_normal(t.size) * (1 + 0.9 * np.cos(2 * np.pi * 40 * t))
    # narrow noise band; squaring keeps the 2*fc product (aliased to 800 Hz) out of both filters
    bank = SincFilterBank(np.array([[1150.0, 1250.0]]) / sr, sr, 256, 10)
    tf = rectify(tf_decompose(Waveform(x, sr), bank, fast=True), "abs_squared")
    layer = ModulationLayer("sinc", 2, 128, 160, mod_cutoffs=np.array([[30, 50], [300, 400]]) / 1600)
    out = mod_filter(tf, layer, fast=True).values
    energy_db = 10 * np.log10((out**2).sum(axis=(1, 2)))
    assert energy_db[0] - energy_db[1] >= 10.0


def test_sinc_variant_equals_fir_on_materialized_taps():
    rng = np.random.default_rng(2)
    cut = np.sort(rng.uniform(0, 0.5, (6, 2)), axis=1)
    sinc = ModulationLayer("sinc", 6, 32, 7, mod_cutoffs=cut)
    fir = ModulationLayer("fir", 6, 32, 7, fir_taps=sinc.taps())
    y = tfmap(rng.standard_normal((5, 300)))
    np.testing.assert_array_equal(mod_filter(y, sinc).values, mod_filter(y, fir).values)


@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_mod_stride_equivalence(seed, stride):
    rng = np.random.default_rng(seed)
    taps = rng.standard_normal((3, 16))
    y = tfmap(rng.standard_normal((4, int(rng.integers(16, 200)))))
    one = mod_filter(y, ModulationLayer("fir", 3, 16, 1, fir_taps=taps)).values
    s = mod_filter(y, ModulationLayer("fir", 3, 16, stride, fir_taps=taps)).values
    np.testing.assert_array_equal(s, one[..., ::stride])


@given(st.integers(0, 2**32 - 1))
def test_band_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    layer = ModulationLayer("sinc", 4, 16, 5, mod_cutoffs=linear_sinc_init(4, 100.0))
    y = rng.standard_normal((7, 120))
    perm = rng.permutation(7)
    out = mod_filter(tfmap(y), layer).values
    out_p = mod_filter(tfmap(y[perm]), layer).values
    np.testing.assert_array_equal(out_p, out[:, perm])


# -- normalization ----------------------------------------------------------


def test_instance_norm_constant_channel():
    v = np.full((2, 3, 4), 5.0)
    v[1] = np.arange(12).reshape(3, 4)
    out = instance_norm(v)
    np.testing.assert_array_equal(out[0], 0.0)


def test_instance_norm_two_points():
    out = instance_norm(np.array([[0.0, 2.0]]), 1e-5)
    np.testing.assert_allclose(out, [[-1.0, 1.0]], rtol=1e-5)


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 1e3))
def test_instance_norm_statistics(seed, scale):
    rng = np.random.default_rng(seed)
    v = scale * rng.standard_normal((4, 6, 9)) + rng.normal(0, 10, (4, 1, 1))
    out = instance_norm(v)
    mean = out.mean(axis=(1, 2))
    var = out.var(axis=(1, 2))
    assert np.abs(mean).max() <= 1e-9
    assert np.abs(var - 1).max() <= 1e-4


def test_instance_norm_rejects_bad_epsilon():
    with pytest.raises(ConfigError):
        instance_norm(np.ones((1, 2)), 0.0)


def test_weight_norm_examples():
    np.testing.assert_allclose(weight_norm(np.array([[3.0, 4.0]])), [[0.6, 0.8]], rtol=1e-15)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out, flags = weight_norm(np.array([[0.0, 0.0], [1.0, 0.0]]), return_flags=True)
    assert caught
    np.testing.assert_array_equal(out[0], 0.0)
    np.testing.assert_array_equal(flags, [True, False])


@given(st.integers(0, 2**32 - 1))
def test_weight_norm_idempotent(seed):
    taps = np.random.default_rng(seed).standard_normal((5, 12)) * 10
    once = weight_norm(taps)
    np.testing.assert_allclose(weight_norm(once), once, atol=1e-12, rtol=0)


# -- max pooling ------------------------------------------------------------


def test_max_pool_default_shape():
    out = max_pool_baseline(tfmap(np.zeros((80, 7975))), 128, 128)
    assert out.values.shape == (1, 80, 62)


def test_max_pool_constant_and_monotone():
    np.testing.assert_array_equal(max_pool_baseline(tfmap(np.full((2, 50), 3.5)), 8, 4).values, 3.5)
    row = np.cumsum(np.random.default_rng(0).uniform(0, 1, 60))[None]
    out = max_pool_baseline(tfmap(row), 10, 7).values[0, 0]
    np.testing.assert_array_equal(out, row[0, 9::7][: out.size])


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12))
def test_max_pool_commutes_with_relu(seed, kernel, stride):
    y = np.random.default_rng(seed).standard_normal((3, 40))
    a = max_pool_baseline(tfmap(np.maximum(y, 0)), kernel, stride).values
    b = np.maximum(max_pool_baseline(tfmap(y), kernel, stride).values, 0)
    np.testing.assert_array_equal(a, b)


# -- frequency response -----------------------------------------------------


def test_impulse_response_is_flat():
    taps = np.zeros(128)
    taps[0] = 1.0
    freqs, db = freq_response(taps, 512, 1600.0)
    assert freqs[0] == 0 and freqs[-1] == 800.0
    np.testing.assert_allclose(db, 0.0, atol=1e-12)


def test_moving_average_first_null():
    n_points = 1025
    freqs, db = freq_response(np.ones(128), n_points, 1600.0)
    null_hz = 1600.0 / 128
    k = int(np.argmin(np.abs(freqs - null_hz)))
    assert freqs[k] == pytest.approx(null_hz)
    assert db[k] < -200
    assert np.all(db[freqs < null_hz - 1] > -60)


@pytest.mark.parametrize("pair", [(0.05, 0.1), (0.2, 0.3), (0.0, 0.05), (0.3, 0.45)])
def test_sinc_response_peaks_in_band(pair):
    freqs, db = freq_response(np.array(pair), 2048, 1600.0, 128)
    peak = freqs[np.argmax(db)] / 1600.0
    assert pair[0] <= peak <= pair[1]


def test_freq_response_needs_64_points():
    with pytest.raises(ConfigError):
        freq_response(np.ones(4), 32)
