import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modfront.errors import ConfigError, InputTooShortError, ParameterError
from modfront.filterbank import (
    SincFilterBank,
    Waveform,
    hz_to_mel,
    mel_init,
    mel_to_hz,
    rectify,
    sinc_kernel,
    tf_decompose,
)

NFFT = 4096


def dft_db(g, nfft=NFFT):
    mag = np.abs(np.fft.rfft(g, nfft))
    return np.fft.rfftfreq(nfft), 20 * np.log10(mag / mag.max() + 1e-300)


cutoff_pairs = st.tuples(
    st.floats(0.0, 0.49, allow_nan=False), st.floats(1e-3, 0.5, allow_nan=False)
).map(lambda p: (min(p), max(p))).filter(lambda p: p[1] - p[0] > 1e-4)


# -- mel initialization -----------------------------------------------------


def test_mel_init_single_filter_spans_range():
    bank = mel_init(1, 16000, 0.0, 8000.0)
    np.testing.assert_allclose(bank.cutoffs_hz, [[0.0, 8000.0]])


def test_mel_init_80_edges_match_formula():
    bank = mel_init(80, 16000, 30.0, 8000.0)
    assert bank.num_filters == 80
    mels = np.linspace(2595 * np.log10(1 + 30 / 700), 2595 * np.log10(1 + 8000 / 700), 81)
    edges = 700 * (10 ** (mels / 2595) - 1)
    got = np.r_[bank.cutoffs_hz[:, 0], bank.cutoffs_hz[-1, 1]]
    np.testing.assert_allclose(got, edges, rtol=1e-12)
    assert got[0] == 30.0 and got[-1] == 8000.0
    # adjacent bands share an edge
    np.testing.assert_array_equal(bank.cutoffs[1:, 0], bank.cutoffs[:-1, 1])


def test_mel_roundtrip():
    f = np.linspace(0, 8000, 101)
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)


@pytest.mark.parametrize("f_min,f_max", [(100.0, 100.0), (500.0, 20.0), (0.0, 9000.0), (-1.0, 100.0)])
def test_mel_init_rejects_bad_range(f_min, f_max):
    with pytest.raises(ConfigError):
        mel_init(10, 16000, f_min, f_max)


def test_bank_validates_cutoffs():
    with pytest.raises(ParameterError):
        SincFilterBank(np.array([[0.2, 0.1]]))
    with pytest.raises(ParameterError):
        SincFilterBank(np.array([[0.1, 0.6]]))


# -- kernels ----------------------------------------------------------------


def test_identical_cutoffs_cancel():
    from modfront.filterbank import sinc_kernels

    np.testing.assert_array_equal(sinc_kernels([[0.1, 0.1]], 64, "none"), 0.0)
    with pytest.raises(ParameterError):
        sinc_kernel(0.1, 0.1, 64, "none")


def test_center_tap_is_twice_bandwidth():
    g = sinc_kernel(0.0, 0.25, 257, "none")
    assert g[128] == 0.5


def test_dft_passband_and_stopband():
    freqs, db = dft_db(sinc_kernel(0.05, 0.15, 256, "hamming"))
    inside = (freqs > 0.06) & (freqs < 0.14)
    outside = (freqs < 0.03) | (freqs > 0.17)
    assert db[inside].min() >= -3.0
    assert db[outside].max() <= -20.0


@given(cutoff_pairs, st.sampled_from([32, 255, 256]), st.sampled_from(["none", "hamming"]))
def test_kernel_symmetry(pair, n, window):
    g = sinc_kernel(pair[0], pair[1], n, window)
    np.testing.assert_allclose(g, g[::-1], atol=1e-12, rtol=0)


def test_kernel_symmetry_is_exact_for_default_geometry():
    g = sinc_kernel(0.0123, 0.2345)
    np.testing.assert_array_equal(g, g[::-1])


# -- decomposition ----------------------------------------------------------


def test_impulse_reproduces_reversed_kernels():
    bank = mel_init(8, 16000, 30.0, 8000.0, kernel_len=64, stride=1)
    # the impulse slides through every tap of the flipped kernel
    x = np.zeros(64 * 2 - 1)
    x[63] = 1.0
    tf = tf_decompose(Waveform(x, 16000), bank)
    np.testing.assert_array_equal(tf.values, bank.kernels())


def test_default_geometry_shape():
    bank = mel_init()
    x = Waveform(np.random.default_rng(0).standard_normal(80000), 16000)
    tf = tf_decompose(x, bank)
    assert tf.values.shape == (80, 7975)
    assert tf.frame_rate == 1600.0
    assert tf.num_bands == 80 and tf.num_frames == 7975


def test_too_short_input():
    with pytest.raises(InputTooShortError):
        tf_decompose(Waveform(np.ones(100), 16000), mel_init())


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_superposition(seed, a, b):
    rng = np.random.default_rng(seed)
    bank = mel_init(6, 4000, 20.0, 2000.0, kernel_len=32, stride=3)
    x1, x2 = rng.standard_normal((2, 300))
    lhs = tf_decompose(Waveform(a * x1 + b * x2, 4000), bank).values
    rhs = a * tf_decompose(Waveform(x1, 4000), bank).values + b * tf_decompose(Waveform(x2, 4000), bank).values
    scale = np.abs(lhs).max() + np.abs(rhs).max() + 1e-300
    assert np.abs(lhs - rhs).max() <= 1e-9 * scale


@given(st.integers(0, 2**32 - 1), st.integers(1, 17))
def test_stride_equivalence(seed, stride):
    rng = np.random.default_rng(seed)
    x = Waveform(rng.standard_normal(rng.integers(64, 400)), 16000)
    bank1 = mel_init(5, 16000, 30.0, 8000.0, kernel_len=64, stride=1)
    full = tf_decompose(x, bank1).values
    bank_s = SincFilterBank(bank1.cutoffs, 16000, 64, stride)
    strided = tf_decompose(x, bank_s).values
    np.testing.assert_array_equal(strided, full[:, ::stride])


def _row_rms_db(bank, freq_hz, seconds=0.5):
    sr = bank.sample_rate
    t = np.arange(int(seconds * sr)) / sr
    tf = tf_decompose(Waveform(np.cos(2 * np.pi * freq_hz * t), sr), bank)
    return 10 * np.log10(np.mean(tf.values**2, axis=1))


def test_tone_at_band_center_dominates():
    # 20 mel bands are all wider than the 256-tap resolution at 16 kHz
    bank = mel_init(20, 16000, 30.0, 8000.0)
    edges = bank.cutoffs_hz
    for k in [3, 8, 12, 19]:
        rms = _row_rms_db(bank, bank.centers_hz[k])
        center = bank.centers_hz[k]
        excluded = (edges[:, 1] < center - 0.5 * (edges[k, 1] - edges[k, 0])) | (
            edges[:, 0] > center + 0.5 * (edges[k, 1] - edges[k, 0]))
        excluded &= np.arange(20) != k
        assert rms[k] - rms[excluded].max() >= 10.0


@pytest.mark.parametrize("n_filters", [10, 20, 40])
def test_band_selectivity_argmax(n_filters):
    bank = mel_init(n_filters, 16000, 30.0, 8000.0)
    for k in range(n_filters):
        if (bank.cutoffs_hz[k, 1] - bank.cutoffs_hz[k, 0]) < 2 * 16000 / 256:
            continue  # narrower than the kernel can resolve
        assert np.argmax(_row_rms_db(bank, bank.centers_hz[k])) == k


# -- rectification ----------------------------------------------------------


def test_rectify_modes():
    np.testing.assert_array_equal(rectify(np.array([-1.0, 0.0, 2.0]), "relu"), [0, 0, 2])
    np.testing.assert_array_equal(rectify(np.array([-3.0, 0.5]), "abs_squared"), [9, 0.25])
    v = np.array([-1.5, np.pi])
    assert rectify(v, "none") is v


def test_rectify_map_keeps_metadata():
    bank = mel_init(4, 16000, 30.0, 8000.0, kernel_len=32, stride=4)
    tf = tf_decompose(Waveform(np.random.default_rng(3).standard_normal(200), 16000), bank)
    out = rectify(tf, "relu")
    assert out.frame_rate == tf.frame_rate
    assert out.values.min() >= 0
    with pytest.raises(ConfigError):
        rectify(tf, "tanh")
