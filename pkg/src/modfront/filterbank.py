"""Sinc band-pass filter bank and the strided time-frequency decomposition.

Cutoffs are stored as normalized frequencies (cycles/sample, Nyquist = 0.5)
and converted to Hz only at the API boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, InputTooShortError, ParameterError

WindowKind = Literal["none", "hamming"]
RectifyMode = Literal["relu", "abs_squared", "none"]

WINDOWS = ("none", "hamming")
RECTIFY_MODES = ("relu", "abs_squared", "none")


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ConfigError("waveform must be a non-empty 1-D sample sequence")
        if not self.sample_rate > 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class SincFilterBank:
    """K learnable band-pass filters, each defined by a (f1, f2) cutoff pair."""

    cutoffs: np.ndarray
    sample_rate: int = 16000
    kernel_len: int = 256
    stride: int = 10
    window: WindowKind = "hamming"

    def __post_init__(self):
        cutoffs = np.array(self.cutoffs, dtype=np.float64).reshape(-1, 2)
        check_cutoffs(cutoffs)
        if self.kernel_len < 2:
            raise ConfigError(f"kernel_len must be >= 2, got {self.kernel_len}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.window not in WINDOWS:
            raise ConfigError(f"unknown window {self.window!r}")
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate must be positive")
        cutoffs.setflags(write=False)
        object.__setattr__(self, "cutoffs", cutoffs)

    @property
    def num_filters(self) -> int:
        return self.cutoffs.shape[0]

    @property
    def cutoffs_hz(self) -> np.ndarray:
        return self.cutoffs * self.sample_rate

    @property
    def centers_hz(self) -> np.ndarray:
        return self.cutoffs_hz.mean(axis=1)

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.stride

    def kernels(self) -> np.ndarray:
        """Materialized (K, kernel_len) impulse responses."""
        return sinc_kernels(self.cutoffs, self.kernel_len, self.window)

    def with_cutoffs(self, cutoffs) -> "SincFilterBank":
        return replace(self, cutoffs=cutoffs)


@dataclass(frozen=True, eq=False)
class TimeFrequencyMap:
    values: np.ndarray  # (K, T)
    frame_rate: float
    band_meta: np.ndarray = field(default=None)  # (K, 2) cutoffs in Hz

    @property
    def num_bands(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


def check_cutoffs(cutoffs: np.ndarray) -> None:
    f1, f2 = cutoffs[:, 0], cutoffs[:, 1]
    if not np.all(np.isfinite(cutoffs)):
        raise ParameterError("cutoffs must be finite")
    if np.any(f1 < 0) or np.any(f2 > 0.5) or np.any(f1 >= f2):
        bad = np.flatnonzero((f1 < 0) | (f2 > 0.5) | (f1 >= f2))
        raise ParameterError(
            f"cutoffs must satisfy 0 <= f1 < f2 <= 0.5; violated by filters {bad.tolist()}"
        )


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_edges(num_filters: int, f_min: float, f_max: float) -> np.ndarray:
    """num_filters + 1 band edges in Hz, equally spaced on the mel scale."""
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), num_filters + 1))
    edges[0], edges[-1] = f_min, f_max
    return edges


def mel_init(
    num_filters: int = 80,
    sample_rate: int = 16000,
    f_min: float = 30.0,
    f_max: float | None = None,
    kernel_len: int = 256,
    stride: int = 10,
    window: WindowKind = "hamming",
) -> SincFilterBank:
    """Bank of adjacent band-pass filters with mel-spaced edges.

    Filter ``k`` spans ``[edge_k, edge_{k+1}]``, so neighbouring filters share
    one edge.
    """
    nyquist = sample_rate / 2
    if f_max is None:
        f_max = nyquist
    if num_filters < 1:
        raise ConfigError(f"num_filters must be >= 1, got {num_filters}")
    if not (0 <= f_min < f_max <= nyquist):
        raise ConfigError(
            f"need 0 <= f_min < f_max <= Nyquist ({nyquist} Hz); got f_min={f_min}, f_max={f_max}"
        )
    edges = np.minimum(mel_edges(num_filters, f_min, f_max) / sample_rate, 0.5)
    cutoffs = np.stack([edges[:-1], edges[1:]], axis=1)
    return SincFilterBank(cutoffs, sample_rate, kernel_len, stride, window)


def centered_index(kernel_len: int) -> np.ndarray:
    # half-integer offsets for even lengths keep the kernel exactly symmetric
    return np.arange(kernel_len, dtype=np.float64) - (kernel_len - 1) / 2.0


def window_taps(kernel_len: int, window: WindowKind = "hamming") -> np.ndarray:
    if window == "none":
        return np.ones(kernel_len)
    if window == "hamming":
        # written in terms of the centered index so w[n] == w[N-1-n] bitwise
        n = centered_index(kernel_len)
        return 0.54 + 0.46 * np.cos(2.0 * np.pi * n / (kernel_len - 1))
    raise ConfigError(f"unknown window {window!r}")


def sinc_kernels(cutoffs, kernel_len: int, window: WindowKind = "hamming") -> np.ndarray:
    """Band-pass kernels ``2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n)``, one per row.

    ``np.sinc`` is the normalized sinc, so ``sinc(2 pi f n)`` (unnormalized)
    is ``np.sinc(2 f n)``.
    """
    cutoffs = np.asarray(cutoffs, dtype=np.float64).reshape(-1, 2)
    n = centered_index(kernel_len)
    f1 = cutoffs[:, :1]
    f2 = cutoffs[:, 1:]
    g = 2.0 * f2 * np.sinc(2.0 * f2 * n) - 2.0 * f1 * np.sinc(2.0 * f1 * n)
    return g * window_taps(kernel_len, window)


def sinc_kernel_grads(cutoffs, kernel_len: int, window: WindowKind = "hamming"):
    """Partial derivatives of :func:`sinc_kernels` w.r.t. f1 and f2, each (K, N)."""
    cutoffs = np.asarray(cutoffs, dtype=np.float64).reshape(-1, 2)
    n = centered_index(kernel_len)
    w = window_taps(kernel_len, window)
    d_f1 = -2.0 * np.cos(2.0 * np.pi * cutoffs[:, :1] * n) * w
    d_f2 = 2.0 * np.cos(2.0 * np.pi * cutoffs[:, 1:] * n) * w
    return d_f1, d_f2


def sinc_kernel(f1: float, f2: float, kernel_len: int = 256, window: WindowKind = "hamming"):
    if not (0 <= f1 < f2 <= 0.5):
        raise ParameterError(f"need 0 <= f1 < f2 <= 0.5, got f1={f1}, f2={f2}")
    return sinc_kernels([[f1, f2]], kernel_len, window)[0]


def num_frames(length: int, kernel_len: int, stride: int) -> int:
    return (length - kernel_len) // stride + 1


def frames(x: np.ndarray, kernel_len: int, stride: int) -> np.ndarray:
    """Strided view ``(..., T, kernel_len)`` over the last axis of ``x`` (no copy)."""
    if x.shape[-1] < kernel_len:
        raise InputTooShortError(
            f"input of length {x.shape[-1]} is shorter than the kernel ({kernel_len})"
        )
    return sliding_window_view(x, kernel_len, axis=-1)[..., ::stride, :]


def strided_convolve(x: np.ndarray, kernels: np.ndarray, stride: int, fast: bool = False):
    """Valid-mode strided convolution of every row of ``x`` with every kernel.

    ``x`` has shape ``(..., L)`` and ``kernels`` ``(F, N)``; the result has
    shape ``(F, ..., T)``.  The default path reduces each output in a fixed
    order, so subsampling a stride-1 result reproduces a strided call bit for
    bit.  ``fast=True`` routes through BLAS, which is quicker but whose
    rounding depends on the matrix shape.
    """
    fr = frames(x, kernels.shape[1], stride)
    flipped = kernels[:, ::-1]
    if fast:
        return np.moveaxis(np.tensordot(fr, flipped, axes=([-1], [1])), -1, 0)
    return np.einsum("...tn,fn->f...t", fr, flipped)


def tf_decompose(x: Waveform, bank: SincFilterBank, fast: bool = False) -> TimeFrequencyMap:
    """Filter the waveform with every band of ``bank``, keeping every stride-th sample."""
    if x.samples.size < bank.kernel_len:
        raise InputTooShortError(
            f"waveform has {x.samples.size} samples, kernel needs {bank.kernel_len}"
        )
    values = strided_convolve(x.samples, bank.kernels(), bank.stride, fast=fast)
    return TimeFrequencyMap(values, x.sample_rate / bank.stride, bank.cutoffs * x.sample_rate)


def rectify_values(v: np.ndarray, mode: RectifyMode) -> np.ndarray:
    if mode == "relu":
        return np.maximum(v, 0.0)
    if mode == "abs_squared":
        return v * v
    if mode == "none":
        return v
    raise ConfigError(f"unknown nonlinearity {mode!r}")


def rectify_grad(v: np.ndarray, upstream: np.ndarray, mode: RectifyMode) -> np.ndarray:
    """Chain ``upstream`` through :func:`rectify_values` evaluated at ``v``."""
    if mode == "relu":
        return upstream * (v > 0)
    if mode == "abs_squared":
        return upstream * 2.0 * v
    if mode == "none":
        return upstream
    raise ConfigError(f"unknown nonlinearity {mode!r}")


def rectify(obj, mode: RectifyMode):
    """Apply the elementwise nonlinearity to a map, tensor, or bare array."""
    if isinstance(obj, np.ndarray):
        return rectify_values(obj, mode)
    if mode == "none":
        return obj
    return replace(obj, values=rectify_values(obj.values, mode))
