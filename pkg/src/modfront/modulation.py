"""Temporal modulation filtering of a time-frequency map.

One bank of M FIR filters is shared by all K frequency bands, turning a
``(K, T)`` map into an ``(M, K, T')`` tensor.  Filters are either free taps
("fir") or sinc band-pass kernels parameterized by cutoffs ("sinc").
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .errors import ConfigError, InputTooShortError
from .filterbank import (
    TimeFrequencyMap,
    WindowKind,
    check_cutoffs,
    frames,
    sinc_kernels,
    strided_convolve,
)

Variant = Literal["fir", "sinc"]
NUM_SLOTS = 5


@dataclass(frozen=True, eq=False)
class ModulationLayer:
    variant: Variant = "sinc"
    num_filters: int = 20
    kernel_len: int = 128
    stride: int = 160
    fir_taps: np.ndarray | None = None
    mod_cutoffs: np.ndarray | None = None
    frame_rate: float = 1600.0
    window: WindowKind = "hamming"

    def __post_init__(self):
        if self.num_filters < 1 or self.kernel_len < 2 or self.stride < 1:
            raise ConfigError("modulation layer needs M >= 1, kernel_len >= 2, stride >= 1")
        if self.variant == "fir":
            taps = self.fir_taps
            if taps is None:
                taps = hamming_fir_init(self.num_filters, self.kernel_len)
            taps = np.array(taps, dtype=np.float64)
            if taps.shape != (self.num_filters, self.kernel_len):
                raise ConfigError(
                    f"fir taps shape {taps.shape} != ({self.num_filters}, {self.kernel_len})"
                )
            object.__setattr__(self, "fir_taps", taps)
        elif self.variant == "sinc":
            cut = self.mod_cutoffs
            if cut is None:
                cut = linear_sinc_init(self.num_filters, self.frame_rate)
            cut = np.array(cut, dtype=np.float64).reshape(-1, 2)
            if cut.shape[0] != self.num_filters:
                raise ConfigError(f"expected {self.num_filters} cutoff pairs, got {cut.shape[0]}")
            check_cutoffs(cut)
            object.__setattr__(self, "mod_cutoffs", cut)
        else:
            raise ConfigError(f"unknown modulation variant {self.variant!r}")

    def taps(self) -> np.ndarray:
        """Materialized ``(M, kernel_len)`` impulse responses."""
        if self.variant == "fir":
            return self.fir_taps
        return sinc_kernels(self.mod_cutoffs, self.kernel_len, self.window)

    def centers_hz(self) -> np.ndarray | None:
        if self.variant != "sinc":
            return None
        return self.mod_cutoffs.mean(axis=1) * self.frame_rate


@dataclass(frozen=True, eq=False)
class ModulationTensor:
    values: np.ndarray  # (M, K, T')
    frame_rate_out: float
    mod_meta: dict = field(default_factory=dict)


def hamming_slots(kernel_len: int) -> tuple[int, list[int]]:
    """Slot length and the start tap of each of the five Hamming slots.

    Slots are ``floor(kernel_len / 5)`` long and start at
    ``round(m * kernel_len / 5)`` (halves rounded up).
    """
    if kernel_len < 2 * NUM_SLOTS:
        raise ConfigError(f"kernel_len must be >= 10 for Hamming slot init, got {kernel_len}")
    width = kernel_len // NUM_SLOTS
    starts = [int(np.floor(m * kernel_len / NUM_SLOTS + 0.5)) for m in range(NUM_SLOTS)]
    return width, starts


def hamming_fir_init(num_filters: int, kernel_len: int) -> np.ndarray:
    if num_filters < 1:
        raise ConfigError("need at least one modulation filter")
    width, starts = hamming_slots(kernel_len)
    bump = np.hamming(width)
    taps = np.zeros((num_filters, kernel_len))
    for m in range(num_filters):
        s = starts[m % NUM_SLOTS]
        taps[m, s : s + width] = bump
    return taps


def linear_sinc_init(
    num_filters: int, frame_rate: float, f_lo: float = 0.0, f_hi: float | None = None
) -> np.ndarray:
    """Adjacent pass-bands with linearly spaced edges, as normalized cutoffs."""
    if f_hi is None:
        f_hi = frame_rate / 2
    if num_filters < 1:
        raise ConfigError("need at least one modulation filter")
    if not (0 <= f_lo < f_hi <= frame_rate / 2):
        raise ConfigError(
            f"need 0 <= f_lo < f_hi <= {frame_rate / 2} Hz, got f_lo={f_lo}, f_hi={f_hi}"
        )
    edges = np.minimum(np.linspace(f_lo, f_hi, num_filters + 1) / frame_rate, 0.5)
    return np.stack([edges[:-1], edges[1:]], axis=1)


def mod_filter(tf_map: TimeFrequencyMap, layer: ModulationLayer, taps=None, fast=False):
    """Convolve every band of ``tf_map`` with every modulation filter.

    ``taps`` overrides the layer's own impulse responses (used for weight
    normalized filters).
    """
    if tf_map.num_frames < layer.kernel_len:
        raise InputTooShortError(
            f"time-frequency map has {tf_map.num_frames} frames, "
            f"modulation kernel needs {layer.kernel_len}"
        )
    h = layer.taps() if taps is None else taps
    values = strided_convolve(tf_map.values, h, layer.stride, fast=fast)
    meta = {"variant": layer.variant}
    if layer.variant == "sinc":
        meta["center_hz"] = layer.centers_hz()
    else:
        meta["taps"] = h
    return ModulationTensor(values, tf_map.frame_rate / layer.stride, meta)


def instance_norm_values(v: np.ndarray, eps: float = 1e-5):
    """Standardize each channel (axis 0) over all remaining axes.

    Returns the normalized array and ``inv_std`` (one per channel), which is
    what the backward pass needs.
    """
    axes = tuple(range(1, v.ndim))
    mean = v.mean(axis=axes, keepdims=True)
    centered = v - mean
    var = (centered * centered).mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return centered * inv_std, inv_std


def instance_norm_backward(z: np.ndarray, inv_std: np.ndarray, dz: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, z.ndim))
    mean_dz = dz.mean(axis=axes, keepdims=True)
    mean_dz_z = (dz * z).mean(axis=axes, keepdims=True)
    return inv_std * (dz - mean_dz - z * mean_dz_z)


def instance_norm(t, epsilon: float = 1e-5):
    """Per-channel mean/variance normalization (population variance)."""
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if isinstance(t, np.ndarray):
        return instance_norm_values(t, epsilon)[0]
    return replace(t, values=instance_norm_values(t.values, epsilon)[0])


def weight_norm(taps: np.ndarray, return_flags: bool = False):
    """Scale each filter (row) to unit L2 norm.

    All-zero filters are passed through unchanged; they are reported with a
    warning and, if ``return_flags`` is set, as a boolean mask.
    """
    taps = np.asarray(taps, dtype=np.float64)
    norms = np.sqrt((taps * taps).sum(axis=-1, keepdims=True))
    zero = norms[..., 0] == 0
    out = taps / np.where(norms == 0, 1.0, norms)
    if zero.any():
        warnings.warn(f"weight_norm: filters {np.flatnonzero(zero).tolist()} have zero norm")
    if return_flags:
        return out, zero
    return out


def weight_norm_backward(taps: np.ndarray, normed: np.ndarray, d_normed: np.ndarray):
    norms = np.sqrt((taps * taps).sum(axis=-1, keepdims=True))
    proj = (normed * d_normed).sum(axis=-1, keepdims=True)
    return np.where(norms == 0, d_normed, (d_normed - normed * proj) / np.where(norms == 0, 1.0, norms))


def max_pool_baseline(tf_map: TimeFrequencyMap, kernel: int = 128, stride: int = 128):
    """Strided max pooling along time; an ``M = 1`` stand-in for the modulation layer."""
    if tf_map.num_frames < kernel:
        raise InputTooShortError(
            f"time-frequency map has {tf_map.num_frames} frames, pooling window is {kernel}"
        )
    pooled = frames(tf_map.values, kernel, stride).max(axis=-1)
    return ModulationTensor(pooled[None], tf_map.frame_rate / stride, {"variant": "maxpool"})


def freq_response(
    taps_or_cutoffs,
    n_points: int = 512,
    frame_rate: float = 1600.0,
    kernel_len: int = 128,
    window: WindowKind = "hamming",
    floor_db: float = -240.0,
):
    """Magnitude response in dB re. its maximum on ``n_points`` bins over [0, frame_rate/2].

    Accepts an impulse response or a ``(f1, f2)`` normalized cutoff pair,
    which is materialized as a sinc kernel of ``kernel_len`` taps first.
    The response is the DTFT sampled on the grid, i.e. the zero-padded DFT.
    """
    if n_points < 64:
        raise ConfigError("n_points must be >= 64")
    h = np.asarray(taps_or_cutoffs, dtype=np.float64)
    if h.shape == (2,):
        h = sinc_kernels(h, kernel_len, window)[0]
    freqs = np.linspace(0.0, 0.5, n_points)
    phase = np.exp(-2j * np.pi * np.outer(freqs, np.arange(h.size)))
    mag = np.abs(phase @ h)
    peak = mag.max()
    if peak == 0:
        db = np.full(n_points, floor_db)
    else:
        with np.errstate(divide="ignore"):
            db = np.maximum(20.0 * np.log10(mag / peak), floor_db)
    return freqs * frame_rate, db
