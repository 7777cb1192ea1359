"""Learnable modulation front-end: sinc band-pass analysis followed by shared
temporal modulation filters, with hand-derived gradients and a small trainer."""

from .config import Config
from .filterbank import (
    SincFilterBank,
    TimeFrequencyMap,
    Waveform,
    mel_init,
    rectify,
    sinc_kernel,
    tf_decompose,
)
from .modulation import (
    ModulationLayer,
    ModulationTensor,
    freq_response,
    hamming_fir_init,
    instance_norm,
    linear_sinc_init,
    max_pool_baseline,
    mod_filter,
    weight_norm,
)

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ModulationLayer",
    "ModulationTensor",
    "SincFilterBank",
    "TimeFrequencyMap",
    "Waveform",
    "freq_response",
    "hamming_fir_init",
    "instance_norm",
    "linear_sinc_init",
    "max_pool_baseline",
    "mel_init",
    "mod_filter",
    "rectify",
    "sinc_kernel",
    "tf_decompose",
    "weight_norm",
]
