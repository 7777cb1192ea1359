"""Front-end + linear head: forward pass, hand-derived backward pass, loss.

Pipeline per example::

    x -> sinc bank conv -> r1 -> modulation conv (or max pool) -> r2
      -> instance norm -> mean over time -> linear head -> logits
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..config import Config
from ..errors import ModFrontError
from ..filterbank import (
    frames,
    mel_init,
    num_frames,
    rectify_grad,
    rectify_values,
    sinc_kernel_grads,
    sinc_kernels,
    strided_convolve,
)
from ..modulation import (
    hamming_fir_init,
    instance_norm_backward,
    instance_norm_values,
    linear_sinc_init,
    weight_norm,
    weight_norm_backward,
)

BLOCK_ORDER = ("tf_cutoffs", "mod_cutoffs", "mod_taps", "norm_gamma", "norm_beta", "head_w", "head_b")
CUTOFF_BLOCKS = ("tf_cutoffs", "mod_cutoffs")
HEAD_BLOCKS = ("head_w", "head_b")


class CacheMismatchError(ModFrontError):
    """Backward called with parameters other than those the forward cache was built from."""


class ParamVector(dict):
    """Named parameter blocks, iterated in a fixed order."""

    def ordered(self):
        return [(k, self[k]) for k in BLOCK_ORDER if k in self]

    def copy(self) -> "ParamVector":
        return ParamVector({k: v.copy() for k, v in self.items()})

    def zeros_like(self) -> "ParamVector":
        return ParamVector({k: np.zeros_like(v) for k, v in self.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([v.ravel() for _, v in self.ordered()])

    def unflat(self, vec: np.ndarray) -> "ParamVector":
        out, i = ParamVector(), 0
        for k, v in self.ordered():
            out[k] = np.asarray(vec[i : i + v.size], dtype=np.float64).reshape(v.shape)
            i += v.size
        return out

    def locate(self, flat_index: int) -> tuple[str, tuple]:
        """Block name and in-block index of a flat coordinate."""
        for k, v in self.ordered():
            if flat_index < v.size:
                return k, np.unravel_index(flat_index, v.shape)
            flat_index -= v.size
        raise IndexError(flat_index)

    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for k, v in self.ordered():
            h.update(k.encode())
            h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()


def feature_shape(cfg: Config, n_samples: int) -> tuple[int, int, int]:
    """(channels, bands, frames) of the tensor entering the head."""
    t = num_frames(n_samples, cfg.tf_kernel_len, cfg.tf_stride)
    if cfg.front == "maxpool":
        return 1, cfg.n_filters, num_frames(t, cfg.pool_kernel, cfg.pool_stride)
    return cfg.n_mod, cfg.n_filters, num_frames(t, cfg.mod_kernel_len, cfg.mod_stride)


def init_params(cfg: Config, n_classes: int, rng: np.random.Generator) -> ParamVector:
    bank = mel_init(cfg.n_filters, cfg.sample_rate, cfg.f_min, cfg.f_max, cfg.tf_kernel_len)
    p = ParamVector(tf_cutoffs=bank.cutoffs.copy())
    channels = cfg.n_filters
    if cfg.front == "modulation":
        if cfg.variant == "fir":
            p["mod_taps"] = hamming_fir_init(cfg.n_mod, cfg.mod_kernel_len)
        else:
            p["mod_cutoffs"] = linear_sinc_init(cfg.n_mod, cfg.tf_frame_rate, cfg.mod_f_lo, cfg.mod_f_hi)
        channels *= cfg.n_mod
    n_norm = cfg.n_mod if cfg.front == "modulation" else 1
    if cfg.norm == "instance" and cfg.norm_affine:
        p["norm_gamma"] = np.ones(n_norm)
        p["norm_beta"] = np.zeros(n_norm)
    p["head_w"] = cfg.head_init_scale * rng.standard_normal((n_classes, channels))
    p["head_b"] = np.zeros(n_classes)
    return p


def mod_taps(params: ParamVector, cfg: Config) -> np.ndarray:
    """Raw (pre weight-norm) modulation impulse responses."""
    if cfg.variant == "fir":
        return params["mod_taps"]
    return sinc_kernels(params["mod_cutoffs"], cfg.mod_kernel_len, cfg.window)


@dataclass
class Cache:
    fingerprint: str
    x: np.ndarray
    y: np.ndarray  # TF map before r1
    a: np.ndarray  # after r1
    raw_h: np.ndarray | None
    h: np.ndarray | None
    pool_idx: np.ndarray | None
    s: np.ndarray  # modulation output before r2
    u: np.ndarray  # after r2
    z: np.ndarray  # after instance norm (pre-affine)
    inv_std: np.ndarray | None
    feat: np.ndarray
    logits: np.ndarray


def frontend(x: np.ndarray, params: ParamVector, cfg: Config):
    """Run the front-end; returns every intermediate as a dict."""
    fast = cfg.fast_conv
    g = sinc_kernels(params["tf_cutoffs"], cfg.tf_kernel_len, cfg.window)
    y = strided_convolve(x, g, cfg.tf_stride, fast=fast)
    a = rectify_values(y, cfg.r1)
    raw_h = h = pool_idx = None
    if cfg.front == "modulation":
        raw_h = mod_taps(params, cfg)
        h = weight_norm(raw_h) if cfg.norm == "weight" else raw_h
        s = strided_convolve(a, h, cfg.mod_stride, fast=fast)
    else:
        fr = frames(a, cfg.pool_kernel, cfg.pool_stride)
        pool_idx = fr.argmax(axis=-1)
        s = np.take_along_axis(fr, pool_idx[..., None], axis=-1)[None, ..., 0]
    u = rectify_values(s, cfg.r2)
    inv_std = None
    z = u
    if cfg.norm == "instance":
        z, inv_std = instance_norm_values(u, cfg.norm_eps)
    return dict(y=y, a=a, raw_h=raw_h, h=h, pool_idx=pool_idx, s=s, u=u, z=z, inv_std=inv_std)


def forward(x, params: ParamVector, cfg: Config):
    """Logits for one waveform plus the cache needed by :func:`backward`."""
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    st = frontend(x, params, cfg)
    z = st["z"]
    if "norm_gamma" in params:
        z = params["norm_gamma"][:, None, None] * z + params["norm_beta"][:, None, None]
    feat = z.mean(axis=2).ravel()
    logits = params["head_w"] @ feat + params["head_b"]
    return logits, Cache(params.fingerprint(), x, feat=feat, logits=logits, **st)


def backward(cache: Cache, d_logits: np.ndarray, cfg: Config, params: ParamVector,
             frontend_grads: bool = True) -> ParamVector:
    """Exact gradient of a scalar loss given its gradient at the logits."""
    if params.fingerprint() != cache.fingerprint:
        raise CacheMismatchError("forward cache was computed with different parameters")
    d_logits = np.asarray(d_logits, dtype=np.float64)
    grads = ParamVector()
    grads["head_w"] = np.outer(d_logits, cache.feat)
    grads["head_b"] = d_logits.copy()
    if not frontend_grads:
        return grads

    m, k, t = cache.z.shape
    d_feat = (params["head_w"].T @ d_logits).reshape(m, k)
    dz = np.broadcast_to(d_feat[:, :, None] / t, cache.z.shape)
    if "norm_gamma" in params:
        grads["norm_gamma"] = (dz * cache.z).sum(axis=(1, 2))
        grads["norm_beta"] = dz.sum(axis=(1, 2))
        dz = dz * params["norm_gamma"][:, None, None]
    du = instance_norm_backward(cache.z, cache.inv_std, dz) if cfg.norm == "instance" else dz
    ds = rectify_grad(cache.s, du, cfg.r2)

    da = np.zeros_like(cache.a)
    if cfg.front == "modulation":
        stride, klen = cfg.mod_stride, cfg.mod_kernel_len
        fr = frames(cache.a, klen, stride)  # (K, T', J)
        d_flipped = np.tensordot(ds, fr, axes=([1, 2], [0, 1]))  # (M, J)
        dh = d_flipped[:, ::-1]
        d_frames = np.tensordot(ds, cache.h[:, ::-1], axes=([0], [0]))  # (K, T', J)
        span = stride * (t - 1) + 1
        for j in range(klen):
            da[:, j : j + span : stride] += d_frames[:, :, j]
        if cfg.norm == "weight":
            dh = weight_norm_backward(cache.raw_h, cache.h, dh)
        if cfg.variant == "fir":
            grads["mod_taps"] = dh
        else:
            g1, g2 = sinc_kernel_grads(params["mod_cutoffs"], klen, cfg.window)
            grads["mod_cutoffs"] = np.stack([(dh * g1).sum(axis=1), (dh * g2).sum(axis=1)], axis=1)
    else:
        stride = cfg.pool_stride
        rows = np.arange(k)[:, None]
        cols = np.arange(t)[None, :] * stride + cache.pool_idx
        np.add.at(da, (np.broadcast_to(rows, cols.shape), cols), ds[0])

    dy = rectify_grad(cache.y, da, cfg.r1)
    fr_x = frames(cache.x, cfg.tf_kernel_len, cfg.tf_stride)  # (T, N)
    dg = (dy @ np.ascontiguousarray(fr_x))[:, ::-1]
    g1, g2 = sinc_kernel_grads(params["tf_cutoffs"], cfg.tf_kernel_len, cfg.window)
    grads["tf_cutoffs"] = np.stack([(dg * g1).sum(axis=1), (dg * g2).sum(axis=1)], axis=1)
    return grads


def bce_with_logits(logits: np.ndarray, targets: np.ndarray):
    """Mean per-class sigmoid cross-entropy and its gradient at the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    loss = np.mean(np.logaddexp(0.0, logits) - targets * logits)
    prob = 0.5 * (1.0 + np.tanh(0.5 * logits))
    return loss, (prob - targets) / logits.size


def sigmoid(v):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(v, dtype=np.float64)))


def example_loss_and_grad(x, target, params: ParamVector, cfg: Config, frontend_grads=True):
    logits, cache = forward(x, params, cfg)
    loss, d_logits = bce_with_logits(logits, target)
    return loss, backward(cache, d_logits, cfg, params, frontend_grads), logits


def batch_loss_and_grad(xs, targets, params: ParamVector, cfg: Config, frontend_grads=True):
    """Mean loss and mean gradient over a batch, reduced in example order."""
    total = None
    losses, logits = [], []
    for x, target in zip(xs, targets):
        loss, g, lg = example_loss_and_grad(x, target, params, cfg, frontend_grads)
        losses.append(loss)
        logits.append(lg)
        total = g if total is None else ParamVector({k: total[k] + g[k] for k in total})
    n = len(losses)
    return float(np.mean(losses)), ParamVector({k: v / n for k, v in total.items()}), np.array(logits)


def batch_loss(xs, targets, params: ParamVector, cfg: Config) -> float:
    losses = [bce_with_logits(forward(x, params, cfg)[0], t)[0] for x, t in zip(xs, targets)]
    return float(np.mean(losses))
