"""Central finite-difference check of the analytic gradients.

ReLU and max pooling are not differentiable everywhere.  When a perturbed
parameter moves any pre-activation across zero (or changes a pooling argmax)
the central difference straddles a kink and stops being a valid oracle, so
such coordinates are detected and reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import Config
from .model import ParamVector, batch_loss_and_grad, bce_with_logits, forward

NOISE_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    coords: list[tuple[str, tuple]]
    analytic: np.ndarray
    numeric: np.ndarray
    kinked: np.ndarray = field(default=None)

    @property
    def rel_error(self) -> np.ndarray:
        scale = np.maximum(np.maximum(np.abs(self.analytic), np.abs(self.numeric)), NOISE_FLOOR)
        return np.abs(self.analytic - self.numeric) / scale

    @property
    def max_rel_error(self) -> float:
        return float(self.rel_error.max())


def sample_coords(params: ParamVector, n: int, rng: np.random.Generator) -> np.ndarray:
    """Spread ``n`` flat coordinates across every parameter block."""
    blocks = params.ordered()
    offsets = np.cumsum([0] + [v.size for _, v in blocks])
    picks = []
    per_block = max(1, n // len(blocks))
    for (_, v), off in zip(blocks, offsets):
        picks.extend(off + rng.choice(v.size, size=min(per_block, v.size), replace=False))
    rest = np.setdiff1d(np.arange(offsets[-1]), picks)
    if len(picks) < n:
        picks.extend(rng.choice(rest, size=min(n - len(picks), rest.size), replace=False))
    return rng.permutation(np.array(picks))


def _loss_and_pattern(xs, targets, params: ParamVector, cfg: Config):
    losses, pattern = [], []
    for x, t in zip(xs, targets):
        logits, cache = forward(x, params, cfg)
        losses.append(bce_with_logits(logits, t)[0])
        if cfg.r1 == "relu":
            pattern.append(cache.y > 0)
        if cfg.r2 == "relu":
            pattern.append(cache.s > 0)
        if cache.pool_idx is not None:
            pattern.append(cache.pool_idx)
    return float(np.mean(losses)), pattern


def _same(p, q) -> bool:
    return all(np.array_equal(a, b) for a, b in zip(p, q))


def check_gradients(cfg: Config, params: ParamVector, xs, targets, coords, step: float = 1e-5):
    """Compare analytic and central-difference gradients at flat ``coords``."""
    _, grads, _ = batch_loss_and_grad(xs, targets, params, cfg)
    flat = params.flat()
    analytic = ParamVector({k: grads[k] for k in params}).flat()[coords]
    _, base = _loss_and_pattern(xs, targets, params, cfg)
    numeric = np.empty(len(coords))
    kinked = np.zeros(len(coords), dtype=bool)
    for i, c in enumerate(coords):
        up, down = flat.copy(), flat.copy()
        up[c] += step
        down[c] -= step
        l_up, p_up = _loss_and_pattern(xs, targets, params.unflat(up), cfg)
        l_down, p_down = _loss_and_pattern(xs, targets, params.unflat(down), cfg)
        numeric[i] = (l_up - l_down) / (2 * step)
        kinked[i] = not (_same(base, p_up) and _same(base, p_down))
    return GradCheckResult([params.locate(c) for c in coords], analytic, numeric, kinked)


def check_smooth_coords(cfg, params, xs, targets, n, rng, step=1e-5, max_tries=None):
    """Sample coordinates until ``n`` kink-free ones have been checked."""
    first = sample_coords(params, n, rng)
    rest = rng.permutation(np.setdiff1d(np.arange(params.flat().size), first))
    pool = np.concatenate([first, rest])
    max_tries = max_tries or pool.size
    kept = None
    for start in range(0, min(max_tries, pool.size), n):
        res = check_gradients(cfg, params, xs, targets, pool[start : start + n], step)
        kept = res if kept is None else GradCheckResult(
            kept.coords + res.coords,
            np.concatenate([kept.analytic, res.analytic]),
            np.concatenate([kept.numeric, res.numeric]),
            np.concatenate([kept.kinked, res.kinked]),
        )
        if (~kept.kinked).sum() >= n:
            break
    return kept
