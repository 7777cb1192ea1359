"""Adam, cutoff projection, plateau LR halving and early stopping."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import NumericError
from .model import CUTOFF_BLOCKS, ParamVector

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8
MIN_BAND = 1e-4


@dataclass(frozen=True, eq=False)
class TrainState:
    params: ParamVector
    adam_m: ParamVector
    adam_v: ParamVector
    lr: float = 1e-3
    step: int = 0
    best_val_loss: float = float("inf")
    epochs_since_improve: int = 0
    plateau_count: int = 0
    best_params: ParamVector | None = None
    best_epoch: int = -1

    @classmethod
    def fresh(cls, params: ParamVector, lr: float) -> "TrainState":
        return cls(params, params.zeros_like(), params.zeros_like(), lr=lr)


def project_cutoffs(cutoffs: np.ndarray, min_band: float = MIN_BAND) -> np.ndarray:
    """Reflect into [0, 0.5] and enforce ``f2 >= f1 + min_band``."""
    c = np.array(cutoffs, dtype=np.float64)
    f1 = np.clip(np.abs(c[..., 0]), 0.0, 0.5 - min_band)
    f2 = np.minimum(np.maximum(np.abs(c[..., 1]), f1 + min_band), 0.5)
    return np.stack([f1, f2], axis=-1)


def project_constraints(params: ParamVector, min_band: float = MIN_BAND) -> ParamVector:
    """Project every cutoff block onto the feasible set; taps and head are untouched."""
    out = params.copy()
    for name in CUTOFF_BLOCKS:
        if name in out:
            out[name] = project_cutoffs(params[name], min_band)
    return out


def adam_step(state: TrainState, grads: ParamVector, min_band: float = MIN_BAND) -> TrainState:
    """One bias-corrected Adam update followed by the cutoff projection.

    Blocks absent from ``grads`` (frozen) are left untouched.
    """
    for name, g in grads.items():
        if name not in state.params or g.shape != state.params[name].shape:
            raise NumericError(f"gradient block {name!r} does not match the parameters", block=name)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter block {name!r}", block=name)
    t = state.step + 1
    params, m, v = state.params.copy(), state.adam_m.copy(), state.adam_v.copy()
    for name, g in grads.items():
        m[name] = BETA1 * m[name] + (1 - BETA1) * g
        v[name] = BETA2 * v[name] + (1 - BETA2) * g * g
        m_hat = m[name] / (1 - BETA1**t)
        v_hat = v[name] / (1 - BETA2**t)
        params[name] = params[name] - state.lr * m_hat / (np.sqrt(v_hat) + EPS)
    params = project_constraints(params, min_band)
    return replace(state, params=params, adam_m=m, adam_v=v, step=t)


def lr_schedule(state: TrainState, val_loss: float, epoch: int = -1, patience: int = 5,
                factor: float = 0.5) -> TrainState:
    """Track the best validation loss; halve the LR after ``patience`` flat epochs."""
    if val_loss < state.best_val_loss:
        return replace(
            state,
            best_val_loss=float(val_loss),
            epochs_since_improve=0,
            plateau_count=0,
            best_params=state.params.copy(),
            best_epoch=epoch,
        )
    plateau = state.plateau_count + 1
    lr = state.lr
    if plateau >= patience:
        lr, plateau = lr * factor, 0
    return replace(
        state, lr=lr, plateau_count=plateau, epochs_since_improve=state.epochs_since_improve + 1
    )


def early_stop(state: TrainState, patience: int = 15) -> bool:
    return state.epochs_since_improve >= patience
