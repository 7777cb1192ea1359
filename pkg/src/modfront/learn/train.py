"""Mini-batch training loop with plateau LR halving and early stopping."""

from __future__ import annotations

import csv
import logging
from dataclasses import replace

import numpy as np

from ..config import Config
from ..errors import NumericError
from ..metrics import PredictionTable, UndefinedMetricError, macro_average
from .data import SyntheticDataset
from .model import batch_loss_and_grad, bce_with_logits, forward, init_params, sigmoid
from .optim import TrainState, adam_step, early_stop, lr_schedule

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "split", "loss", "roc_auc", "pr_auc", "lr")


def _auc_pair(scores: np.ndarray, targets: np.ndarray, names) -> tuple[float, float]:
    table = PredictionTable(scores, targets, names)
    out = []
    for metric in ("roc_auc", "pr_auc"):
        try:
            out.append(macro_average(table, metric)[0])
        except UndefinedMetricError:
            out.append(float("nan"))
    return tuple(out)


def evaluate(params, cfg: Config, dataset: SyntheticDataset, idx) -> dict:
    """Loss, macro ROC/PR-AUC and accuracy on the examples ``idx``."""
    idx = np.asarray(idx)
    targets = dataset.targets(idx)
    logits = np.array([forward(dataset.waveforms[i], params, cfg)[0] for i in idx])
    loss = float(np.mean([bce_with_logits(lg, t)[0] for lg, t in zip(logits, targets)]))
    scores = sigmoid(logits)
    roc, pr = _auc_pair(scores, targets, dataset.class_names)
    acc = float(np.mean(logits.argmax(axis=1) == dataset.labels[idx]))
    return dict(loss=loss, roc_auc=roc, pr_auc=pr, accuracy=acc, scores=scores)


def train(cfg: Config, dataset: SyntheticDataset, epochs: int | None = None, params=None):
    """Fit front-end and head; returns the best-validation state and the history rows.

    ``params`` replaces the default initialization (the seeded generator is
    still advanced the same way, so shuffling does not depend on it).
    """
    rng = np.random.default_rng(cfg.seed)
    default = init_params(cfg, dataset.n_classes, rng)
    params = default if params is None else params.copy()
    state = TrainState.fresh(params, cfg.lr)
    train_idx = dataset.splits["train"]
    val_idx = dataset.splits["val"]
    history = []
    epochs = cfg.epochs if epochs is None else epochs
    frontend_grads = not cfg.freeze_frontend
    for epoch in range(epochs):
        perm = rng.permutation(train_idx)
        losses, logits, seen = [], [], []
        for start in range(0, perm.size, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            xs = [dataset.waveforms[i] for i in batch]
            loss, grads, lg = batch_loss_and_grad(
                xs, dataset.targets(batch), state.params, cfg, frontend_grads
            )
            if not np.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}", last_good=state)
            state = adam_step(state, grads, cfg.min_band)
            losses.append(loss * batch.size)
            logits.append(lg)
            seen.append(batch)
        seen = np.concatenate(seen)
        tr_roc, tr_pr = _auc_pair(
            sigmoid(np.concatenate(logits)), dataset.targets(seen), dataset.class_names
        )
        val = evaluate(state.params, cfg, dataset, val_idx)
        history.append(dict(epoch=epoch, split="train", loss=sum(losses) / seen.size,
                            roc_auc=tr_roc, pr_auc=tr_pr, lr=state.lr))
        history.append(dict(epoch=epoch, split="val", loss=val["loss"], roc_auc=val["roc_auc"],
                            pr_auc=val["pr_auc"], lr=state.lr))
        log.info("epoch %d train %.4f val %.4f acc %.3f lr %.2e", epoch,
                 history[-2]["loss"], val["loss"], val["accuracy"], state.lr)
        state = lr_schedule(state, val["loss"], epoch, cfg.plateau_patience, cfg.lr_factor)
        if early_stop(state, cfg.patience):
            log.info("early stop after epoch %d (best epoch %d)", epoch, state.best_epoch)
            break
    if state.best_params is not None:
        state = replace(state, params=state.best_params)
    return state, history


def write_history(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, extrasaction="ignore")
        w.writeheader()
        for row in history:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in row.items()})
