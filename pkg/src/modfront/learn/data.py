"""Seeded amplitude-modulation classification task and WAV manifests."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ArtifactIOError, ConfigError

MOD_DEPTH = 0.9
SPLIT = (0.70, 0.15, 0.15)


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    waveforms: list  # 1-D float64 arrays
    labels: np.ndarray  # (N,) int
    class_names: tuple[str, ...]
    splits: dict  # "train" / "val" / "test" -> index array
    sample_rate: int = 16000
    class_rates: tuple[float, ...] = ()

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def targets(self, idx) -> np.ndarray:
        """One-hot rows for the given example indices."""
        return np.eye(self.n_classes)[self.labels[np.asarray(idx)]]


def stratified_split(labels: np.ndarray, rng: np.random.Generator, fractions=SPLIT) -> dict:
    parts = {"train": [], "val": [], "test": []}
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_train = int(round(fractions[0] * idx.size))
        n_val = int(round(fractions[1] * idx.size))
        parts["train"].append(idx[:n_train])
        parts["val"].append(idx[n_train : n_train + n_val])
        parts["test"].append(idx[n_train + n_val :])
    return {k: np.sort(np.concatenate(v)) for k, v in parts.items()}


def make_am_dataset(
    seed: int = 0,
    n_per_class: int = 200,
    class_rates=(4.0, 40.0),
    duration: float = 1.0,
    carrier: str = "tone",
    sample_rate: int = 16000,
    carrier_hz: float = 1000.0,
    frame_rate: float = 1600.0,
) -> SyntheticDataset:
    """Carriers modulated as ``c(t) * (1 + 0.9 cos(2 pi rate t + phi))``.

    Each class uses one modulation rate; phases (and the noise carrier) are
    random but fully determined by ``seed``.
    """
    rates = tuple(float(r) for r in class_rates)
    if duration < 1.0:
        raise ConfigError(f"duration must be >= 1 s, got {duration}")
    if any(r <= 0 or r >= frame_rate / 2 for r in rates):
        raise ConfigError(
            f"modulation rates must lie in (0, {frame_rate / 2}) Hz for a {frame_rate} Hz front-end"
        )
    if carrier not in ("tone", "noise"):
        raise ConfigError(f"carrier must be 'tone' or 'noise', got {carrier!r}")
    if carrier == "tone" and not 0 < carrier_hz < sample_rate / 2:
        raise ConfigError("carrier frequency must be below Nyquist")
    rng = np.random.default_rng(seed)
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    waves, labels = [], []
    for c, rate in enumerate(rates):
        for _ in range(n_per_class):
            phi = rng.uniform(0, 2 * np.pi)
            if carrier == "tone":
                car = 0.5 * np.sin(2 * np.pi * carrier_hz * t + rng.uniform(0, 2 * np.pi))
            else:
                car = 0.25 * rng.standard_normal(t.size)
            waves.append(car * (1.0 + MOD_DEPTH * np.cos(2 * np.pi * rate * t + phi)))
            labels.append(c)
    labels = np.array(labels)
    names = tuple(f"am_{r:g}hz" for r in rates)
    return SyntheticDataset(waves, labels, names, stratified_split(labels, rng), sample_rate, rates)


def load_manifest(path, sample_rate: int, seed: int = 0, resample_linear: bool = False) -> SyntheticDataset:
    """Labeled WAV list from a CSV with ``path,label`` columns (paths relative to the CSV)."""
    from ..wav import read_wav

    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ArtifactIOError(f"cannot read manifest {path}: {exc}") from exc
    if not rows or not {"path", "label"} <= set(rows[0]):
        raise ArtifactIOError(f"manifest {path} needs a header with 'path' and 'label' columns")
    names = tuple(sorted({r["label"] for r in rows}))
    waves = [
        read_wav(path.parent / r["path"], sample_rate, resample_linear).samples for r in rows
    ]
    labels = np.array([names.index(r["label"]) for r in rows])
    rng = np.random.default_rng(seed)
    return SyntheticDataset(waves, labels, names, stratified_split(labels, rng), sample_rate)
