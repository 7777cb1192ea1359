"""Flat ``key = value`` configuration with validation and a stable digest."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

_ENUMS = {
    "window": ("none", "hamming"),
    "r1": ("relu", "abs_squared", "none"),
    "r2": ("relu", "abs_squared", "none"),
    "front": ("modulation", "maxpool"),
    "variant": ("fir", "sinc"),
    "norm": ("instance", "weight", "none"),
    "task_carrier": ("tone", "noise"),
}


@dataclass(frozen=True)
class Config:
    # time-frequency sinc bank
    sample_rate: int = 16000
    n_filters: int = 80
    tf_kernel_len: int = 256
    tf_stride: int = 10
    f_min: float = 30.0
    f_max: float = 8000.0
    window: str = "hamming"
    r1: str = "relu"
    # modulation layer
    front: str = "modulation"
    variant: str = "sinc"
    n_mod: int = 20
    mod_kernel_len: int = 128
    mod_stride: int = 160
    mod_f_lo: float = 0.0
    mod_f_hi: float = 800.0
    pool_kernel: int = 128
    pool_stride: int = 128
    r2: str = "abs_squared"
    norm: str = "instance"
    norm_eps: float = 1e-5
    norm_affine: bool = False
    # optimisation
    lr: float = 1e-3
    batch_size: int = 4
    epochs: int = 200
    patience: int = 15
    plateau_patience: int = 5
    lr_factor: float = 0.5
    min_band: float = 1e-4
    head_init_scale: float = 0.01
    freeze_frontend: bool = False
    fast_conv: bool = True
    seed: int = 0
    # synthetic AM task
    task_rates: tuple = (4.0, 40.0)
    task_carrier: str = "tone"
    task_carrier_hz: float = 1000.0
    task_duration: float = 1.0
    task_n_per_class: int = 200
    # analysis / IO
    input_seconds: float = 5.0
    analyze_hop: float = 2.5
    export_float32: bool = False
    resample_linear: bool = False

    def __post_init__(self):
        validate(self)

    @property
    def tf_frame_rate(self) -> float:
        return self.sample_rate / self.tf_stride

    def digest(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()

    def override(self, **changes) -> "Config":
        return replace(self, **changes)


def _field_types():
    return {f.name: type(f.default) for f in fields(Config)}


def validate(cfg: Config) -> None:
    for key, allowed in _ENUMS.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {getattr(cfg, key)!r}")
    positive = [
        "sample_rate", "n_filters", "tf_stride", "n_mod", "mod_stride", "pool_kernel",
        "pool_stride", "batch_size", "epochs", "patience", "plateau_patience",
        "task_n_per_class", "lr", "norm_eps", "min_band", "task_duration",
        "input_seconds", "analyze_hop",
    ]
    for key in positive:
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive, got {getattr(cfg, key)}")
    if cfg.tf_kernel_len < 2 or cfg.mod_kernel_len < 2:
        raise ConfigError("kernel lengths must be >= 2")
    if not 0 < cfg.lr_factor < 1:
        raise ConfigError("lr_factor must lie in (0, 1)")
    if not 0 <= cfg.f_min < cfg.f_max <= cfg.sample_rate / 2:
        raise ConfigError(
            f"need 0 <= f_min < f_max <= {cfg.sample_rate / 2}; got {cfg.f_min}, {cfg.f_max}"
        )
    if not 0 <= cfg.mod_f_lo < cfg.mod_f_hi <= cfg.tf_frame_rate / 2:
        raise ConfigError(
            f"need 0 <= mod_f_lo < mod_f_hi <= {cfg.tf_frame_rate / 2}; "
            f"got {cfg.mod_f_lo}, {cfg.mod_f_hi}"
        )
    if len(cfg.task_rates) < 2:
        raise ConfigError("task_rates needs at least two classes")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(key: str, text: str, kind: type):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(float(t) for t in text.split(",") if t.strip())
        return text
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {text!r} as {kind.__name__}") from None


def dumps(cfg: Config) -> str:
    return "".join(f"{k} = {_format(v)}\n" for k, v in sorted(asdict(cfg).items()))


def from_mapping(values: dict[str, str], base: Config | None = None) -> Config:
    """Build a config from string values; unknown keys are rejected."""
    types = _field_types()
    unknown = sorted(set(values) - set(types))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    parsed = {k: _parse(k, v, types[k]) for k, v in values.items()}
    return replace(base or Config(), **parsed)


def loads(text: str, base: Config | None = None) -> Config:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return from_mapping(values, base)


def load(path, base: Config | None = None) -> Config:
    return loads(Path(path).read_text(), base)


def save(cfg: Config, path) -> None:
    Path(path).write_text(f"# config digest {cfg.digest()}\n" + dumps(cfg))


CONFIG_KEYS = tuple(f.name for f in fields(Config))
__all__ = ["Config", "CONFIG_KEYS", "dumps", "loads", "load", "save", "from_mapping"]
