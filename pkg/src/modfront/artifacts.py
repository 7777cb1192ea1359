"""On-disk formats: matrix artifacts (raw binary / CSV / PGM) and checkpoints.

Matrix raw binary, all little-endian::

    magic     8 bytes  b"MODFMAT\\0"
    version   u32      1
    ndim      u32
    dims      u32 * ndim
    db_flag   u8       1 if the payload is already in dB
    digest    32 bytes config digest (raw sha256)
    meta_len  u32
    meta      meta_len bytes of UTF-8 JSON (name and per-axis labels/units)
    payload   float32 * prod(dims), C order

Checkpoint, all little-endian::

    magic     8 bytes  b"MODFCKPT"
    version   u32      1
    digest    32 bytes config digest (raw sha256)
    cfg_len   u32, then cfg_len bytes of the key = value config text
    n_names   u32, then per class name: u16 length + UTF-8 bytes
    step      u64
    lr, best_val_loss                                   f64, f64
    epochs_since_improve, plateau_count, best_epoch+1   u32 * 3
    then three sections (params, adam_m, adam_v), each:
      n_blocks u32, then per block: u16 name length, name, u8 ndim,
      u32 * ndim dims, float64 * prod(dims)
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config, dumps, loads
from .errors import ArtifactIOError

MATRIX_MAGIC = b"MODFMAT\0"
CKPT_MAGIC = b"MODFCKPT"
FORMAT_VERSION = 1
DB_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class MatrixArtifact:
    name: str
    values: np.ndarray
    axes: list = field(default_factory=list)  # per axis: {"label", "unit", optional "ticks"}
    db: bool = False
    digest: str = "0" * 64

    def __post_init__(self):
        if len(self.axes) != self.values.ndim:
            raise ValueError(f"{self.name}: need one axis description per dimension")
        for ax in self.axes:
            if not ax.get("unit"):
                raise ValueError(f"{self.name}: axis {ax.get('label')!r} has no unit")


def to_db(values: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(np.abs(values) + DB_FLOOR)


def _meta(art: MatrixArtifact) -> dict:
    axes = []
    for ax in art.axes:
        entry = {k: v for k, v in ax.items() if k != "ticks"}
        if "ticks" in ax:
            entry["ticks"] = [float(t) for t in np.asarray(ax["ticks"]).ravel()]
        axes.append(entry)
    return {"name": art.name, "axes": axes, "db": art.db, "config_digest": art.digest}


def write_raw(art: MatrixArtifact, path) -> None:
    meta = json.dumps(_meta(art)).encode()
    dims = art.values.shape
    head = MATRIX_MAGIC + struct.pack("<II", FORMAT_VERSION, len(dims))
    head += struct.pack(f"<{len(dims)}I", *dims)
    head += struct.pack("<B", int(art.db)) + bytes.fromhex(art.digest)
    head += struct.pack("<I", len(meta)) + meta
    Path(path).write_bytes(head + np.ascontiguousarray(art.values, dtype="<f4").tobytes())


def read_raw(path) -> MatrixArtifact:
    data = Path(path).read_bytes()
    if data[:8] != MATRIX_MAGIC:
        raise ArtifactIOError(f"{path}: bad magic, not a matrix artifact")
    version, ndim = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise ArtifactIOError(f"{path}: unsupported matrix format version {version}")
    pos = 16
    dims = struct.unpack_from(f"<{ndim}I", data, pos)
    pos += 4 * ndim
    db = bool(data[pos])
    digest = data[pos + 1 : pos + 33].hex()
    pos += 33
    (meta_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    meta = json.loads(data[pos : pos + meta_len])
    pos += meta_len
    count = int(np.prod(dims))
    payload = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
    if payload.size != count:
        raise ArtifactIOError(f"{path}: payload has {payload.size} values, header says {count}")
    return MatrixArtifact(meta["name"], payload.reshape(dims), meta["axes"], db, digest)


def write_csv(art: MatrixArtifact, path, float32: bool = False) -> None:
    """2-D matrix as CSV; metadata goes into leading ``#`` comment lines."""
    values = np.asarray(art.values, dtype=np.float32 if float32 else np.float64)
    if values.ndim != 2:
        raise ValueError("CSV export needs a 2-D matrix")
    with open(path, "w", newline="") as fh:
        fh.write(f"# name: {art.name}\n")
        fh.write(f"# config_digest: {art.digest}\n")
        fh.write(f"# shape: {values.shape[0]}x{values.shape[1]}\n")
        fh.write(f"# db: {int(art.db)}\n")
        fh.write(f"# axes: {json.dumps(_meta(art)['axes'])}\n")
        w = csv.writer(fh)
        for row in values:
            w.writerow([repr(float(v)) for v in row])


def read_csv_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return np.array([[float(v) for v in r] for r in rows])


def write_pgm(art: MatrixArtifact, path) -> tuple[float, float]:
    """8-bit binary graymap of the dB-scaled matrix.

    Each image is normalized over its own dB range; rows are written with
    the last row (highest band) at the top.  Returns the (lo, hi) dB range.
    """
    db = art.values if art.db else to_db(art.values)
    lo, hi = float(db.min()), float(db.max())
    if hi > lo:
        pix = np.round((db - lo) / (hi - lo) * 255.0)
    else:
        pix = np.zeros_like(db)
    pix = pix[::-1].astype(np.uint8)
    height, width = pix.shape
    header = (
        f"P5\n# {art.name} config_digest {art.digest}\n"
        f"# dB = 10*log10(|v| + {DB_FLOOR:g}); per-matrix normalization: 0 -> {lo:.6g} dB, "
        f"255 -> {hi:.6g} dB; top row = last matrix row\n{width} {height}\n255\n"
    )
    Path(path).write_bytes(header.encode() + pix.tobytes())
    return lo, hi


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode())
        pos = end
    if tokens[0] != "P5":
        raise ArtifactIOError(f"{path}: not a binary PGM")
    width, height = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data[pos + 1 : pos + 1 + width * height], dtype=np.uint8).reshape(height, width)


# -- checkpoints ------------------------------------------------------------


def _pack_str(s: str, fmt: str = "<H") -> bytes:
    b = s.encode()
    return struct.pack(fmt, len(b)) + b


def _pack_blocks(blocks) -> bytes:
    out = struct.pack("<I", len(blocks))
    for name, arr in blocks:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        out += _pack_str(name) + struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape) + arr.tobytes()
    return out


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, fmt: str):
        try:
            vals = struct.unpack_from(fmt, self.data, self.pos)
        except struct.error as exc:
            raise ArtifactIOError(f"{self.path}: truncated checkpoint") from exc
        self.pos += struct.calcsize(fmt)
        return vals

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ArtifactIOError(f"{self.path}: truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def string(self, fmt: str = "<H") -> str:
        return self.raw(self.take(fmt)[0]).decode()

    def blocks(self) -> dict:
        out = {}
        for _ in range(self.take("<I")[0]):
            name = self.string()
            ndim = self.take("<B")[0]
            dims = self.take(f"<{ndim}I")
            count = int(np.prod(dims))
            out[name] = np.frombuffer(self.raw(8 * count), dtype="<f8").reshape(dims).copy()
        return out


def write_checkpoint(path, cfg: Config, state, class_names=()) -> None:
    body = CKPT_MAGIC + struct.pack("<I", FORMAT_VERSION) + bytes.fromhex(cfg.digest())
    body += _pack_str(dumps(cfg), "<I")
    body += struct.pack("<I", len(class_names)) + b"".join(_pack_str(n) for n in class_names)
    body += struct.pack("<Qdd", state.step, state.lr, state.best_val_loss)
    body += struct.pack("<III", state.epochs_since_improve, state.plateau_count, state.best_epoch + 1)
    for section in (state.params, state.adam_m, state.adam_v):
        body += _pack_blocks(section.ordered())
    Path(path).write_bytes(body)


def read_checkpoint(path):
    """Returns ``(config, TrainState, class_names, digest)``."""
    from .learn.model import ParamVector
    from .learn.optim import TrainState

    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    r = _Reader(data, path)
    if r.raw(8) != CKPT_MAGIC:
        raise ArtifactIOError(f"{path}: bad magic, not a checkpoint")
    (version,) = r.take("<I")
    if version != FORMAT_VERSION:
        raise ArtifactIOError(f"{path}: unsupported checkpoint version {version}")
    digest = r.raw(32).hex()
    cfg = loads(r.string("<I"))
    if cfg.digest() != digest:
        raise ArtifactIOError(f"{path}: embedded config does not match its digest")
    names = tuple(r.string() for _ in range(r.take("<I")[0]))
    step, lr, best = r.take("<Qdd")
    since, plateau, best_epoch = r.take("<III")
    params, m, v = (ParamVector(r.blocks()) for _ in range(3))
    state = TrainState(params, m, v, lr=lr, step=step, best_val_loss=best,
                       epochs_since_improve=since, plateau_count=plateau, best_epoch=best_epoch - 1)
    return cfg, state, names, digest
