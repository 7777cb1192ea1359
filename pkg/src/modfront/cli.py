"""Command-line entry point: init-config, analyze, filters, train, eval.

Exit codes: 0 success, 2 configuration error, 3 IO error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import artifacts
from .artifacts import MatrixArtifact
from .config import Config, dumps, from_mapping, load, save
from .errors import ArtifactIOError, ConfigError, InputTooShortError, ModFrontError
from .filterbank import sinc_kernels
from .learn.data import load_manifest, make_am_dataset
from .learn.model import frontend, init_params
from .learn.train import evaluate, train, write_history
from .metrics import read_prediction_table, write_per_tag_csv
from .modulation import freq_response, weight_norm
from .wav import read_wav

log = logging.getLogger("modfront")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


# -- configuration plumbing -------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser, skip=()):
    p.add_argument("--config", type=Path, help="key = value configuration file")
    for f in fields(Config):
        if f.name in skip:
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, nargs="?", const="true", default=None,
                           metavar="BOOL", help=f"(default {str(f.default).lower()})")
        else:
            p.add_argument(flag, dest=f.name, default=None, metavar="VALUE",
                           help=f"(default {f.default})")


def _overrides(args, skip=()) -> dict:
    return {
        f.name: getattr(args, f.name)
        for f in fields(Config)
        if f.name not in skip and getattr(args, f.name, None) is not None
    }


def resolve_config(args, skip=()) -> Config:
    base = load(args.config) if getattr(args, "config", None) else Config()
    return from_mapping(_overrides(args, skip), base)


def _load_params(args, cfg: Config, n_classes: int = 1):
    """Parameters from ``--checkpoint`` (digest-checked) or a fresh initialisation."""
    ckpt = getattr(args, "checkpoint", None)
    if ckpt is None:
        return cfg, init_params(cfg, n_classes, np.random.default_rng(cfg.seed)), None
    ck_cfg, state, names, digest = artifacts.read_checkpoint(ckpt)
    if args.config is not None or _overrides(args):
        if cfg.digest() != digest:
            raise ConfigError(
                f"checkpoint config digest {digest[:12]} does not match the supplied "
                f"configuration ({cfg.digest()[:12]})"
            )
    return ck_cfg, state.params, names


# -- commands ---------------------------------------------------------------


def cmd_init_config(args) -> int:
    cfg = resolve_config(args)
    if args.out is None:
        sys.stdout.write(dumps(cfg))
    else:
        save(cfg, args.out)
        print(f"wrote {args.out} (digest {cfg.digest()[:12]})")
    return EXIT_OK


def _windows(n: int, win: int, hop: int):
    if n <= win:
        return [(0, n)]
    spans = [(s, s + win) for s in range(0, n - win + 1, hop)]
    if spans[-1][1] < n:
        spans.append((n - win, n))  # end-aligned window so the tail is covered
    return spans


def analysis_matrices(x: np.ndarray, params, cfg: Config, offset_s: float = 0.0, digest=None):
    """TF map and per-filter modulation matrices as :class:`MatrixArtifact` objects."""
    digest = digest or cfg.digest()
    st = frontend(x, params, cfg)
    centers = params["tf_cutoffs"].mean(axis=1) * cfg.sample_rate
    band_axis = {"label": "band_center", "unit": "Hz", "ticks": centers}
    tf_rate = cfg.tf_frame_rate
    out = [MatrixArtifact(
        "tf", st["a"],
        [band_axis, {"label": "time", "unit": "s", "start": offset_s, "step": 1.0 / tf_rate}],
        digest=digest,
    )]
    stride = cfg.mod_stride if cfg.front == "modulation" else cfg.pool_stride
    mod_rate = tf_rate / stride
    mod_centers = None
    if "mod_cutoffs" in params:
        mod_centers = params["mod_cutoffs"].mean(axis=1) * tf_rate
    for m, mat in enumerate(st["u"]):
        name = f"mod_{m:02d}" if cfg.front == "modulation" else "maxpool"
        axes = [band_axis, {"label": "time", "unit": "s", "start": offset_s, "step": 1.0 / mod_rate}]
        meta_name = name if mod_centers is None else f"{name}@{mod_centers[m]:.1f}Hz"
        out.append(MatrixArtifact(meta_name, mat, axes, digest=digest))
    return out


def cmd_analyze(args) -> int:
    cfg = resolve_config(args)
    cfg, params, _ = _load_params(args, cfg)
    wave = read_wav(args.audio, cfg.sample_rate, cfg.resample_linear)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    win = int(round(cfg.input_seconds * cfg.sample_rate))
    hop = int(round(cfg.analyze_hop * cfg.sample_rate))
    index = {"config_digest": cfg.digest(), "audio": str(args.audio), "windows": []}
    for w, (a, b) in enumerate(_windows(wave.samples.size, win, hop)):
        entry = {"window": w, "start_s": a / cfg.sample_rate, "end_s": b / cfg.sample_rate,
                 "matrices": []}
        for art in analysis_matrices(wave.samples[a:b], params, cfg, a / cfg.sample_rate):
            stem = f"w{w:03d}_{art.name.split('@')[0]}"
            artifacts.write_csv(art, out / f"{stem}.csv", float32=cfg.export_float32)
            artifacts.write_raw(art, out / f"{stem}.bin")
            lo, hi = artifacts.write_pgm(art, out / f"{stem}.pgm")
            entry["matrices"].append({"stem": stem, "name": art.name,
                                      "shape": list(art.values.shape), "db_range": [lo, hi]})
        index["windows"].append(entry)
    (out / "analysis.json").write_text(json.dumps(index, indent=2))
    n = sum(len(e["matrices"]) for e in index["windows"])
    print(f"wrote {n} matrices for {len(index['windows'])} window(s) to {out}")
    return EXIT_OK


def _write_response(path, freqs, db):
    with open(path, "w") as fh:
        fh.write("freq_hz,magnitude_db\n")
        for f, d in zip(freqs, db):
            fh.write(f"{float(f)!r},{float(d)!r}\n")


def _write_impulses(path, taps, digest):
    with open(path, "w") as fh:
        fh.write(f"# config_digest: {digest}\n# rows: filters, columns: taps\n")
        for row in taps:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_summary(path, rows):
    rows = sorted(rows, key=lambda r: (r[3], r[0]))
    with open(path, "w") as fh:
        fh.write("index,f1_hz,f2_hz,center_hz,bandwidth_hz\n")
        for i, f1, f2, c in rows:
            fh.write(f"{i},{f1!r},{f2!r},{c!r},{f2 - f1!r}\n")


def _half_power_band(freqs, db):
    """Contiguous -3 dB region around the response peak."""
    k = int(np.argmax(db))
    lo = k
    while lo > 0 and db[lo - 1] >= -3.0:
        lo -= 1
    hi = k
    while hi < len(db) - 1 and db[hi + 1] >= -3.0:
        hi += 1
    return float(freqs[lo]), float(freqs[hi]), float(freqs[k])


def cmd_filters(args) -> int:
    cfg = resolve_config(args)
    cfg, params, _ = _load_params(args, cfg)
    out = Path(args.out)
    digest = cfg.digest()
    n_points = args.n_points

    tf_dir = out / "tf_response"
    tf_dir.mkdir(parents=True, exist_ok=True)
    cut = params["tf_cutoffs"]
    taps = sinc_kernels(cut, cfg.tf_kernel_len, cfg.window)
    _write_impulses(out / "tf_impulse.csv", taps, digest)
    for k, h in enumerate(taps):
        _write_response(tf_dir / f"filter_{k:03d}.csv",
                        *freq_response(h, n_points, cfg.sample_rate))
    hz = cut * cfg.sample_rate
    _write_summary(out / "tf_summary.csv",
                   [(k, float(a), float(b), float((a + b) / 2)) for k, (a, b) in enumerate(hz)])

    if cfg.front == "modulation":
        mod_dir = out / "mod_response"
        mod_dir.mkdir(exist_ok=True)
        rate = cfg.tf_frame_rate
        if cfg.variant == "sinc":
            h = sinc_kernels(params["mod_cutoffs"], cfg.mod_kernel_len, cfg.window)
        else:
            h = params["mod_taps"]
        if cfg.norm == "weight":
            h = weight_norm(h)
        _write_impulses(out / "mod_impulse.csv", h, digest)
        rows = []
        for m, taps_m in enumerate(h):
            freqs, db = freq_response(taps_m, n_points, rate)
            _write_response(mod_dir / f"filter_{m:03d}.csv", freqs, db)
            if cfg.variant == "sinc":
                a, b = params["mod_cutoffs"][m] * rate
                rows.append((m, float(a), float(b), float((a + b) / 2)))
            else:
                a, b, peak = _half_power_band(freqs, db)
                rows.append((m, a, b, peak))
        _write_summary(out / "mod_summary.csv", rows)
    print(f"wrote filter responses to {out}")
    return EXIT_OK


def _parse_strides(text) -> list[int]:
    if text is None:
        return []
    try:
        strides = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--mod-stride expects integers, got {text!r}") from None
    if not strides or min(strides) < 1:
        raise ConfigError("--mod-stride values must be positive integers")
    return strides


def cmd_train(args) -> int:
    cfg = resolve_config(args, skip=("mod_stride",))
    strides = _parse_strides(args.mod_stride) or [cfg.mod_stride]
    if args.manifest is not None:
        dataset = load_manifest(args.manifest, cfg.sample_rate, cfg.seed, cfg.resample_linear)
    else:
        dataset = make_am_dataset(cfg.seed, cfg.task_n_per_class, cfg.task_rates,
                                  cfg.task_duration, cfg.task_carrier, cfg.sample_rate,
                                  cfg.task_carrier_hz, cfg.tf_frame_rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for stride in strides:
        run_cfg = cfg.override(mod_stride=stride)
        run_dir = out / f"stride_{stride:04d}" if len(strides) > 1 else out
        run_dir.mkdir(parents=True, exist_ok=True)
        save(run_cfg, run_dir / "config.txt")
        t0 = time.process_time()
        state, history = train(run_cfg, dataset)
        test = evaluate(state.params, run_cfg, dataset, dataset.splits["test"])
        artifacts.write_checkpoint(run_dir / "checkpoint.bin", run_cfg, state, dataset.class_names)
        write_history(history, run_dir / "history.csv")
        rec = {
            "run": run_dir.name, "config_digest": run_cfg.digest(), "mod_stride": stride,
            "front": run_cfg.front, "variant": run_cfg.variant, "r1": run_cfg.r1,
            "r2": run_cfg.r2, "norm": run_cfg.norm,
            "epochs_run": history[-1]["epoch"] + 1 if history else 0,
            "best_epoch": state.best_epoch, "test_loss": test["loss"],
            "test_roc_auc": test["roc_auc"], "test_pr_auc": test["pr_auc"],
            "test_accuracy": test["accuracy"], "deterministic": True,
            "cpu_seconds": round(time.process_time() - t0, 3),
        }
        records.append(rec)
        print(json.dumps(rec))
    with open(out / "metrics.jsonl", "a") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    table = read_prediction_table(args.scores, args.labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    overall = write_per_tag_csv(table, out / "per_tag_metrics.csv")
    print(json.dumps({"n": int(table.scores.shape[0]), **overall}))
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modfront", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-config", help="write the default (or overridden) configuration")
    p.add_argument("--out", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_init_config)

    p = sub.add_parser("analyze", help="export TF and modulation matrices for a WAV file")
    p.add_argument("audio", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("filters", help="export impulse and frequency responses")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--n-points", type=int, default=512)
    _add_config_flags(p)
    p.set_defaults(func=cmd_filters)

    p = sub.add_parser("train", help="train on the synthetic AM task or a WAV manifest")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--manifest", type=Path, help="CSV with path,label columns")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-tag and macro ROC-AUC / PR-AUC from CSV files")
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArtifactIOError, InputTooShortError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModFrontError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
