"""Modulation-stride sweep on the synthetic AM task.

Trains one model per stride through the ``modfront train`` command and prints
a small table of test metrics.  Extra arguments are passed to the command,
e.g. ``--epochs 20 --variant fir``.
"""

import argparse
import json
import sys
from pathlib import Path

from modfront.cli import main as cli_main


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/stride_sweep"))
    p.add_argument("--strides", default="32,160,320")
    args, extra = p.parse_known_args()
    code = cli_main(["train", "--out", str(args.out), "--mod-stride", args.strides, *extra])
    if code:
        sys.exit(code)
    print(f"{'stride':>7} {'frames/s':>9} {'roc_auc':>8} {'pr_auc':>8} {'acc':>6} {'cpu s':>7}")
    lines = (args.out / "metrics.jsonl").read_text().splitlines()
    for rec in map(json.loads, lines[-len(args.strides.split(",")):]):
        rate = 1600.0 / rec["mod_stride"]
        print(f"{rec['mod_stride']:>7} {rate:>9.2f} {rec['test_roc_auc']:>8.3f} "
              f"{rec['test_pr_auc']:>8.3f} {rec['test_accuracy']:>6.3f} {rec['cpu_seconds']:>7.1f}")


if __name__ == "__main__":
    main()
