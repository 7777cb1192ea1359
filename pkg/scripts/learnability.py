"""Train SincModNet and the max-pool baseline on the two-class AM task.

Writes one JSON record per front-end mode to stdout (and ``--out`` if given).
"""

import argparse
import json
import logging
import time

from modfront.config import Config
from modfront.learn.data import make_am_dataset
from modfront.learn.train import evaluate, train


def run(front: str, epochs: int = 50, seed: int = 0) -> dict:
    cfg = Config(front=front, seed=seed)
    ds = make_am_dataset(cfg.seed, cfg.task_n_per_class, cfg.task_rates, cfg.task_duration,
                         cfg.task_carrier, cfg.sample_rate, cfg.task_carrier_hz, cfg.tf_frame_rate)
    t0 = time.process_time()
    state, history = train(cfg, ds, epochs=epochs)
    test = evaluate(state.params, cfg, ds, ds.splits["test"])
    return {
        "front": front,
        "epochs_run": history[-1]["epoch"] + 1,
        "best_epoch": state.best_epoch,
        "test_accuracy": test["accuracy"],
        "test_roc_auc": test["roc_auc"],
        "test_pr_auc": test["pr_auc"],
        "test_loss": test["loss"],
        "cpu_seconds": round(time.process_time() - t0, 1),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--front", choices=["modulation", "maxpool", "both"], default="both")
    p.add_argument("--out", help="JSON-lines file to append results to")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    fronts = ["modulation", "maxpool"] if args.front == "both" else [args.front]
    for front in fronts:
        rec = run(front, args.epochs, args.seed)
        print(json.dumps(rec), flush=True)
        if args.out:
            with open(args.out, "a") as fh:
                fh.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
