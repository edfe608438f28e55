#!/usr/bin/env python3
"""Run the full synthetic statistics recipe end to end.

Generates a corpus with a planted total-variability subspace, trains the
subspace on the training split, extracts i-vectors, fits the
discriminant projection and the PLDA backend, scores the trial list and
prints the evaluation report.

Example:
    python3 scripts/run_synthetic_pipeline.py --workspace /tmp/ivnda-demo
"""

import argparse
import sys
from pathlib import Path

from ivnda.cli import main as ivnda


def run(argv: list) -> None:
    argv = [str(a) for a in argv]
    print("+ ivnda " + " ".join(argv))
    rc = ivnda(argv)
    if rc != 0:
        sys.exit(rc)


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workspace", required=True, type=Path)
    parser.add_argument("--seed", type=int, default=910)
    parser.add_argument("--train-speakers", type=int, default=50)
    parser.add_argument("--train-sessions", type=int, default=10)
    parser.add_argument("--eval-speakers", type=int, default=25)
    parser.add_argument("--eval-sessions", type=int, default=4)
    parser.add_argument("--rank", type=int, default=16)
    parser.add_argument("--tv-iters", type=int, default=10)
    parser.add_argument("--method", choices=("nda", "lda"), default="nda")
    parser.add_argument("--k", type=int, default=9)
    parser.add_argument("--alpha", type=float, default=2.0)
    parser.add_argument("--dim", type=int, default=8)
    return parser.parse_args()


def main() -> None:
    args = parse_args()
    ws = args.workspace
    run(
        [
            "synth", "--mode", "stats", "--out-dir", ws, "--seed", args.seed,
            "--train-speakers", args.train_speakers,
            "--train-sessions", args.train_sessions,
            "--eval-speakers", args.eval_speakers,
            "--eval-sessions", args.eval_sessions,
            "--rank", args.rank,
        ]
    )
    run(
        [
            "train-tv", "--stats", ws / "train.ivbw", "--ubm", ws / "ubm.ivgm",
            "--out", ws / "tv.ivtv", "--rank", args.rank,
            "--iters", args.tv_iters, "--seed", args.seed,
        ]
    )
    for split in ("train", "enroll", "test"):
        run(
            [
                "extract-ivectors", "--stats", ws / f"{split}.ivbw",
                "--ubm", ws / "ubm.ivgm", "--tv", ws / "tv.ivtv",
                "--out", ws / f"{split}.iviv",
            ]
        )
    da_args = [
        "train-da", "--ivectors", ws / "train.iviv",
        "--manifest", ws / "train.manifest", "--out", ws / "proj.ivda",
        "--method", args.method, "--dim", args.dim,
    ]
    if args.method == "nda":
        da_args += ["--k", args.k, "--alpha", args.alpha]
    run(da_args)
    run(
        [
            "train-plda", "--ivectors", ws / "train.iviv",
            "--manifest", ws / "train.manifest", "--projection", ws / "proj.ivda",
            "--out", ws / "plda.ivpl", "--normalizer-out", ws / "norm.ivnz",
        ]
    )
    run(
        [
            "score", "--enroll", ws / "enroll.iviv", "--test", ws / "test.iviv",
            "--trials", ws / "trials.txt", "--projection", ws / "proj.ivda",
            "--normalizer", ws / "norm.ivnz", "--plda", ws / "plda.ivpl",
            "--out", ws / "scores.txt",
        ]
    )
    run(
        [
            "evaluate", "--scores", ws / "scores.txt", "--key", ws / "key.txt",
            "--det-csv", ws / "det.csv", "--det-svg", ws / "det.svg",
        ]
    )


if __name__ == "__main__":
    main()
