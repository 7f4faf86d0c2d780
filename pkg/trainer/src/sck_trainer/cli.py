"""Command-line interface mirroring the TrainSpec fields."""

from __future__ import annotations

import argparse
import sys

from .trainer import TrainSpec, finetune, predict


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sck-trainer",
        description="Fine-tune a seq2seq model on scenario-context training pairs "
        "and decode predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("finetune", help="fine-tune from a training JSONL file")
    train.add_argument("--train-file", required=True)
    train.add_argument("--output-dir", required=True)
    train.add_argument("--base-model", default="t5-base")
    train.add_argument("--steps", type=int, default=10_000)
    train.add_argument("--learning-rate", type=float, default=3e-5)
    train.add_argument("--weight-decay", type=float, default=0.1)
    train.add_argument("--batch-size", type=int, default=4)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--max-input-length", type=int, default=512)
    train.add_argument("--max-target-length", type=int, default=128)

    decode = sub.add_parser("predict", help="greedy-decode predictions for an eval JSONL file")
    decode.add_argument("--model", required=True)
    decode.add_argument("--eval-file", required=True)
    decode.add_argument("--output", required=True)
    decode.add_argument("--batch-size", type=int, default=8)
    decode.add_argument("--max-input-length", type=int, default=512)
    decode.add_argument("--max-new-tokens", type=int, default=128)
    decode.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "finetune":
            spec = TrainSpec(
                base_model=args.base_model,
                steps=args.steps,
                learning_rate=args.learning_rate,
                weight_decay=args.weight_decay,
                batch_size=args.batch_size,
                seed=args.seed,
                max_input_length=args.max_input_length,
                max_target_length=args.max_target_length,
            )
            out = finetune(args.train_file, spec, args.output_dir)
            print(f"saved model artifact to {out}")
        else:
            out = predict(
                args.model,
                args.eval_file,
                args.output,
                batch_size=args.batch_size,
                max_input_length=args.max_input_length,
                max_new_tokens=args.max_new_tokens,
                seed=args.seed,
            )
            print(f"wrote predictions to {out}")
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
