"""Seq2seq fine-tuning and batch decoding over the toolkit's JSONL contracts."""

from .trainer import TrainSpec, finetune, predict

__version__ = "0.1.0"

__all__ = ["TrainSpec", "finetune", "predict", "__version__"]
