"""Fine-tune a text-to-text transformer on (input, target) JSONL pairs and
emit decoded predictions in the kit's prediction format.

A thin, replaceable adapter: it communicates with the rest of the toolkit
only through files and never parses or scores decoded output itself.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader
from transformers import AutoModelForSeq2SeqLM, AutoTokenizer


@dataclass(frozen=True)
class TrainSpec:
    """Fine-tuning settings; the defaults are the reference configuration."""

    base_model: str = "t5-base"
    steps: int = 10_000
    learning_rate: float = 3e-5
    weight_decay: float = 0.1
    batch_size: int = 4
    seed: int = 0
    max_input_length: int = 512
    max_target_length: int = 128

    def __post_init__(self) -> None:
        if self.steps <= 0 or self.batch_size <= 0:
            raise ValueError("steps and batch_size must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be positive, weight_decay non-negative")
        if self.max_input_length <= 0 or self.max_target_length <= 0:
            raise ValueError("sequence length limits must be positive")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON record: {exc}") from exc
    return records


def _load_pretrained(name_or_path: str):
    try:
        tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        model = AutoModelForSeq2SeqLM.from_pretrained(name_or_path)
    except (OSError, ValueError) as exc:
        raise RuntimeError(f"cannot load base model '{name_or_path}': {exc}") from exc
    return tokenizer, model


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    torch.manual_seed(seed)


def _find_overlong(tokenizer, records: list[dict], limit: int) -> list[dict]:
    """Examples whose tokenized input exceeds the model window.

    These are reported, then truncated; silent truncation could cut away the
    event mention itself.
    """
    overlong = []
    for record in records:
        length = len(tokenizer(record["input"]).input_ids)
        if length > limit:
            overlong.append(
                {
                    "passage_id": record.get("passage_id", ""),
                    "event_id": record.get("event_id", ""),
                    "tokens": length,
                    "limit": limit,
                }
            )
    return overlong


def finetune(train_file: str | Path, spec: TrainSpec, output_dir: str | Path) -> Path:
    """Train for spec.steps optimizer steps and save a model artifact.

    Writes the checkpoint, a per-step loss curve (losses.csv), and a
    train_report.json with the settings and any overlong examples.
    """
    records = [r for r in read_jsonl(train_file) if r.get("input")]
    if not records:
        raise ValueError(f"training file {train_file} is empty")
    for record in records:
        if "target" not in record:
            raise ValueError("training records need both 'input' and 'target'")

    _seed_everything(spec.seed)
    tokenizer, model = _load_pretrained(spec.base_model)
    model.train()

    overlong = _find_overlong(tokenizer, records, spec.max_input_length)
    for item in overlong:
        print(
            f"warning: input for ({item['passage_id']}, {item['event_id']}) has "
            f"{item['tokens']} tokens, over the {item['limit']} limit; truncating"
        )

    def collate(batch: list[dict]):
        enc = tokenizer(
            [r["input"] for r in batch],
            padding=True,
            truncation=True,
            max_length=spec.max_input_length,
            return_tensors="pt",
        )
        labels = tokenizer(
            text_target=[r["target"] for r in batch],
            padding=True,
            truncation=True,
            max_length=spec.max_target_length,
            return_tensors="pt",
        ).input_ids
        labels[labels == tokenizer.pad_token_id] = -100
        return enc.input_ids, enc.attention_mask, labels

    generator = torch.Generator().manual_seed(spec.seed)
    loader = DataLoader(
        records,
        batch_size=spec.batch_size,
        shuffle=True,
        generator=generator,
        collate_fn=collate,
    )

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=spec.learning_rate, weight_decay=spec.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: max(0.0, (spec.steps - step) / spec.steps)
    )

    losses: list[float] = []
    log_every = max(1, spec.steps // 20)
    step = 0
    while step < spec.steps:
        for input_ids, attention_mask, labels in loader:
            if step >= spec.steps:
                break
            loss = model(
                input_ids=input_ids, attention_mask=attention_mask, labels=labels
            ).loss
            loss.backward()
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            losses.append(loss.item())
            if step % log_every == 0 or step == spec.steps - 1:
                print(f"step {step}: loss {loss.item():.4f}")
            step += 1

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(output_dir)
    tokenizer.save_pretrained(output_dir)
    with open(output_dir / "losses.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        writer.writerows(enumerate(losses))
    report = {
        "spec": asdict(spec),
        "examples": len(records),
        "overlong_examples": overlong,
        "first_loss": losses[0],
        "last_loss": losses[-1],
    }
    (output_dir / "train_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    return output_dir


def predict(
    model_path: str | Path,
    eval_file: str | Path,
    output_file: str | Path,
    batch_size: int = 8,
    max_input_length: int = 512,
    max_new_tokens: int = 128,
    seed: int = 0,
) -> Path:
    """Greedy-decode one prediction per eval record.

    Output is JSONL {passage_id, event_id, decoded}; decoded strings are
    written verbatim for the kit to parse.
    """
    model_path = Path(model_path)
    if not model_path.exists():
        raise RuntimeError(f"model artifact not found at {model_path}")
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_path)
        model = AutoModelForSeq2SeqLM.from_pretrained(model_path)
    except (OSError, ValueError) as exc:
        raise RuntimeError(f"cannot load model artifact at {model_path}: {exc}") from exc

    records = read_jsonl(eval_file)
    for record in records:
        if "input" not in record:
            raise ValueError("eval records need an 'input' field")

    _seed_everything(seed)
    model.eval()
    decoded_all: list[str] = []
    with torch.no_grad():
        for start in range(0, len(records), batch_size):
            batch = records[start : start + batch_size]
            enc = tokenizer(
                [r["input"] for r in batch],
                padding=True,
                truncation=True,
                max_length=max_input_length,
                return_tensors="pt",
            )
            out = model.generate(
                input_ids=enc.input_ids,
                attention_mask=enc.attention_mask,
                max_new_tokens=max_new_tokens,
                num_beams=1,
                do_sample=False,
            )
            decoded_all.extend(tokenizer.batch_decode(out, skip_special_tokens=True))

    output_file = Path(output_file)
    with open(output_file, "w", encoding="utf-8") as fh:
        for record, decoded in zip(records, decoded_all):
            fh.write(
                json.dumps(
                    {
                        "passage_id": record.get("passage_id", ""),
                        "event_id": record.get("event_id", ""),
                        "decoded": decoded,
                    },
                    ensure_ascii=False,
                )
            )
            fh.write("\n")
    return output_file
