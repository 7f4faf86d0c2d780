import json

import pytest


@pytest.fixture(scope="session")
def tiny_base_model(tmp_path_factory):
    """A randomly initialized byte-level seq2seq model small enough for CPU tests."""
    from transformers import ByT5Tokenizer, T5Config, T5ForConditionalGeneration

    path = tmp_path_factory.mktemp("tiny-base")
    config = T5Config(
        vocab_size=384,
        d_model=64,
        d_kv=8,
        d_ff=128,
        num_layers=2,
        num_decoder_layers=2,
        num_heads=4,
        dropout_rate=0.0,
        decoder_start_token_id=0,
        pad_token_id=0,
        eos_token_id=1,
    )
    import torch

    torch.manual_seed(7)
    model = T5ForConditionalGeneration(config)
    model.save_pretrained(path)
    ByT5Tokenizer().save_pretrained(path)
    return str(path)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def training_examples(n):
    return [
        {
            "input": f"Text: event {i}\n\nContext: Event {i} happened in city{i} in 200{i}.",
            "target": f"location: city{i}; time: 200{i}",
            "passage_id": f"p{i}",
            "event_id": "e0",
        }
        for i in range(n)
    ]
