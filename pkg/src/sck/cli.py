"""Command-line entry point: deterministic, scriptable subcommands.

Exit codes: 0 success, 1 validation failure, 2 usage error. All randomness
flows from --seed; API credentials come only from SCK_LLM_API_KEY.
"""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import analysis, augment, baselines, ingest, promptgen, scoring
from .core import read_passages_jsonl, write_passages_jsonl


@dataclass(frozen=True)
class RunConfig:
    """Bundled settings for LLM-backed subcommands."""

    provider_url: str
    model_name: str
    parallelism: int = 1
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: int = 0

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not self.provider_url:
            raise ValueError("provider URL is required")

    def client(self) -> augment.HttpChatClient:
        return augment.HttpChatClient(self.provider_url)


def _fail_on_error(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValueError, OSError, augment.ChatError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


def _echo_diagnostics(diagnostics) -> None:
    for line in diagnostics:
        click.echo(f"warning: {line}", err=True)


def _emit(payload: dict, as_json: bool, table: str | None = None) -> None:
    if as_json or table is None:
        click.echo(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        click.echo(table)


_llm_options = [
    click.option("--provider-url", required=True, help="Chat-completions base URL."),
    click.option("--model", "model_name", required=True, help="Model name to request."),
    click.option("--parallelism", default=1, show_default=True, type=click.IntRange(min=1)),
    click.option("--temperature", default=0.7, show_default=True, type=click.FloatRange(0, 2)),
    click.option("--max-tokens", default=1024, show_default=True, type=int),
]


def llm_options(func):
    for option in reversed(_llm_options):
        func = option(func)
    return func


@click.group()
@click.version_option(package_name="scenario-context-kit")
def main() -> None:
    """Scenario-context data toolkit: ingest, augment, score."""


@main.command("ingest")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option(
    "--format",
    "source_format",
    type=click.Choice(["labelstudio", "markup"]),
    default="labelstudio",
    show_default=True,
)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Override the pinned LabelStudio field mapping.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable summary.")
@_fail_on_error
def ingest_cmd(input_path, output_path, source_format, config_path, as_json):
    """Convert an annotation export into canonical passage JSONL."""
    raw = Path(input_path).read_bytes()
    if source_format == "labelstudio":
        config = ingest.load_labelstudio_config(config_path)
        passages, diagnostics = ingest.parse_labelstudio_export(raw, config)
    else:
        passages = []
        diagnostics = []
        for chunk in ingest.split_markup_passages(raw.decode("utf-8")):
            try:
                passages.append(ingest.parse_markup_passage(chunk))
            except ingest.MarkupError as exc:
                diagnostics.append(str(exc))
    write_passages_jsonl(output_path, passages)
    _echo_diagnostics(diagnostics)
    summary = {
        "passages": len(passages),
        "relations": sum(len(p.relations) for p in passages),
        "skipped": len(diagnostics),
        "output": str(output_path),
    }
    _emit(summary, as_json, f"wrote {summary['passages']} passages "
                            f"({summary['relations']} relations) to {output_path}")


@main.command("stats")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def stats_cmd(input_path, as_json):
    """Corpus statistics: relation counts and sentence distances."""
    passages = read_passages_jsonl(input_path)
    stats = ingest.corpus_stats(passages)
    table = "\n".join(
        [
            f"passages:                 {stats.passage_count}",
            f"relations:                {stats.relation_count}",
            f"  location:               {stats.location_relations}",
            f"  temporal:               {stats.temporal_relations}",
            f"intersentential fraction: {stats.intersentential_fraction:.3f}",
            "distance histogram:       "
            + ", ".join(f"{k}: {v}" for k, v in stats.distance_histogram.items()),
        ]
    )
    _emit(ingest.stats_to_dict(stats), as_json, table)


@main.command("split")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train-output", required=True, type=click.Path(dir_okay=False))
@click.option("--test-output", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--test-fraction", default=0.2, show_default=True,
              type=click.FloatRange(0, 1, min_open=True, max_open=True))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def split_cmd(input_path, train_output, test_output, seed, test_fraction, as_json):
    """Deterministic passage-level train/test split by relation fraction."""
    passages = read_passages_jsonl(input_path)
    split = ingest.split_dataset(passages, seed=seed, test_fraction=test_fraction)
    write_passages_jsonl(train_output, split.train)
    write_passages_jsonl(test_output, split.test)
    summary = {
        "seed": seed,
        "test_fraction": test_fraction,
        "train_passages": len(split.train),
        "test_passages": len(split.test),
        "train_relations": sum(len(p.relations) for p in split.train),
        "test_relations": sum(len(p.relations) for p in split.test),
    }
    _emit(summary, as_json,
          f"train: {summary['train_passages']} passages / {summary['train_relations']} relations\n"
          f"test:  {summary['test_passages']} passages / {summary['test_relations']} relations")


@main.command("emit-training")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def emit_training_cmd(input_path, output_path, as_json):
    """Serialize passages into (input, target) training pairs."""
    passages = read_passages_jsonl(input_path)
    pairs = promptgen.training_pairs(passages)
    promptgen.write_training_jsonl(output_path, pairs)
    _emit({"pairs": len(pairs), "output": str(output_path)}, as_json,
          f"wrote {len(pairs)} training pairs to {output_path}")


@main.command("augment-paraphrase")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--word-swap", "word_swaps", multiple=True, metavar="OLD=NEW",
              help="Explicit word replacement pair; repeatable.")
@llm_options
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def augment_paraphrase_cmd(input_path, output_path, word_swaps, provider_url,
                           model_name, parallelism, temperature, max_tokens, as_json):
    """Paraphrase gold passages with an LLM, keeping relations tracked."""
    config = RunConfig(provider_url, model_name, parallelism, temperature, max_tokens)
    swaps = []
    for raw in word_swaps:
        old, sep, new = raw.partition("=")
        if not sep or not old or not new:
            raise click.UsageError(f"bad --word-swap '{raw}', expected OLD=NEW")
        swaps.append((old, new))
    passages = read_passages_jsonl(input_path)
    variants, diagnostics = augment.paraphrase_corpus(
        passages,
        config.client(),
        model_name=config.model_name,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        word_swaps=swaps or None,
        parallelism=config.parallelism,
    )
    write_passages_jsonl(output_path, variants)
    _echo_diagnostics(diagnostics)
    summary = {
        "variants": len(variants),
        "relations": sum(len(p.relations) for p in variants),
        "discarded_or_warned": len(diagnostics),
    }
    _emit(summary, as_json, f"wrote {summary['variants']} paraphrase passages "
                            f"({summary['relations']} relations) to {output_path}")


@main.command("augment-synthetic")
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--event-type", "event_types", multiple=True, required=True)
@click.option("--names-per-type", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--roles-per-type", default=5, show_default=True, type=click.IntRange(min=1))
@click.option("--length", "lengths", multiple=True, default=("one paragraph",),
              show_default=True)
@click.option("--loc-distractors", default=1, show_default=True, type=click.IntRange(min=0))
@click.option("--tmp-distractors", default=1, show_default=True, type=click.IntRange(min=0))
@llm_options
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def augment_synthetic_cmd(output_path, event_types, names_per_type, roles_per_type,
                          lengths, loc_distractors, tmp_distractors, provider_url,
                          model_name, parallelism, temperature, max_tokens, as_json):
    """Procedurally generate synthetic passages with planted markup."""
    config = RunConfig(provider_url, model_name, parallelism, temperature, max_tokens)
    plan = augment.GenerationPlan(
        event_types=tuple(event_types),
        names_per_type=names_per_type,
        roles_per_type=roles_per_type,
        lengths=tuple(lengths),
        loc_distractors=loc_distractors,
        tmp_distractors=tmp_distractors,
    )
    passages, diagnostics = augment.generate_synthetic(
        plan,
        config.client(),
        model_name=config.model_name,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        parallelism=config.parallelism,
    )
    write_passages_jsonl(output_path, passages)
    _echo_diagnostics(diagnostics)
    summary = {
        "passages": len(passages),
        "relations": sum(len(p.relations) for p in passages),
        "discarded_or_warned": len(diagnostics),
    }
    _emit(summary, as_json, f"wrote {summary['passages']} synthetic passages "
                            f"({summary['relations']} relations) to {output_path}")


@main.command("predict-parse")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def predict_parse_cmd(input_path, output_path, as_json):
    """Parse decoded model output strings into context-set records."""
    records = scoring.read_predictions_jsonl(input_path)
    scoring.write_predictions_jsonl(output_path, records)
    invalid = sum(1 for r in records if not r.valid_parse)
    _emit({"records": len(records), "invalid_parses": invalid}, as_json,
          f"parsed {len(records)} records ({invalid} invalid) into {output_path}")


@main.command("score")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the JSON report to this path.")
@click.option("--restrict-to-annotated", is_flag=True,
              help="Average each type only over events with gold contexts of that type.")
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def score_cmd(gold_path, pred_path, report_path, restrict_to_annotated, as_json):
    """Span- and token-level scores, macro-averaged over events."""
    gold = read_passages_jsonl(gold_path)
    preds = scoring.read_predictions_jsonl(pred_path)
    report = scoring.score_dataset(gold, preds, restrict_to_annotated=restrict_to_annotated)
    _echo_diagnostics(report.diagnostics)
    payload = scoring.report_to_dict(report)
    if report_path:
        Path(report_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _emit(payload, as_json, scoring.format_report_table(report))


@main.command("baseline-llm")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@llm_options
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def baseline_llm_cmd(gold_path, output_path, provider_url, model_name,
                     parallelism, temperature, max_tokens, as_json):
    """Zero-shot LLM predictions for every gold event."""
    config = RunConfig(provider_url, model_name, parallelism, temperature, max_tokens)
    gold = read_passages_jsonl(gold_path)
    records, diagnostics = baselines.run_llm_baseline(
        gold,
        config.client(),
        model_name=config.model_name,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        parallelism=config.parallelism,
    )
    scoring.write_predictions_jsonl(output_path, records)
    _echo_diagnostics(diagnostics)
    flagged = sum(1 for r in records if not r.valid_parse)
    _emit({"records": len(records), "flagged": flagged}, as_json,
          f"wrote {len(records)} predictions ({flagged} flagged) to {output_path}")


@main.command("baseline-srl")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--parses", "parses_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def baseline_srl_cmd(gold_path, parses_path, as_json):
    """Score the SRL argument-containment baseline against gold relations."""
    gold = read_passages_jsonl(gold_path)
    parses = baselines.read_srl_parses(parses_path)
    result = baselines.score_srl_baseline(gold, parses)
    payload = {
        t.value: {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}
        for t, prf in result.items()
    }
    table = "\n".join(
        f"{t.value:<10}P {prf.precision:.3f}  R {prf.recall:.3f}  F1 {prf.f1:.3f}"
        for t, prf in result.items()
    )
    _emit(payload, as_json, table)


@main.command("errors")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def errors_cmd(gold_path, pred_path, as_json):
    """Prediction error taxonomy broken down by context type."""
    gold = read_passages_jsonl(gold_path)
    preds = scoring.read_predictions_jsonl(pred_path)
    report = analysis.error_report(gold, preds)
    _echo_diagnostics(report.diagnostics)
    _emit(analysis.error_report_to_dict(report), as_json, analysis.format_error_table(report))


@main.command("kappa")
@click.option("--items", "items_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def kappa_cmd(items_path, as_json):
    """Cohen's kappa over doubly-annotated items."""
    items = analysis.read_agreement_items(items_path)
    summary = analysis.agreement_summary(items)
    _emit(summary, as_json,
          f"kappa: {summary['kappa']:.4f}  (items: {summary['items']}, "
          f"observed: {summary['observed_agreement']:.4f}, "
          f"chance: {summary['chance_agreement']:.4f})")


@main.command("distances")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Also write plot data (distance, count).")
@click.option("--json", "as_json", is_flag=True)
@_fail_on_error
def distances_cmd(input_path, csv_path, as_json):
    """Sentence-distance histogram for event-context relations."""
    passages = read_passages_jsonl(input_path)
    histogram = analysis.distance_histogram(passages)
    if csv_path:
        analysis.write_distance_csv(csv_path, histogram)
    payload = analysis.distance_histogram_to_dict(histogram)
    table = "\n".join(
        [
            f"intra-sentential: {histogram.intra}",
            "inter-sentential: "
            + (", ".join(f"{k}: {v}" for k, v in histogram.inter.items()) or "none"),
            f"skipped (no offsets): {histogram.skipped}",
            f"intersentential fraction: {payload['intersentential_fraction']:.3f}",
        ]
    )
    _emit(payload, as_json, table)


if __name__ == "__main__":
    sys.exit(main())
