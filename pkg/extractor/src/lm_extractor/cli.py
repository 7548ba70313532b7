"""Command-line interface: run extraction or verify tokenizer alignment."""

from __future__ import annotations

import logging
import sys

import click

from .alignment import verify_alignment
from .corpus import CorpusError, load_words
from .extract import extract_word_probs, write_preds


@click.group()
@click.option("--verbose", is_flag=True, help="Log per-text details.")
def main(verbose):
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--model", "model_id", required=True, help="Hub id or local model directory.")
@click.option("--words", "words_path", required=True, type=click.Path(exists=True))
@click.option("--out", "-o", "out_path", required=True, type=click.Path())
@click.option("--policy", type=click.Choice(["full", "window"]), default="full", show_default=True)
@click.option("--window", type=int, default=None, help="Context cap for --policy window.")
@click.option("--device", default="cpu", show_default=True)
def run(model_id, words_path, out_path, policy, window, device):
    """Score the corpus and write preds.tsv."""
    try:
        words = load_words(words_path)
        result = extract_word_probs(
            model_id, words, context_policy=policy, window=window, device=device
        )
    except (CorpusError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    write_preds(result, out_path)
    n_flagged = result.n_misaligned
    n_trunc = sum(result.truncated_positions.values())
    click.echo(
        f"wrote {len(result.frame)} rows to {out_path} "
        f"({n_flagged} flagged, {n_trunc} truncated positions, "
        f"{len(result.omitted_word_ids)} text-initial words omitted)"
    )


@main.command()
@click.option("--model", "model_id", required=True, help="Hub id or local tokenizer directory.")
@click.option("--words", "words_path", required=True, type=click.Path(exists=True))
@click.option("--out", "-o", "out_path", default=None, type=click.Path())
def verify(model_id, words_path, out_path):
    """Check token-span round-trip decoding for every word."""
    from transformers import AutoTokenizer

    try:
        words = load_words(words_path)
    except CorpusError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    report = verify_alignment(words, tokenizer)
    if out_path:
        report.to_csv(out_path, sep="\t", index=False)
    bad = report[report["ok"] == 0]
    if len(bad):
        click.echo(f"{len(bad)} misaligned word(s):")
        for _, row in bad.iterrows():
            click.echo(f"  word_id {row['word_id']}: {row['surface']!r} -> {row['decoded']!r}")
    else:
        click.echo("all words align")


if __name__ == "__main__":
    main()
