"""Command-line entry points for the predictability/reading-time toolkit.

Exit codes: 0 success, 2 validation error, 3 model non-convergence.
"""

from __future__ import annotations

import functools
import logging
import sys

import click

from . import corpus, ngram, pipeline, predictors
from .errors import ToolkitError
from .lmm import FitResult, ModelSpec, build_design, fit_lmm

EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3

log = logging.getLogger("readpred")


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ToolkitError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
    return wrapper


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for simulation utilities.")
@click.option("--exclude-line-edges", is_flag=True,
              help="Drop the first and last word of each line.")
@click.option("--smoothing", type=click.Choice(["empirical_logit", "clamp"]),
              default="empirical_logit", show_default=True)
@click.option("--clamp-eps", type=float, default=1e-8, show_default=True)
@click.option("--lenient", is_flag=True, help="Ignore unknown TSV columns.")
@click.pass_context
def main(ctx, seed, exclude_line_edges, smoothing, clamp_eps, lenient):
    """Word predictability toolkit for eye-movement reading-time analysis."""
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    ctx.obj = {
        "seed": seed,
        "policy": corpus.ExclusionPolicy(drop_line_edges=exclude_line_edges),
        "smoothing": predictors.SmoothingConfig(mode=smoothing,
                                                clamp_eps=clamp_eps),
        "lenient": lenient,
    }


@main.command()
@click.argument("words_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
@_handle_errors
def annotate(obj, words_path, output):
    """Compute the derived covariates for words.tsv."""
    words = corpus.load_words(words_path, lenient=obj["lenient"])
    corpus.write_tsv(corpus.annotate_covariates(words), output)
    click.echo(f"annotated {len(words)} words -> {output}")


@main.command()
@click.argument("words_path", type=click.Path(exists=True))
@click.argument("cloze_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
@_handle_errors
def cloze(obj, words_path, cloze_path, output):
    """Estimate cloze predictability and write a preds.tsv file."""
    words = corpus.load_words(words_path, lenient=obj["lenient"])
    table = corpus.load_cloze(cloze_path, words, lenient=obj["lenient"])
    column = predictors.compute_cloze_pred(table, words,
                                           smoothing=obj["smoothing"])
    predictors.export_probs(column, output)
    click.echo(f"cloze column: {len(column.values)} words, "
               f"coverage {column.coverage:.3f} -> {output}")


@main.group("ngram")
def ngram_group():
    """Train or apply the in-repo n-gram predictor."""


@ngram_group.command("train")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--order", type=int, default=5, show_default=True)
@click.option("--mode", default="interpolated_backoff", show_default=True,
              type=click.Choice(["mle", "add_k", "interpolated_backoff"]))
@click.option("--k", type=float, default=1.0, show_default=True)
@click.option("--split-punctuation", is_flag=True)
@click.option("--unk-singletons", is_flag=True)
@_handle_errors
def ngram_train(corpus_path, output, order, mode, k, split_punctuation,
                unk_singletons):
    """Train on a plain-text corpus (one text per line)."""
    with open(corpus_path, encoding="utf-8") as fh:
        texts = [ngram.tokenize(line, split_punctuation=split_punctuation)
                 for line in fh if line.strip()]
    model = ngram.train_ngram(texts, order, ngram.Smoothing(mode=mode, k=k),
                              unk_singletons=unk_singletons)
    ngram.save_model(model, output)
    click.echo(f"trained order-{order} model on {len(texts)} texts "
               f"({len(model.vocab)} types) -> {output}")


@ngram_group.command("score")
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("words_path", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--name", default=None, help="Predictor source name.")
@click.pass_obj
@_handle_errors
def ngram_score(obj, model_path, words_path, output, name):
    """Score the analysis corpus and write a preds.tsv file."""
    model = ngram.load_model(model_path)
    words = corpus.load_words(words_path, lenient=obj["lenient"])
    column = ngram.score_corpus(model, words, source_name=name)
    predictors.export_probs(column, output)
    click.echo(f"scored {len(column.values)} words -> {output}")


@main.command("import-probs")
@click.argument("preds_path", type=click.Path(exists=True))
@click.option("--name", required=True, help="Predictor source name.")
@click.option("--words", "words_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(),
              help="Re-emit the validated, clamped column.")
@click.pass_obj
@_handle_errors
def import_probs(obj, preds_path, name, words_path, output):
    """Validate an externally computed preds.tsv file."""
    words = (corpus.load_words(words_path, lenient=obj["lenient"])
             if words_path else None)
    column = predictors.import_lm_probs(
        preds_path, name, words,
        smoothing=predictors.SmoothingConfig(
            mode="clamp", clamp_eps=obj["smoothing"].clamp_eps),
        lenient=obj["lenient"])
    if output:
        predictors.export_probs(column, output)
    click.echo(f"{name}: {len(column.values)} probabilities, "
               f"coverage {column.coverage:.3f}")


def _load_dataset(obj, words_path, fixations_path, pred_specs):
    words = corpus.load_words(words_path, lenient=obj["lenient"])
    annotated = corpus.annotate_covariates(words)
    fixations = corpus.load_fixations(fixations_path, words,
                                      lenient=obj["lenient"])
    columns = []
    for spec in pred_specs:
        name, _, path = spec.partition("=")
        if not path:
            raise ToolkitError(f"--pred must be name=path, got {spec!r}")
        columns.append(predictors.import_lm_probs(
            path, name, words,
            smoothing=predictors.SmoothingConfig(
                mode="clamp", clamp_eps=obj["smoothing"].clamp_eps),
            lenient=obj["lenient"]))
    return corpus.assemble_dataset(annotated, fixations, columns,
                                   obj["policy"])


@main.command()
@click.option("--words", "words_path", required=True,
              type=click.Path(exists=True))
@click.option("--fixations", "fixations_path", required=True,
              type=click.Path(exists=True))
@click.option("--pred", "pred_specs", multiple=True, metavar="NAME=PATH",
              help="Predictor column to include as a fixed effect.")
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
@_handle_errors
def fit(obj, words_path, fixations_path, pred_specs, output):
    """Fit one mixed model and write the FitResult JSON."""
    dataset = _load_dataset(obj, words_path, fixations_path, pred_specs)
    terms = pipeline.BASELINE_TERMS + dataset.predictor_names
    design = build_design(dataset, ModelSpec(fixed_terms=terms))
    result = fit_lmm(design)
    result.dataset_hash = pipeline.row_set_hash(dataset)
    result.to_json(output)
    click.echo(f"fit: n={result.n} p={result.p} q={result.q} "
               f"aic={result.aic:.1f} -> {output}")
    if not result.converged:
        click.echo("warning: optimizer did not converge", err=True)
        sys.exit(EXIT_NONCONVERGENCE)


@main.command()
@click.option("--words", "words_path", required=True,
              type=click.Path(exists=True))
@click.option("--fixations", "fixations_path", required=True,
              type=click.Path(exists=True))
@click.option("--cloze-preds", "cloze_path", required=True,
              type=click.Path(exists=True),
              help="preds.tsv with the cloze probabilities.")
@click.option("--pred", "pred_specs", multiple=True, metavar="NAME=PATH")
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Output TSV path; a .md twin is written alongside.")
@click.pass_obj
@_handle_errors
def compare(obj, words_path, fixations_path, cloze_path, pred_specs, output):
    """Fit the baseline plus one model per predictor and render the report."""
    specs = [f"cloze={cloze_path}"] + list(pred_specs)
    dataset = _load_dataset(obj, words_path, fixations_path, specs)
    report = pipeline.compare(dataset, dataset.predictor_names, cloze="cloze")
    md_path = str(output).rsplit(".", 1)[0] + ".md"
    pipeline.render_report(report, tsv_path=output, md_path=md_path)
    click.echo(f"report ({len(report.labels)} models) -> {output}, {md_path}")


@main.command()
@click.option("--fit", "fit_path", required=True, type=click.Path(exists=True),
              help="FitResult JSON from the fit command.")
@click.option("--words", "words_path", required=True,
              type=click.Path(exists=True))
@click.option("--fixations", "fixations_path", required=True,
              type=click.Path(exists=True))
@click.option("--cloze-preds", "cloze_path", required=True,
              type=click.Path(exists=True))
@click.pass_obj
@_handle_errors
def remef(obj, fit_path, words_path, fixations_path, cloze_path):
    """Residual-overlap t-value of cloze for a stored fit."""
    import numpy as np

    result = FitResult.from_json(
        open(fit_path, encoding="utf-8").read())
    dataset = _load_dataset(obj, words_path, fixations_path,
                            [f"cloze={cloze_path}"])
    if (result.dataset_hash is not None
            and result.dataset_hash != pipeline.row_set_hash(dataset)):
        raise ToolkitError("stored fit was computed on a different row set")
    terms = [c for c in result.column_names if c != "(Intercept)"]
    design = build_design(dataset, ModelSpec(fixed_terms=terms))
    if not np.allclose(design.y - design.X @ result.beta,
                       design.y - result.fitted_fixed, atol=1e-8):
        raise ToolkitError("stored coefficients do not match the rebuilt design")
    t = pipeline.remef_cloze(result, design,
                             dataset.data["cloze"].to_numpy(dtype=float))
    click.echo(f"cloze remef t = {t:.2f}")


@main.command()
@click.argument("report_tsv", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Markdown output path.")
@_handle_errors
def report(report_tsv, output):
    """Re-render a TSV report as Markdown."""
    import pandas as pd

    frame = pd.read_csv(report_tsv, sep="\t", index_col=0, dtype=str)
    header = ["Co-variable"] + list(frame.columns)
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(["---"] * len(header)) + "|"]
    for row in frame.index:
        lines.append("| " + " | ".join([str(row)] + list(frame.loc[row])) + " |")
    with open(output, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(f"markdown -> {output}")


@main.command()
@click.option("--participants", type=int, default=30, show_default=True)
@click.option("--words", "n_words", type=int, default=100, show_default=True)
@click.option("--rows", type=int, default=None)
@click.option("--pred-effect", type=float, default=-0.05, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_obj
@_handle_errors
def simulate(obj, participants, n_words, rows, pred_effect, output):
    """Write a synthetic analysis dataset (TSV) for smoke tests."""
    from .simulate import make_crossed_dataset

    dataset = make_crossed_dataset(participants, n_words, rows,
                                   pred_effect=pred_effect, seed=obj["seed"])
    corpus.write_tsv(dataset.data, output)
    click.echo(f"simulated {dataset.n} rows -> {output}")


if __name__ == "__main__":
    main()
