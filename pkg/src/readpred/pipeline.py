"""Experiment orchestration: baseline and predictor models, dAIC, residual overlap."""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .corpus import AnalysisDataset, COVARIATE_COLUMNS
from .errors import ValidationError
from .lmm import (DesignMatrices, FitResult, ModelSpec, OptimizerConfig,
                  build_design, fit_lmm, remove_fixed_effects)
from .predictors import PredictorColumn

BASELINE_TERMS = list(COVARIATE_COLUMNS)

# Display labels for the report rows, in table order.
ROW_LABELS = {
    "saccade_distance": "Saccadic Dist.",
    "inv_length": "Length (inv)",
    "log_freq": "Frequency (log)",
    "rel_pos_line": "Rel pos line",
    "rel_pos_text": "Rel pos text",
    "rel_pos_sentence": "Rel pos sntc",
    "len_freq_interaction": "Len:Freq",
}


def dataset_hash(design: DesignMatrices) -> str:
    """Digest of the row keys plus covariate names; identifies the row set."""
    h = hashlib.sha256()
    if design.row_keys is not None:
        keys = design.row_keys[np.lexsort(design.row_keys.T[::-1])]
        h.update(np.ascontiguousarray(keys).tobytes())
    h.update("|".join(design.column_names[:1] + sorted(
        design.column_names[1:])).encode())
    return h.hexdigest()


def row_set_hash(dataset: AnalysisDataset) -> str:
    """Digest of just the (participant_id, word_id) row multiset."""
    keys = dataset.data[["participant_id", "word_id"]].to_numpy()
    keys = keys[np.lexsort(keys.T[::-1])]
    return hashlib.sha256(np.ascontiguousarray(keys).tobytes()).hexdigest()


def _fit(dataset: AnalysisDataset, terms: list[str],
         optimizer: OptimizerConfig | None = None) -> tuple[FitResult, DesignMatrices]:
    design = build_design(dataset, ModelSpec(fixed_terms=terms))
    fit = fit_lmm(design, optimizer)
    fit.dataset_hash = row_set_hash(dataset)
    return fit, design


def run_baseline(dataset: AnalysisDataset,
                 optimizer: OptimizerConfig | None = None) -> FitResult:
    """Fit the baseline model: the seven non-predictability covariates."""
    fit, _ = _fit(dataset, BASELINE_TERMS, optimizer)
    return fit


def run_with_predictor(dataset: AnalysisDataset, column_name: str,
                       optimizer: OptimizerConfig | None = None) -> FitResult:
    """Fit baseline plus one predictor logit column already in the dataset."""
    if column_name not in dataset.data.columns:
        raise ValidationError(f"predictor column {column_name!r} not present")
    fit, _ = _fit(dataset, BASELINE_TERMS + [column_name], optimizer)
    return fit


def delta_aic(fit: FitResult, baseline_fit: FitResult) -> float:
    """AIC difference against the baseline; both fits must share the row set."""
    if (fit.dataset_hash is not None and baseline_fit.dataset_hash is not None
            and fit.dataset_hash != baseline_fit.dataset_hash):
        raise ValidationError(
            "cannot compare fits from different datasets (row-set hash mismatch)")
    return fit.aic - baseline_fit.aic


def remef_cloze(fit: FitResult, design: DesignMatrices,
                cloze: PredictorColumn | np.ndarray,
                optimizer: OptimizerConfig | None = None) -> float:
    """Residual-overlap t-value for cloze predictability.

    Removes the estimated fixed effects from the response, then fits a fresh
    mixed model on those residuals with intercept plus the cloze logit and
    the same random-intercept factors, and returns the cloze t-value.
    """
    resid = remove_fixed_effects(fit, design)
    if isinstance(cloze, PredictorColumn):
        if design.row_keys is None:
            raise ValidationError("design carries no word ids to join cloze on")
        word_ids = design.row_keys[:, 1]
        vals = np.array([cloze.logits.get(int(w), np.nan) for w in word_ids])
        if np.isnan(vals).any():
            raise ValidationError("cloze column does not cover the row set")
    else:
        vals = np.asarray(cloze, dtype=float)
        if len(vals) != design.n:
            raise ValidationError("cloze vector length does not match design")
    X2 = np.column_stack([np.ones(design.n), vals])
    sub = DesignMatrices(resid, X2, ["(Intercept)", "cloze"],
                         design.groupings, design.row_keys)
    refit = fit_lmm(sub, optimizer)
    return float(refit.t[1])


@dataclass
class ComparisonReport:
    """Tables 1/2-shaped summary: one column per model, shared covariate rows."""

    covariate_terms: list[str]
    labels: list[str]
    t_by_model: dict[str, dict[str, float]]
    pred_t: dict[str, float | None]
    delta_aic: dict[str, float]
    cloze_remef_t: dict[str, float | None]
    metadata: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        rows = [ROW_LABELS.get(c, c) for c in self.covariate_terms]
        rows += ["Pred (logit)", "dAIC", "Cloze-Remef"]
        out = {}
        for label in self.labels:
            col = [self.t_by_model[label].get(c) for c in self.covariate_terms]
            col.append(self.pred_t.get(label))
            col.append(self.delta_aic.get(label))
            col.append(self.cloze_remef_t.get(label))
            out[label] = col
        return pd.DataFrame(out, index=pd.Index(rows, name="Co-variable"))


def compare(dataset: AnalysisDataset, predictor_names: list[str],
            cloze: PredictorColumn | str | None = None,
            optimizer: OptimizerConfig | None = None) -> ComparisonReport:
    """Run the whole model-comparison experiment on one dataset.

    Fits the baseline, one model per predictor column, dAIC against the
    baseline, and (when a cloze column is available) the residual-overlap
    t for every model including the baseline.
    """
    base_design = build_design(dataset, ModelSpec(fixed_terms=BASELINE_TERMS))
    base_fit = fit_lmm(base_design, optimizer)
    base_fit.dataset_hash = row_set_hash(dataset)

    cloze_vec = None
    if cloze is not None:
        if isinstance(cloze, str):
            cloze_vec = dataset.data[cloze].to_numpy(dtype=float)
        else:
            word_ids = dataset.data["word_id"].to_numpy()
            cloze_vec = np.array([cloze.logits.get(int(w), np.nan)
                                  for w in word_ids])
            if np.isnan(cloze_vec).any():
                raise ValidationError("cloze column does not cover the row set")

    labels = ["M0"] + [f"M0+{name}" for name in predictor_names]
    t_by_model: dict[str, dict[str, float]] = {}
    pred_t: dict[str, float | None] = {}
    daic: dict[str, float] = {}
    remef: dict[str, float | None] = {}

    def record(label, fit, design, pred_name=None):
        t_by_model[label] = {
            term: float(fit.t[design.column_names.index(term)])
            for term in BASELINE_TERMS}
        pred_t[label] = (float(fit.t[design.column_names.index(pred_name)])
                         if pred_name else None)
        daic[label] = delta_aic(fit, base_fit)
        remef[label] = (remef_cloze(fit, design, cloze_vec, optimizer)
                        if cloze_vec is not None else None)

    record("M0", base_fit, base_design)
    for name in predictor_names:
        design = build_design(dataset,
                              ModelSpec(fixed_terms=BASELINE_TERMS + [name]))
        fit = fit_lmm(design, optimizer)
        fit.dataset_hash = row_set_hash(dataset)
        record(f"M0+{name}", fit, design, pred_name=name)

    return ComparisonReport(
        covariate_terms=list(BASELINE_TERMS),
        labels=labels,
        t_by_model=t_by_model, pred_t=pred_t, delta_aic=daic,
        cloze_remef_t=remef,
        metadata={"n": dataset.n,
                  "exclusion_log": dict(dataset.exclusion_log),
                  "dataset_hash": row_set_hash(dataset)})


def _format_cell(row_label: str, value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "--"
    if row_label == "dAIC":
        return str(int(round(value)))
    return f"{value:.2f}"


def render_report(report: ComparisonReport, tsv_path: str | Path | None = None,
                  md_path: str | Path | None = None) -> str:
    """Emit the comparison table as TSV (and optionally Markdown).

    t-values print with 2 decimals, dAIC as an integer; returns the TSV text.
    """
    if not report.labels:
        raise ValidationError("report has no model columns")
    frame = report.to_frame()
    formatted = frame.copy().astype(object)
    for row in frame.index:
        formatted.loc[row] = [_format_cell(row, v) for v in frame.loc[row]]

    buf = io.StringIO()
    formatted.to_csv(buf, sep="\t")
    tsv_text = buf.getvalue()
    if tsv_path is not None:
        Path(tsv_path).write_text(tsv_text, encoding="utf-8")
    if md_path is not None:
        header = ["Co-variable"] + list(formatted.columns)
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join(["---"] * len(header)) + "|"]
        for row in formatted.index:
            cells = [str(row)] + [str(v) for v in formatted.loc[row]]
            lines.append("| " + " | ".join(cells) + " |")
        Path(md_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return tsv_text


def parse_report_tsv(text: str) -> pd.DataFrame:
    """Re-read a rendered TSV report into a frame of floats (-- becomes NaN)."""
    frame = pd.read_csv(io.StringIO(text), sep="\t", index_col=0)
    return frame.apply(pd.to_numeric, errors="coerce")
