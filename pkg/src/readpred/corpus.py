"""Corpus tables: words, fixations, cloze responses, and the joined analysis dataset.

All on-disk tables are UTF-8 TSV files with a header row. Surfaces are
NFC-normalized on load so diacritics compare consistently downstream.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ValidationError

log = logging.getLogger(__name__)

WORD_COLUMNS = [
    "word_id",
    "text_id",
    "sentence_idx",
    "line_idx",
    "pos_in_sentence",
    "pos_in_line",
    "pos_in_text",
    "surface",
    "freq_per_million",
]
FIXATION_COLUMNS = ["participant_id", "word_id", "fprt_ms", "saccade_distance"]
CLOZE_COLUMNS = ["word_id", "response"]

# Covariates every analysis row must carry besides the attached predictors.
COVARIATE_COLUMNS = [
    "saccade_distance",
    "inv_length",
    "log_freq",
    "rel_pos_line",
    "rel_pos_text",
    "rel_pos_sentence",
    "len_freq_interaction",
]


@dataclass
class ExclusionPolicy:
    """Row-exclusion rules applied when assembling the analysis dataset."""

    drop_line_edges: bool = False


@dataclass
class AnalysisDataset:
    """Joined per-fixation table ready for model fitting.

    ``data`` has one row per retained (participant_id, word_id) fixation with
    the response ``log_fprt``, the seven covariates, and one logit column per
    attached predictor. ``exclusion_log`` itemizes dropped rows by rule.
    """

    data: pd.DataFrame
    exclusion_log: dict[str, int] = field(default_factory=dict)
    predictor_names: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.data)


def _read_tsv(path: str | Path, columns: list[str], *, lenient: bool = False,
              optional: tuple[str, ...] = ()) -> pd.DataFrame:
    """Read a TSV file and enforce its column contract."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    df = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False,
                     encoding="utf-8")
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    unknown = [c for c in df.columns if c not in columns and c not in optional]
    if unknown and not lenient:
        raise ValidationError(
            f"{path}: unknown columns {unknown} (use lenient mode to ignore)")
    return df


def _to_numeric(df: pd.DataFrame, column: str, path: str | Path,
                kind: str = "int") -> pd.Series:
    """Convert a string column, reporting the first malformed line."""
    converted = pd.to_numeric(df[column], errors="coerce")
    bad = converted.isna() & (df[column] != "")
    bad |= df[column] == ""
    if bad.any():
        line = int(bad.idxmax()) + 2  # header is line 1
        raise ValidationError(
            f"{path}: malformed {column} value {df[column][bad.idxmax()]!r} "
            f"on line {line}")
    if kind == "int":
        if not np.allclose(converted, converted.round()):
            line = int((converted != converted.round()).idxmax()) + 2
            raise ValidationError(
                f"{path}: non-integer {column} on line {line}")
        return converted.astype(np.int64)
    return converted.astype(float)


def load_words(path: str | Path, *, lenient: bool = False) -> pd.DataFrame:
    """Load and validate words.tsv.

    Returns a DataFrame with the schema columns plus a computed ``length``
    column (character count of the NFC-normalized surface). Row order is
    preserved.
    """
    df = _read_tsv(path, WORD_COLUMNS, lenient=lenient)
    for col in WORD_COLUMNS:
        if col in ("surface", "freq_per_million"):
            continue
        df[col] = _to_numeric(df, col, path, "int")
    df["freq_per_million"] = _to_numeric(df, "freq_per_million", path, "float")
    df["surface"] = df["surface"].map(lambda s: unicodedata.normalize("NFC", s))
    df["length"] = df["surface"].str.len()

    if (df["length"] < 1).any():
        wid = int(df.loc[df["length"] < 1, "word_id"].iloc[0])
        raise ValidationError(f"{path}: empty surface for word_id {wid}")
    if (df["freq_per_million"] < 0).any():
        wid = int(df.loc[df["freq_per_million"] < 0, "word_id"].iloc[0])
        raise ValidationError(
            f"{path}: negative freq_per_million for word_id {wid}")
    dup = df["word_id"].duplicated()
    if dup.any():
        wid = int(df.loc[dup, "word_id"].iloc[0])
        raise ValidationError(f"{path}: duplicate word_id {wid}")
    dup_pos = df.duplicated(subset=["text_id", "pos_in_text"])
    if dup_pos.any():
        tid, pos = df.loc[dup_pos, ["text_id", "pos_in_text"]].iloc[0]
        raise ValidationError(
            f"{path}: duplicate (text_id, pos_in_text) = ({tid}, {pos})")
    return df.reset_index(drop=True)


def load_fixations(path: str | Path, words: pd.DataFrame | None = None, *,
                   lenient: bool = False) -> pd.DataFrame:
    """Load fixations.tsv; rows with fprt_ms <= 0 are rejected and logged."""
    df = _read_tsv(path, FIXATION_COLUMNS, lenient=lenient)
    if df.empty:
        log.warning("%s: empty fixation file", path)
        return pd.DataFrame(columns=FIXATION_COLUMNS)
    df["participant_id"] = _to_numeric(df, "participant_id", path, "int")
    df["word_id"] = _to_numeric(df, "word_id", path, "int")
    df["fprt_ms"] = _to_numeric(df, "fprt_ms", path, "float")
    df["saccade_distance"] = _to_numeric(df, "saccade_distance", path, "float")

    bad = df["fprt_ms"] <= 0
    if bad.any():
        log.warning("%s: rejected %d rows with non-positive fprt_ms",
                    path, int(bad.sum()))
        df = df[~bad]
    dup = df.duplicated(subset=["participant_id", "word_id"])
    if dup.any():
        pid, wid = df.loc[dup, ["participant_id", "word_id"]].iloc[0]
        raise ValidationError(
            f"{path}: duplicate (participant_id, word_id) = ({pid}, {wid})")
    if words is not None:
        known = set(words["word_id"])
        unresolved = ~df["word_id"].isin(known)
        if unresolved.any():
            wid = int(df.loc[unresolved, "word_id"].iloc[0])
            raise ValidationError(f"{path}: unresolvable word_id {wid}")
    return df.reset_index(drop=True)


def load_cloze(path: str | Path, words: pd.DataFrame | None = None, *,
               lenient: bool = False) -> pd.DataFrame:
    """Load cloze.tsv (one row per participant response)."""
    df = _read_tsv(path, CLOZE_COLUMNS, lenient=lenient)
    if df.empty:
        return pd.DataFrame(columns=CLOZE_COLUMNS)
    df["word_id"] = _to_numeric(df, "word_id", path, "int")
    df["response"] = df["response"].astype(str)
    if words is not None:
        known = set(words["word_id"])
        unresolved = ~df["word_id"].isin(known)
        if unresolved.any():
            wid = int(df.loc[unresolved, "word_id"].iloc[0])
            raise ValidationError(f"{path}: unresolvable word_id {wid}")
    return df.reset_index(drop=True)


def _rel_pos(pos: pd.Series, group: pd.Series) -> pd.Series:
    """pos/(count-1) within each group; 0 for single-element groups."""
    counts = pos.groupby(group, sort=False).transform("size")
    rel = np.where(counts > 1, pos / np.maximum(counts - 1, 1), 0.0)
    return pd.Series(rel, index=pos.index)


def annotate_covariates(words: pd.DataFrame) -> pd.DataFrame:
    """Add the derived lexical/positional covariates to a word table.

    inv_length is 1/length, log_freq is log10(freq_per_million + 1), the
    relative positions are pos/(count-1) within line, sentence, and text, and
    len_freq_interaction is inv_length * log_freq.
    """
    out = words.copy()
    out["inv_length"] = 1.0 / out["length"]
    out["log_freq"] = np.log10(out["freq_per_million"] + 1.0)
    line_key = list(zip(out["text_id"], out["line_idx"]))
    sent_key = list(zip(out["text_id"], out["sentence_idx"]))
    out["rel_pos_line"] = _rel_pos(out["pos_in_line"], pd.Series(line_key))
    out["rel_pos_sentence"] = _rel_pos(out["pos_in_sentence"],
                                       pd.Series(sent_key))
    out["rel_pos_text"] = _rel_pos(out["pos_in_text"], out["text_id"])
    out["len_freq_interaction"] = out["inv_length"] * out["log_freq"]
    return out


def assemble_dataset(annotated: pd.DataFrame, fixations: pd.DataFrame,
                     predictors: list = (),
                     policy: ExclusionPolicy | None = None) -> AnalysisDataset:
    """Join fixations with annotated words and attach predictor logits.

    Every retained row is complete for all covariates and every listed
    predictor; dropped rows are counted per rule in the exclusion log. The
    result is sorted by (participant_id, word_id), so it is invariant to
    input row order.
    """
    policy = policy or ExclusionPolicy()
    exclusion_log: dict[str, int] = {}

    word_cols = ["word_id", "text_id", "line_idx", "pos_in_line"] + [
        c for c in COVARIATE_COLUMNS if c != "saccade_distance"]
    merged = fixations.merge(annotated[word_cols], on="word_id", how="inner")
    if len(merged) < len(fixations):
        exclusion_log["unmatched_word"] = len(fixations) - len(merged)

    if policy.drop_line_edges:
        line_key = annotated.groupby(["text_id", "line_idx"])["pos_in_line"]
        last_pos = line_key.transform("max")
        edges = annotated.loc[
            (annotated["pos_in_line"] == 0) | (annotated["pos_in_line"] == last_pos),
            "word_id"]
        is_edge = merged["word_id"].isin(set(edges))
        exclusion_log["line_edge"] = int(is_edge.sum())
        merged = merged[~is_edge]

    merged = merged.copy()
    merged["log_fprt"] = np.log(merged["fprt_ms"])

    names: list[str] = []
    for column in predictors:
        name = column.source_name
        if name in names or name in merged.columns:
            raise ValidationError(f"duplicate predictor column {name!r}")
        names.append(name)
        merged[name] = merged["word_id"].map(column.logits)
    if names:
        incomplete = merged[names].isna().any(axis=1)
        exclusion_log["missing_predictor"] = int(incomplete.sum())
        merged = merged[~incomplete]

    merged = merged.drop(columns=["text_id", "line_idx", "pos_in_line",
                                  "fprt_ms"])
    merged = merged.sort_values(["participant_id", "word_id"],
                                kind="mergesort").reset_index(drop=True)
    if merged.empty:
        raise ValidationError("all rows excluded; empty analysis dataset")
    return AnalysisDataset(data=merged, exclusion_log=exclusion_log,
                           predictor_names=names)


def write_tsv(df: pd.DataFrame, path: str | Path) -> None:
    """Write a table back out in the on-disk TSV convention."""
    df.to_csv(path, sep="\t", index=False, encoding="utf-8")
