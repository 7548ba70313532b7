"""Minimal words.tsv reader.

The analysis toolkit owns the full corpus contract; this component only
needs word ids, text membership, order within text, and surfaces, so it
reads those columns and ignores the rest.
"""

from __future__ import annotations

import unicodedata

import pandas as pd

REQUIRED_COLUMNS = ("word_id", "text_id", "pos_in_text", "surface")


class CorpusError(ValueError):
    pass


def load_words(path) -> pd.DataFrame:
    """Read words.tsv and return a frame sorted by (text_id, pos_in_text).

    Surfaces are NFC-normalized so that byte-level tokenization sees the
    same codepoints the analysis side stores.
    """
    table = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    missing = [c for c in REQUIRED_COLUMNS if c not in table.columns]
    if missing:
        raise CorpusError(f"words file missing columns: {', '.join(missing)}")
    out = pd.DataFrame(
        {
            "word_id": pd.to_numeric(table["word_id"], errors="raise").astype(int),
            "text_id": pd.to_numeric(table["text_id"], errors="raise").astype(int),
            "pos_in_text": pd.to_numeric(table["pos_in_text"], errors="raise").astype(int),
            "surface": [unicodedata.normalize("NFC", s) for s in table["surface"]],
        }
    )
    if out["word_id"].duplicated().any():
        dup = int(out["word_id"][out["word_id"].duplicated()].iloc[0])
        raise CorpusError(f"duplicate word_id {dup} in words file")
    if (out["surface"].str.len() == 0).any():
        bad = int(out.loc[out["surface"].str.len() == 0, "word_id"].iloc[0])
        raise CorpusError(f"empty surface for word_id {bad}")
    if out["surface"].str.contains(r"\s", regex=True).any():
        bad = int(out.loc[out["surface"].str.contains(r"\s"), "word_id"].iloc[0])
        raise CorpusError(f"surface contains whitespace for word_id {bad}")
    out = out.sort_values(["text_id", "pos_in_text"], kind="mergesort").reset_index(drop=True)
    for text_id, group in out.groupby("text_id"):
        pos = group["pos_in_text"].to_numpy()
        if pos[0] != 0 or (pos[1:] - pos[:-1] != 1).any():
            raise CorpusError(f"text {text_id}: pos_in_text is not 0..n-1 without gaps")
    return out
