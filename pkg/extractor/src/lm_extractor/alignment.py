"""Token-to-word alignment.

Texts are reconstructed by joining word surfaces with single spaces, then
tokenized once per text.  Each token is assigned to the word that contains
its first non-space character; tokens that are pure whitespace attach to
the following word, matching the byte-pair convention of carrying the
leading space marker with the word it precedes.

A word's alignment is sound when decoding its token span reproduces the
surface up to a leading space.  Tokenizers whose merges cross a word
boundary (or whose vocabulary cannot represent a character) fail that
round trip; such words are reported and flagged rather than silently
scored.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import pandas as pd


@dataclass
class WordAlignment:
    word_id: int
    surface: str
    token_span: Tuple[int, int]  # [start, end) indices into the token sequence
    text_offset: Tuple[int, int]  # character span in the reconstructed text
    decoded: str
    ok: bool


def build_text(surfaces: Sequence[str]) -> Tuple[str, List[Tuple[int, int]]]:
    """Join surfaces with single spaces; return the text and char spans."""
    spans = []
    cursor = 0
    parts = []
    for surface in surfaces:
        if parts:
            cursor += 1  # the joining space
        spans.append((cursor, cursor + len(surface)))
        cursor += len(surface)
        parts.append(surface)
    return " ".join(parts), spans


def align_words(text, word_ids, surfaces, tokenizer):
    """Assign every token of `text` to a word; return WordAlignment list.

    The token sequence is encoded without special tokens so that offsets
    index directly into `text`.
    """
    _, char_spans = build_text(surfaces)
    enc = tokenizer(text, return_offsets_mapping=True, add_special_tokens=False)
    ids = enc["input_ids"]
    offsets = enc["offset_mapping"]

    # char index -> word index (-1 for the joining spaces)
    owner_of_char = [-1] * len(text)
    for w, (a, b) in enumerate(char_spans):
        for j in range(a, b):
            owner_of_char[j] = w

    token_owner = []
    for (s, e) in offsets:
        j = s
        while j < e and text[j].isspace():
            j += 1
        if j < e:
            token_owner.append(owner_of_char[j])
        else:
            # whitespace-only token: belongs to the next word
            while j < len(text) and owner_of_char[j] == -1:
                j += 1
            token_owner.append(owner_of_char[j] if j < len(text) else len(surfaces) - 1)

    # Owners are non-decreasing because offsets are; group into spans.
    spans = {}
    for t, w in enumerate(token_owner):
        if w in spans:
            spans[w] = (spans[w][0], t + 1)
        else:
            spans[w] = (t, t + 1)

    alignments = []
    for w, (wid, surface) in enumerate(zip(word_ids, surfaces)):
        if w not in spans:
            alignments.append(
                WordAlignment(int(wid), surface, (0, 0), char_spans[w], "", False)
            )
            continue
        a, b = spans[w]
        decoded = tokenizer.decode(ids[a:b])
        ok = decoded.lstrip(" ") == surface
        alignments.append(
            WordAlignment(int(wid), surface, (a, b), char_spans[w], decoded, ok)
        )
    return alignments, ids


def verify_alignment(words: pd.DataFrame, tokenizer) -> pd.DataFrame:
    """Round-trip every word through the tokenizer; report failures.

    Returns one row per word: word_id, text_id, surface, decoded token
    span, and ok flag.  `words` is a frame as produced by load_words.
    """
    rows = []
    for text_id, group in words.groupby("text_id", sort=True):
        group = group.sort_values("pos_in_text")
        text, _ = build_text(group["surface"].tolist())
        alignments, _ = align_words(
            text, group["word_id"].tolist(), group["surface"].tolist(), tokenizer
        )
        for al in alignments:
            rows.append(
                {
                    "word_id": al.word_id,
                    "text_id": int(text_id),
                    "surface": al.surface,
                    "decoded": al.decoded,
                    "ok": int(al.ok),
                }
            )
    report = pd.DataFrame(rows).sort_values("word_id").reset_index(drop=True)
    return report
