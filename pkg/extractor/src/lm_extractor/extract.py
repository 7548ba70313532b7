"""Run a causal LM over corpus texts and score each word.

Every token position i >= 1 gets log p(t_i | t_0..t_{i-1}) from the model;
a word's log-probability is the sum over its token span, so a single-token
word's log-prob is exactly that token's, and by the chain rule the word
log-probs of a text sum to the total sequence log-prob (minus the first
word, which has no left context and is omitted).

Contexts longer than the model window are left-truncated: positions past
the window are scored one at a time against the trailing window of tokens,
and the number of truncated positions is reported.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd
import torch
import torch.nn.functional as F
from transformers import AutoModelForCausalLM, AutoTokenizer

from .alignment import WordAlignment, align_words, build_text

log = logging.getLogger(__name__)


@dataclass
class ExtractionResult:
    frame: pd.DataFrame  # word_id, prob, logprob, flag
    alignments: List[WordAlignment]
    truncated_positions: Dict[int, int] = field(default_factory=dict)
    omitted_word_ids: List[int] = field(default_factory=list)

    @property
    def n_misaligned(self) -> int:
        return int((self.frame["flag"] == 1).sum())


def _model_window(model) -> int:
    cfg = model.config
    for name in ("n_positions", "max_position_embeddings"):
        value = getattr(cfg, name, None)
        if value is not None:
            return int(value)
    return 1024


def _token_logprobs(model, ids: List[int], window: int, device) -> List[float]:
    """log p(t_i | preceding tokens) for i = 1..T-1, window-truncated."""
    T = len(ids)
    out = [math.nan]  # position 0 has no context
    head = ids[: min(T, window)]
    tensor = torch.tensor([head], dtype=torch.long, device=device)
    with torch.no_grad():
        logits = model(tensor).logits[0]
    logprobs = F.log_softmax(logits.double(), dim=-1)
    for i in range(1, len(head)):
        out.append(float(logprobs[i - 1, ids[i]]))
    for i in range(window, T):
        chunk = ids[i - window + 1 : i + 1]
        tensor = torch.tensor([chunk], dtype=torch.long, device=device)
        with torch.no_grad():
            logits = model(tensor).logits[0]
        step = F.log_softmax(logits[-2].double(), dim=-1)
        out.append(float(step[ids[i]]))
    return out


def extract_word_probs(
    model_id: str,
    words: pd.DataFrame,
    context_policy: str = "full",
    window: Optional[int] = None,
    device: str = "cpu",
) -> ExtractionResult:
    """Score every non-initial word of every text under a causal LM.

    model_id is a hub-style identifier or a local directory.  With
    context_policy="full" the context is all preceding text, truncated to
    the model window from the left; "window" additionally caps the context
    at `window` tokens.
    """
    if context_policy not in ("full", "window"):
        raise ValueError(f"unknown context policy: {context_policy!r}")
    if context_policy == "window":
        if window is None or window < 2:
            raise ValueError("window policy requires window >= 2")

    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModelForCausalLM.from_pretrained(model_id).to(device).eval()
    effective = _model_window(model)
    if context_policy == "window":
        effective = min(effective, int(window))

    rows = []
    all_alignments: List[WordAlignment] = []
    truncated: Dict[int, int] = {}
    omitted: List[int] = []

    for text_id, group in words.groupby("text_id", sort=True):
        group = group.sort_values("pos_in_text")
        surfaces = group["surface"].tolist()
        word_ids = group["word_id"].tolist()
        text, _ = build_text(surfaces)
        alignments, ids = align_words(text, word_ids, surfaces, tokenizer)
        all_alignments.extend(alignments)

        overflow = max(0, len(ids) - effective)
        if overflow and context_policy == "full":
            truncated[int(text_id)] = overflow
            log.warning(
                "text %s: %d positions beyond the model window; "
                "contexts left-truncated",
                text_id,
                overflow,
            )
        logprobs = _token_logprobs(model, ids, effective, device)

        misaligned = [al.word_id for al in alignments if not al.ok]
        if misaligned:
            log.warning(
                "text %s: token spans fail round-trip decoding for word_id(s) %s; "
                "emitted with flag=1",
                text_id,
                ", ".join(map(str, misaligned)),
            )

        for w, al in enumerate(alignments):
            if w == 0:
                omitted.append(al.word_id)
                continue
            a, b = al.token_span
            lp = sum(logprobs[a:b])
            rows.append(
                {
                    "word_id": al.word_id,
                    "prob": math.exp(lp),
                    "logprob": lp,
                    "flag": 0 if al.ok else 1,
                }
            )

    frame = pd.DataFrame(rows, columns=["word_id", "prob", "logprob", "flag"])
    frame = frame.sort_values("word_id").reset_index(drop=True)
    return ExtractionResult(frame, all_alignments, truncated, omitted)


def write_preds(result: ExtractionResult, path) -> None:
    """Write preds.tsv in the schema the analysis toolkit imports."""
    out = result.frame.copy()
    out["prob"] = [format(p, ".17g") for p in out["prob"]]
    out["logprob"] = [format(lp, ".17g") for lp in out["logprob"]]
    out.to_csv(path, sep="\t", index=False)
