"""Count-based n-gram language model: training, smoothing, corpus scoring."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .errors import ValidationError
from .predictors import MatchConfig, PredictorColumn, SmoothingConfig, normalize_token

BOS = "<s>"
UNK = "<unk>"

_PUNCT_SPLIT = re.compile(r"([.,;:!?¿¡\"“”‘’()])")


@dataclass(frozen=True)
class Smoothing:
    """Probability estimator applied on top of the raw counts.

    mode is one of ``mle``, ``add_k``, or ``interpolated_backoff``. For the
    interpolated mode, ``lambdas[i]`` weights the order-(i+2) component and
    the unigram floor is always add-1 smoothed so every word in the vocab
    gets positive mass.
    """

    mode: str = "interpolated_backoff"
    k: float = 1.0
    lambdas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.mode not in ("mle", "add_k", "interpolated_backoff"):
            raise ValidationError(f"unknown smoothing mode {self.mode!r}")
        if self.mode == "add_k" and self.k <= 0:
            raise ValidationError("add_k requires k > 0")


def tokenize(text: str, matcher: MatchConfig = MatchConfig(),
             split_punctuation: bool = False) -> list[str]:
    """Whitespace tokenization after the cloze-matching normalization."""
    tokens = []
    for raw in text.split():
        if split_punctuation:
            parts = [p for p in _PUNCT_SPLIT.split(raw) if p]
        else:
            parts = [raw]
        for part in parts:
            tok = normalize_token(part, matcher)
            if tok:
                tokens.append(tok)
    return tokens


@dataclass
class NgramModel:
    """Exact n-gram counts plus a smoothing rule for probability queries."""

    order: int
    counts: dict[tuple[str, ...], Counter] = field(default_factory=dict)
    vocab: set[str] = field(default_factory=set)
    smoothing: Smoothing = field(default_factory=Smoothing)

    def context_total(self, context: tuple[str, ...]) -> int:
        counter = self.counts.get(context)
        return sum(counter.values()) if counter else 0

    def _lambda(self, ctx_len: int) -> float:
        if self.smoothing.lambdas and ctx_len - 1 < len(self.smoothing.lambdas):
            return self.smoothing.lambdas[ctx_len - 1]
        return 0.9

    def _map_word(self, word: str) -> str:
        return word if word in self.vocab else UNK

    def prob(self, context: tuple[str, ...] | list[str], word: str) -> float:
        """p(word | context) using the longest usable context suffix."""
        word = self._map_word(word)
        context = tuple(self._map_word(w) if w != BOS else BOS
                        for w in context)[-(self.order - 1):] if self.order > 1 else ()
        sm = self.smoothing

        if sm.mode == "mle":
            ctx = self._longest_seen(context)
            total = self.context_total(ctx)
            if total == 0:
                return 0.0
            return self.counts[ctx][word] / total

        if sm.mode == "add_k":
            ctx = self._longest_seen(context)
            total = self.context_total(ctx)
            v = len(self.vocab)
            return (self.counts.get(ctx, Counter())[word] + sm.k) / (total + sm.k * v)

        # interpolated_backoff: recursive mix down to the add-1 unigram floor
        return self._interp(context, word)

    def _longest_seen(self, context: tuple[str, ...]) -> tuple[str, ...]:
        for start in range(len(context) + 1):
            ctx = context[start:]
            if ctx in self.counts:
                return ctx
        return ()

    def _interp(self, context: tuple[str, ...], word: str) -> float:
        if not context:
            total = self.context_total(())
            v = len(self.vocab)
            return (self.counts.get((), Counter())[word] + 1.0) / (total + v)
        lam = self._lambda(len(context))
        lower = self._interp(context[1:], word)
        total = self.context_total(context)
        if total == 0:
            return lower
        return lam * (self.counts[context][word] / total) + (1.0 - lam) * lower


def train_ngram(texts: list[list[str]], order: int,
                smoothing: Smoothing = Smoothing(),
                *, unk_singletons: bool = False) -> NgramModel:
    """Count every n-gram of length 1..order within each text.

    Text boundaries reset the context: no n-gram spans two texts. Contexts
    shorter than order-1 at a text start are padded with the BOS marker.
    Optionally, words occurring exactly once in training are replaced by the
    unknown marker.
    """
    if order < 1:
        raise ValidationError("order must be >= 1")
    if not texts or all(not t for t in texts):
        raise ValidationError("empty training corpus")

    if unk_singletons:
        freq = Counter(w for t in texts for w in t)
        texts = [[w if freq[w] > 1 else UNK for w in t] for t in texts]

    model = NgramModel(order=order, smoothing=smoothing)
    model.vocab = {w for t in texts for w in t} | {UNK}
    for text in texts:
        padded = [BOS] * (order - 1) + list(text)
        for i in range(order - 1, len(padded)):
            word = padded[i]
            for ctx_len in range(order):
                context = tuple(padded[i - ctx_len:i])
                model.counts.setdefault(context, Counter())[word] += 1
    return model


def ngram_prob(model: NgramModel, context: list[str], word: str) -> float:
    """Convenience wrapper around NgramModel.prob."""
    return model.prob(context, word)


def score_corpus(model: NgramModel, words: pd.DataFrame,
                 matcher: MatchConfig = MatchConfig(),
                 smoothing: SmoothingConfig = SmoothingConfig(mode="clamp"),
                 source_name: str | None = None) -> PredictorColumn:
    """Score every corpus word given its within-text left context.

    Text-initial words are scored against the start-of-text context. MLE
    zeros are clamped into (0, 1) by the predictor-column guard.
    """
    name = source_name or f"ngram-{model.order}"
    values: dict[int, float] = {}
    for _, text in words.sort_values("pos_in_text").groupby("text_id"):
        context: list[str] = [BOS] * (model.order - 1)
        for _, row in text.iterrows():
            token = normalize_token(row["surface"], matcher)
            values[int(row["word_id"])] = model.prob(tuple(context), token)
            context.append(token)
    return PredictorColumn(name, values, smoothing=smoothing,
                           coverage=len(values) / len(words))


def save_model(model: NgramModel, path: str | Path) -> None:
    """Dump counts as TSV (context, word, count); exact round-trip."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#order\t{model.order}\n")
        fh.write(f"#smoothing\t{model.smoothing.mode}\t{model.smoothing.k!r}\t"
                 f"{','.join(map(str, model.smoothing.lambdas))}\n")
        fh.write(f"#vocab\t{' '.join(sorted(model.vocab))}\n")
        fh.write("context\tword\tcount\n")
        for context in sorted(model.counts):
            for word, count in sorted(model.counts[context].items()):
                fh.write(f"{' '.join(context)}\t{word}\t{count}\n")


def load_model(path: str | Path) -> NgramModel:
    """Inverse of save_model."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    try:
        order = int(lines[0].split("\t")[1])
        _, mode, k_repr, lam_str = lines[1].split("\t")
        lambdas = tuple(float(x) for x in lam_str.split(",")) if lam_str else ()
        vocab = set(lines[2].split("\t")[1].split(" "))
        if lines[3] != "context\tword\tcount":
            raise ValueError("bad header")
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: not a model dump ({exc})") from exc
    model = NgramModel(order=order, vocab=vocab,
                       smoothing=Smoothing(mode=mode, k=float(k_repr),
                                           lambdas=lambdas))
    for lineno, line in enumerate(lines[4:], start=5):
        if not line:
            continue
        ctx_str, word, count = line.split("\t")
        context = tuple(ctx_str.split(" ")) if ctx_str else ()
        model.counts.setdefault(context, Counter())[word] = int(count)
    return model
