"""Predictability columns: cloze proportions, imported LM probabilities, logits."""

from __future__ import annotations

import logging
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from .errors import ValidationError

log = logging.getLogger(__name__)

_TERMINAL_PUNCT = ".,;:!?¿¡\"'“”‘’()"


@dataclass(frozen=True)
class SmoothingConfig:
    """How probabilities at 0 or 1 are kept inside the open unit interval.

    ``empirical_logit`` replaces a proportion k/n with (k+0.5)/(n+1);
    ``clamp`` clips into [eps, 1-eps]. Clamping is always applied as a last
    guard so stored values are strictly inside (0, 1).
    """

    mode: str = "empirical_logit"
    clamp_eps: float = 1e-8

    def __post_init__(self):
        if self.mode not in ("empirical_logit", "clamp"):
            raise ValidationError(f"unknown smoothing mode {self.mode!r}")
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValidationError("clamp_eps must lie in (0, 0.5)")


@dataclass(frozen=True)
class MatchConfig:
    """Cloze response matching pipeline; each step can be toggled off."""

    trim: bool = True
    nfc: bool = True
    casefold: bool = True
    strip_punctuation: bool = True


def normalize_token(token: str, matcher: MatchConfig = MatchConfig()) -> str:
    """Apply the matching normalization pipeline to one token."""
    if matcher.trim:
        token = token.strip()
    if matcher.nfc:
        token = unicodedata.normalize("NFC", token)
    if matcher.casefold:
        token = token.lower()
    if matcher.strip_punctuation:
        token = token.strip(_TERMINAL_PUNCT)
    return token


def match_response(response: str, target: str,
                   matcher: MatchConfig = MatchConfig()) -> bool:
    """True when a cloze response counts as producing the target word.

    Diacritics stay significant by default: Spanish has minimal pairs that
    differ only in an accent.
    """
    return normalize_token(response, matcher) == normalize_token(target, matcher)


def logit(p: float, smoothing: SmoothingConfig = SmoothingConfig()) -> float:
    """Log-odds ln(p/(1-p)) with the configured guard against p in {0, 1}.

    Computed on the smaller tail and negated, so logit(p) == -logit(1-p)
    holds to rounding and the clamp is applied symmetrically.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability {p} outside [0, 1]")
    eps = smoothing.clamp_eps
    if p > 0.5:
        return -_lower_logit(1.0 - p, eps)
    return _lower_logit(p, eps)


def _lower_logit(p: float, eps: float) -> float:
    p = max(p, eps)
    return math.log(p) - math.log1p(-p)


def logistic(x: float) -> float:
    """Inverse of the logit transform."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class PredictorColumn:
    """A named per-word probability column with its logit transform."""

    source_name: str
    values: dict[int, float]
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    coverage: float = float("nan")
    logits: dict[int, float] = field(init=False)

    def __post_init__(self):
        clamped = {}
        eps = self.smoothing.clamp_eps
        for wid, p in self.values.items():
            if not 0.0 <= p <= 1.0:
                raise ValidationError(
                    f"{self.source_name}: probability {p} outside [0, 1] "
                    f"for word_id {wid}")
            clamped[wid] = min(max(p, eps), 1.0 - eps)
        self.values = clamped
        self.logits = {wid: math.log(p / (1.0 - p))
                       for wid, p in self.values.items()}


def compute_cloze_pred(cloze: pd.DataFrame, words: pd.DataFrame,
                       matcher: MatchConfig = MatchConfig(),
                       smoothing: SmoothingConfig = SmoothingConfig(),
                       ) -> PredictorColumn:
    """Estimate cloze predictability from per-response rows.

    For a word with n responses of which k match the corpus surface, the
    raw proportion is k/n; under empirical-logit smoothing the stored value
    is (k+0.5)/(n+1), which is strictly inside (0, 1) for every k.
    """
    surfaces = dict(zip(words["word_id"], words["surface"]))
    unknown = set(cloze["word_id"]) - set(surfaces)
    if unknown:
        raise ValidationError(
            f"cloze references unknown word_id {sorted(unknown)[0]}")

    values: dict[int, float] = {}
    for wid, group in cloze.groupby("word_id", sort=False):
        n = len(group)
        if n == 0:
            continue
        target = surfaces[int(wid)]
        k = sum(match_response(r, target, matcher) for r in group["response"])
        if smoothing.mode == "empirical_logit":
            p = (k + 0.5) / (n + 1)
        else:
            p = k / n
        values[int(wid)] = p
    coverage = len(values) / len(words) if len(words) else 0.0
    return PredictorColumn("cloze", values, smoothing=smoothing,
                           coverage=coverage)


def import_lm_probs(path: str | Path, source_name: str,
                    words: pd.DataFrame | None = None,
                    smoothing: SmoothingConfig = SmoothingConfig(mode="clamp"),
                    *, lenient: bool = False) -> PredictorColumn:
    """Read a preds.tsv file of externally computed word probabilities.

    Words absent from the file simply have no entry (the first word of each
    text legitimately lacks context). Optional ``logprob`` and ``flag``
    columns from extraction tools are tolerated.
    """
    from .corpus import _read_tsv, _to_numeric

    df = _read_tsv(path, ["word_id", "prob"], lenient=lenient,
                   optional=("logprob", "flag"))
    if df.empty:
        return PredictorColumn(source_name, {}, smoothing=smoothing,
                               coverage=0.0)
    df["word_id"] = _to_numeric(df, "word_id", path, "int")
    df["prob"] = _to_numeric(df, "prob", path, "float")
    bad = (df["prob"] < 0) | (df["prob"] > 1)
    if bad.any():
        wid = int(df.loc[bad, "word_id"].iloc[0])
        raise ValidationError(
            f"{path}: probability outside [0, 1] for word_id {wid}")
    dup = df["word_id"].duplicated()
    if dup.any():
        wid = int(df.loc[dup, "word_id"].iloc[0])
        raise ValidationError(f"{path}: duplicate word_id {wid}")
    if words is not None:
        unknown = set(df["word_id"]) - set(words["word_id"])
        if unknown:
            raise ValidationError(
                f"{path}: unresolvable word_id {sorted(unknown)[0]}")
    values = dict(zip(df["word_id"].astype(int), df["prob"].astype(float)))
    coverage = (len(values) / len(words)) if words is not None else float("nan")
    return PredictorColumn(source_name, values, smoothing=smoothing,
                           coverage=coverage)


def export_probs(column: PredictorColumn, path: str | Path) -> None:
    """Write a predictor column back out in the preds.tsv format."""
    df = pd.DataFrame(sorted(column.values.items()),
                      columns=["word_id", "prob"])
    df["prob"] = df["prob"].map(lambda p: format(p, ".17g"))
    df.to_csv(path, sep="\t", index=False, encoding="utf-8")
