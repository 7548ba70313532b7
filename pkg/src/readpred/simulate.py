"""Synthetic crossed-design reading datasets for property tests and demos."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .corpus import AnalysisDataset, COVARIATE_COLUMNS


def make_crossed_dataset(n_participants: int = 30, n_words: int = 100,
                         n_rows: int | None = None, *,
                         participant_sd: float = 0.3, word_sd: float = 0.3,
                         resid_sd: float = 0.3,
                         beta: dict[str, float] | None = None,
                         pred_effect: float = 0.0,
                         pred_name: str = "pred",
                         intercept: float = 5.5,
                         seed: int = 0) -> AnalysisDataset:
    """Generate a participant x word dataset with known generating parameters.

    Covariates are drawn per word, a latent predictability logit is attached
    as column ``pred_name``, and the response is a linear model plus crossed
    random intercepts and Gaussian noise. ``n_rows`` subsamples the full
    crossing (without replacement) to mimic incomplete fixation coverage.
    """
    rng = np.random.default_rng(seed)
    beta = dict(beta or {})

    words = pd.DataFrame({
        "word_id": np.arange(n_words),
        "inv_length": 1.0 / rng.integers(1, 12, n_words),
        "log_freq": rng.uniform(0.0, 4.0, n_words),
        "rel_pos_line": rng.uniform(0.0, 1.0, n_words),
        "rel_pos_text": rng.uniform(0.0, 1.0, n_words),
        "rel_pos_sentence": rng.uniform(0.0, 1.0, n_words),
    })
    words["len_freq_interaction"] = words["inv_length"] * words["log_freq"]
    words[pred_name] = rng.normal(-2.0, 1.5, n_words)

    pid = np.repeat(np.arange(n_participants), n_words)
    wid = np.tile(np.arange(n_words), n_participants)
    if n_rows is not None and n_rows < len(pid):
        keep = rng.choice(len(pid), size=n_rows, replace=False)
        keep.sort()
        pid, wid = pid[keep], wid[keep]

    df = pd.DataFrame({"participant_id": pid, "word_id": wid})
    df = df.merge(words, on="word_id")
    df["saccade_distance"] = rng.uniform(1.0, 12.0, len(df))

    eta = np.full(len(df), intercept)
    for name, b in beta.items():
        eta += b * df[name].to_numpy()
    eta += pred_effect * df[pred_name].to_numpy()
    part_eff = rng.normal(0.0, participant_sd, n_participants)
    word_eff = rng.normal(0.0, word_sd, n_words)
    eta += part_eff[df["participant_id"]] + word_eff[df["word_id"]]
    eta += rng.normal(0.0, resid_sd, len(df))
    df["log_fprt"] = eta

    order = ["participant_id", "word_id", "log_fprt"] + COVARIATE_COLUMNS + [pred_name]
    df = df[order].sort_values(["participant_id", "word_id"]).reset_index(drop=True)
    return AnalysisDataset(data=df, exclusion_log={},
                           predictor_names=[pred_name])
