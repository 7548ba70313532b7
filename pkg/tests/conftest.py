"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pandas as pd
import pytest
from scipy.optimize import minimize

from readpred.lmm import DesignMatrices


WORDS_HEADER = ("word_id\ttext_id\tsentence_idx\tline_idx\tpos_in_sentence"
                "\tpos_in_line\tpos_in_text\tsurface\tfreq_per_million")

# Two tiny Spanish texts with lines/sentences laid out so the relative
# positions are easy to compute by hand.
WORDS_TSV = WORDS_HEADER + "\n" + "\n".join([
    # text 1: one sentence of 5 words on a single line
    "1\t1\t0\t0\t0\t0\t0\tla\t5000",
    "2\t1\t0\t0\t1\t1\t1\tcasa\t100",
    "3\t1\t0\t0\t2\t2\t2\tdel\t800",
    "4\t1\t0\t0\t3\t3\t3\tárbol\t35",
    "5\t1\t0\t0\t4\t4\t4\tviejo\t60",
    # text 2: a 1-word sentence then a 3-word sentence, two lines
    "6\t2\t0\t0\t0\t0\t0\tHola\t12",
    "7\t2\t1\t0\t0\t1\t1\tqué\t900",
    "8\t2\t1\t1\t1\t0\t2\tlinda\t40",
    "9\t2\t1\t1\t2\t1\t3\tmañana\t150",
]) + "\n"

FIXATIONS_TSV = "participant_id\tword_id\tfprt_ms\tsaccade_distance\n" + "\n".join([
    "1\t1\t180\t3.0",
    "1\t2\t210\t2.0",
    "1\t4\t305\t4.5",
    "2\t2\t190\t1.0",
    "2\t3\t250\t6.0",
    "2\t9\t400\t2.5",
    "3\t1\t220\t3.5",
    "3\t5\t150\t5.0",
]) + "\n"

CLOZE_TSV = "word_id\tresponse\n" + "\n".join(
    ["2\tcasa"] * 5 + ["2\tcasona"] * 8 +      # k=5 of n=13
    ["4\tarbol"] * 10 +                        # accent mismatch: k=0 of n=10
    ["9\tmañana"] * 4                     # k=4 of n=4
) + "\n"


@pytest.fixture
def words_file(tmp_path):
    path = tmp_path / "words.tsv"
    path.write_text(WORDS_TSV, encoding="utf-8")
    return path


@pytest.fixture
def fixations_file(tmp_path):
    path = tmp_path / "fixations.tsv"
    path.write_text(FIXATIONS_TSV, encoding="utf-8")
    return path


@pytest.fixture
def cloze_file(tmp_path):
    path = tmp_path / "cloze.tsv"
    path.write_text(CLOZE_TSV, encoding="utf-8")
    return path


def dense_deviance(design: DesignMatrices, theta) -> float:
    """Brute-force ML deviance via the dense marginal covariance.

    Builds V = I + sum theta_f^2 Z_f Z_f' explicitly and profiles beta and
    sigma2 analytically. Independent of the blocked-factorization path.
    """
    y, X, n = design.y, design.X, design.n
    V = np.eye(n)
    for th, g in zip(theta, design.groupings):
        Z = np.zeros((n, g.n_levels))
        Z[np.arange(n), g.codes] = 1.0
        V += th ** 2 * Z @ Z.T
    Vi = np.linalg.inv(V)
    beta = np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y)
    r = y - X @ beta
    s2 = float(r @ Vi @ r) / n
    _, logdet = np.linalg.slogdet(V)
    return float(logdet + n * (1.0 + np.log(2.0 * np.pi * s2)))


def dense_brute_force(design: DesignMatrices):
    """Maximize the dense marginal likelihood with a generic optimizer.

    Returns (deviance, beta_hat). Multiple deterministic starts guard
    against simplex stalls.
    """
    nf = len(design.groupings)
    best = None
    for start in ([1.0] * nf, [0.3] * nf, [2.5] * nf):
        res = minimize(lambda t: dense_deviance(design, np.abs(t)), start,
                       method="Nelder-Mead",
                       options={"fatol": 1e-12, "xatol": 1e-10,
                                "maxfev": 4000})
        if best is None or res.fun < best.fun:
            best = res
    theta = np.abs(best.x)
    y, X, n = design.y, design.X, design.n
    V = np.eye(n)
    for th, g in zip(theta, design.groupings):
        Z = np.zeros((n, g.n_levels))
        Z[np.arange(n), g.codes] = 1.0
        V += th ** 2 * Z @ Z.T
    Vi = np.linalg.inv(V)
    beta = np.linalg.solve(X.T @ Vi @ X, X.T @ Vi @ y)
    return float(best.fun), beta


def one_way_ml_closed_form(y: np.ndarray, g: int, m: int):
    """Hand-derived ML estimates for balanced one-way random-intercept data.

    y is laid out group-major. Returns (mu, sigma2_resid, sigma2_group); the
    group variance comes from tau = SSB/g with tau = sigma2_group +
    sigma2_resid/m, valid when the optimum is interior.
    """
    y = y.reshape(g, m)
    group_means = y.mean(axis=1)
    mu = y.mean()
    ssw = float(((y - group_means[:, None]) ** 2).sum())
    sigma2_resid = ssw / (g * (m - 1))
    tau = float(((group_means - mu) ** 2).mean())
    sigma2_group = tau - sigma2_resid / m
    return mu, sigma2_resid, sigma2_group


def one_way_frame(g=4, m=5, mu=5.0, group_sd=1.2, resid_sd=0.6, seed=42):
    """Balanced one-way dataset as a frame with a single grouping column."""
    rng = np.random.default_rng(seed)
    effects = rng.normal(0.0, group_sd, g)
    y = mu + np.repeat(effects, m) + rng.normal(0.0, resid_sd, g * m)
    return pd.DataFrame({"group": np.repeat(np.arange(g), m), "y": y})
