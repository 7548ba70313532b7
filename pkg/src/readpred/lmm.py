"""Gaussian linear mixed models with crossed random intercepts, fitted by ML.

The marginal likelihood is profiled: for a fixed vector of relative
random-intercept standard deviations (theta, one per grouping factor), the
fixed effects and the conditional modes of the random effects solve a single
penalized least-squares system, and the residual variance has a closed form.
Only theta is optimized numerically, with a bounded derivative-free search.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import minimize

from .errors import ToolkitError, ValidationError

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class ModelSpec:
    """Which columns enter the model; the intercept is always included."""

    fixed_terms: list[str]
    response: str = "log_fprt"
    random_intercepts: tuple[str, ...] = ("participant_id", "word_id")


@dataclass
class Grouping:
    """One random-intercept factor: a level index per row."""

    name: str
    codes: np.ndarray
    levels: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.levels)


class DesignMatrices:
    """Response vector, fixed-effects matrix, and random-effects structure."""

    def __init__(self, y: np.ndarray, X: np.ndarray, column_names: list[str],
                 groupings: list[Grouping],
                 row_keys: np.ndarray | None = None):
        self.y = np.asarray(y, dtype=float)
        self.X = np.asarray(X, dtype=float)
        self.column_names = list(column_names)
        self.groupings = groupings
        self.row_keys = row_keys
        self._cross = None

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return sum(g.n_levels for g in self.groupings)

    def indicator(self) -> sp.csr_matrix:
        """Sparse n x q block matrix of level indicators, all factors stacked."""
        n = self.n
        cols = []
        offset = 0
        rows = np.arange(n)
        data = np.ones(n)
        blocks = []
        for g in self.groupings:
            blocks.append(sp.csr_matrix((data, (rows, g.codes + offset)),
                                        shape=(n, self.q)))
            offset += g.n_levels
        if not blocks:
            return sp.csr_matrix((n, 0))
        Z = blocks[0]
        for b in blocks[1:]:
            Z = Z + b
        return Z

    def crossprods(self):
        """Cache the cross-products the profiled solve needs at every theta."""
        if self._cross is None:
            Z = self.indicator()
            X, y = self.X, self.y
            self._cross = {
                "Z": Z,
                "ZtZ": np.asarray((Z.T @ Z).todense()),
                "ZtX": np.asarray(Z.T @ X),
                "Zty": np.asarray(Z.T @ y).ravel(),
                "XtX": X.T @ X,
                "Xty": X.T @ y,
                "yty": float(y @ y),
            }
        return self._cross


@dataclass
class OptimizerConfig:
    """Bounded simplex settings for the theta search."""

    deviance_tol: float = 1e-8
    max_evals: int = 500
    restarts: int = 3
    start: float = 1.0


@dataclass
class FitResult:
    """Maximum-likelihood fit summary."""

    column_names: list[str]
    beta: np.ndarray
    se: np.ndarray
    t: np.ndarray
    factor_names: list[str]
    theta: np.ndarray
    sigma2: float
    loglik: float
    aic: float
    n: int
    p: int
    q: int
    converged: bool
    fitted_fixed: np.ndarray
    dataset_hash: str | None = None

    def to_json(self, path: str | Path | None = None) -> str:
        doc = {
            "coefficients": {
                name: {"beta": float(b), "se": float(s), "t": float(t)}
                for name, b, s, t in zip(self.column_names, self.beta,
                                         self.se, self.t)
            },
            "theta": {name: float(th) for name, th in
                      zip(self.factor_names, self.theta)},
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aic": self.aic,
            "n": self.n, "p": self.p, "q": self.q,
            "converged": self.converged,
            "fitted_fixed": [float(v) for v in self.fitted_fixed],
            "dataset_hash": self.dataset_hash,
        }
        text = json.dumps(doc, indent=2)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        doc = json.loads(text)
        names = list(doc["coefficients"])
        coef = doc["coefficients"]
        return cls(
            column_names=names,
            beta=np.array([coef[c]["beta"] for c in names]),
            se=np.array([coef[c]["se"] for c in names]),
            t=np.array([coef[c]["t"] for c in names]),
            factor_names=list(doc["theta"]),
            theta=np.array(list(doc["theta"].values())),
            sigma2=doc["sigma2"], loglik=doc["loglik"], aic=doc["aic"],
            n=doc["n"], p=doc["p"], q=doc["q"],
            converged=doc["converged"],
            fitted_fixed=np.array(doc["fitted_fixed"]),
            dataset_hash=doc.get("dataset_hash"),
        )


def build_design(dataset, spec: ModelSpec) -> DesignMatrices:
    """Assemble y, X, and grouping codes from an analysis dataset.

    Columns appear in spec order after the intercept, untransformed; a
    rank-deficient X is rejected with the name of a dependent column.
    """
    data = getattr(dataset, "data", dataset)
    names = ["(Intercept)"] + list(spec.fixed_terms)
    missing = [c for c in spec.fixed_terms + [spec.response]
               if c not in data.columns]
    if missing:
        raise ValidationError(f"missing columns in dataset: {missing}")
    X = np.column_stack(
        [np.ones(len(data))] +
        [data[c].to_numpy(dtype=float) for c in spec.fixed_terms])
    y = data[spec.response].to_numpy(dtype=float)
    if X.shape[0] < X.shape[1]:
        raise ValidationError(
            f"fixed-effects matrix is rank deficient: {X.shape[0]} rows for "
            f"{X.shape[1]} columns")

    # column-pivoted QR rank check with a relative pivot threshold
    _, R, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0 or (diag / diag[0] < 1e-10).any():
        bad = piv[int(np.argmax(diag / max(diag[0], 1e-300) < 1e-10))]
        raise ValidationError(
            f"fixed-effects matrix is rank deficient; column "
            f"{names[bad]!r} is linearly dependent")

    groupings = []
    for factor in spec.random_intercepts:
        if factor not in data.columns:
            raise ValidationError(f"missing grouping column {factor!r}")
        levels, codes = np.unique(data[factor].to_numpy(), return_inverse=True)
        if len(levels) < 2:
            raise ValidationError(
                f"grouping factor {factor!r} has fewer than 2 levels")
        groupings.append(Grouping(factor, codes.astype(np.int64), levels))

    row_keys = None
    if "participant_id" in data.columns and "word_id" in data.columns:
        row_keys = data[["participant_id", "word_id"]].to_numpy()
    return DesignMatrices(y, X, names, groupings, row_keys)


def _solve_at(design: DesignMatrices, theta: np.ndarray) -> dict:
    """Solve the penalized least-squares system at a fixed theta.

    Returns the profiled deviance together with every factor needed for
    coefficient covariances. The blocked normal equations are eliminated
    random-effects-first, so the Schur complement S equals X' V(theta)^-1 X
    with V = I + Z D^2 Z'.
    """
    cp = design.crossprods()
    n, p = design.n, design.p
    theta = np.asarray(theta, dtype=float)
    if (theta < 0).any():
        raise ValidationError("theta must be componentwise nonnegative")

    if design.q == 0 or len(theta) == 0:
        L_S = sla.cho_factor(cp["XtX"], lower=True)
        beta = sla.cho_solve(L_S, cp["Xty"])
        resid = design.y - design.X @ beta
        rss = float(resid @ resid)
        logdet = 0.0
        u = np.zeros(0)
    else:
        d = np.concatenate([np.full(g.n_levels, th)
                            for g, th in zip(design.groupings, theta)])
        A = d[:, None] * cp["ZtZ"] * d[None, :]
        A[np.diag_indices_from(A)] += 1.0
        try:
            L = sla.cholesky(A, lower=True)
        except sla.LinAlgError as exc:
            raise ToolkitError(f"singular system at theta={theta}") from exc
        B = sla.solve_triangular(L, d[:, None] * cp["ZtX"], lower=True)
        c = sla.solve_triangular(L, d * cp["Zty"], lower=True)
        S = cp["XtX"] - B.T @ B
        try:
            L_S = sla.cho_factor(S, lower=True)
        except sla.LinAlgError as exc:
            raise ToolkitError(f"singular system at theta={theta}") from exc
        beta = sla.cho_solve(L_S, cp["Xty"] - B.T @ c)
        u = sla.solve_triangular(L.T, c - B @ beta, lower=False)
        fitted = design.X @ beta + cp["Z"] @ (d * u)
        resid = design.y - fitted
        rss = float(resid @ resid) + float(u @ u)
        logdet = 2.0 * float(np.sum(np.log(np.diag(L))))

    sigma2 = rss / n
    deviance = logdet + n * (1.0 + LOG_2PI + math.log(sigma2))
    return {"deviance": deviance, "beta": beta, "sigma2": sigma2, "u": u,
            "L_S": L_S, "theta": theta}


def profiled_deviance(design: DesignMatrices, theta) -> tuple:
    """ML profiled deviance and the profiled-out estimates at this theta."""
    sol = _solve_at(design, np.asarray(theta, dtype=float))
    return sol["deviance"], sol["beta"], sol["sigma2"], sol["u"]


def _parabolic_polish(fun, x: np.ndarray, fx: float,
                      steps=(1e-3, 1e-4)) -> tuple[np.ndarray, float]:
    """Coordinate-wise three-point parabolic refinement near the optimum.

    Derivative-free; pushes theta past the resolution the simplex contraction
    can reach given the deviance evaluation noise floor.
    """
    x = x.copy()
    for h0 in steps:
        for j in range(len(x)):
            h = h0 * max(1.0, abs(x[j]))
            a = max(x[j] - h, 0.0)
            b = x[j]
            c = x[j] + h
            xs = x.copy()
            xs[j] = a
            fa = fun(xs) if a != b else fx
            xs[j] = c
            fc = fun(xs)
            # parabola through (a, fa), (b, fx), (c, fc); uneven spacing allowed
            denom = (b - a) * (fx - fc) - (b - c) * (fx - fa)
            if denom <= 0:
                best = min((fa, a), (fx, b), (fc, c))
                if best[0] < fx:
                    x[j], fx = best[1], best[0]
                continue
            vertex = b - 0.5 * (((b - a) ** 2) * (fx - fc)
                                - ((b - c) ** 2) * (fx - fa)) / denom
            vertex = min(max(vertex, max(a - h, 0.0)), c + h)
            xs[j] = vertex
            fv = fun(xs)
            cands = [(fx, b), (fa, a), (fc, c), (fv, vertex)]
            fbest, xbest = min(cands)
            x[j], fx = xbest, fbest
    return x, fx


def fit_lmm(design: DesignMatrices,
            optimizer: OptimizerConfig | None = None) -> FitResult:
    """Minimize the profiled deviance over theta and summarize the fit.

    Uses a bounded Nelder-Mead simplex from theta = 1 per factor, with a
    deterministic parabolic polish and up to ``restarts`` perturbed restarts
    when the search stalls. Never raises on non-convergence: the flag on the
    result is authoritative.
    """
    cfg = optimizer or OptimizerConfig()
    nf = len(design.groupings)

    def objective(theta):
        return _solve_at(design, np.maximum(theta, 0.0))["deviance"]

    if nf == 0:
        theta_hat = np.zeros(0)
        converged = True
    else:
        bounds = [(0.0, None)] * nf
        best_x, best_f, converged = None, np.inf, False
        start = np.full(nf, cfg.start)
        scales = [0.5, 2.0, 0.1]
        for attempt in range(1 + cfg.restarts):
            res = minimize(objective, start, method="Nelder-Mead",
                           bounds=bounds,
                           options={"fatol": cfg.deviance_tol * 1e-1,
                                    "xatol": 1e-9,
                                    "maxfev": cfg.max_evals})
            x, f = _parabolic_polish(objective, np.maximum(res.x, 0.0),
                                     float(res.fun))
            improved = f < best_f - cfg.deviance_tol
            if f < best_f:
                best_x, best_f = x, f
            if res.success and not (attempt > 0 and improved):
                converged = True
                break
            start = np.maximum(best_x * scales[attempt % len(scales)], 1e-4)
        theta_hat = best_x
    sol = _solve_at(design, theta_hat)
    beta, sigma2 = sol["beta"], sol["sigma2"]
    cov = sigma2 * sla.cho_solve(sol["L_S"], np.eye(design.p))
    se = np.sqrt(np.diag(cov))
    t = beta / se
    loglik = -0.5 * sol["deviance"]
    k = design.p + nf + 1
    aic = -2.0 * loglik + 2.0 * k
    return FitResult(
        column_names=design.column_names,
        beta=beta, se=se, t=t,
        factor_names=[g.name for g in design.groupings],
        theta=theta_hat, sigma2=sigma2,
        loglik=loglik, aic=aic,
        n=design.n, p=design.p, q=design.q,
        converged=bool(converged),
        fitted_fixed=design.X @ beta,
    )


def t_values(fit: FitResult):
    """Labeled t-values with the |t| > 2 significance convention (strict)."""
    import pandas as pd

    return pd.DataFrame(
        {"t": fit.t, "significant": np.abs(fit.t) > 2.0},
        index=fit.column_names)


def remove_fixed_effects(fit: FitResult, design: DesignMatrices) -> np.ndarray:
    """Response minus the estimated fixed effects (random effects retained)."""
    return design.y - design.X @ fit.beta
