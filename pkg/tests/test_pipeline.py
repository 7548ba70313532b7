import numpy as np
import pytest

from readpred.corpus import AnalysisDataset
from readpred.errors import ValidationError
from readpred.lmm import ModelSpec, build_design, fit_lmm
from readpred.pipeline import (BASELINE_TERMS, ComparisonReport, compare,
                               delta_aic, parse_report_tsv, remef_cloze,
                               render_report, run_baseline,
                               run_with_predictor, row_set_hash)
from readpred.predictors import PredictorColumn
from readpred.simulate import make_crossed_dataset

GEN_BETA = {"saccade_distance": 0.02, "inv_length": 0.8, "log_freq": -0.08,
            "rel_pos_line": 0.05, "rel_pos_text": -0.05,
            "rel_pos_sentence": -0.04, "len_freq_interaction": -0.3}


@pytest.fixture(scope="module")
def dataset():
    return make_crossed_dataset(20, 80, n_rows=1200, beta=GEN_BETA,
                                pred_effect=-0.12, pred_name="cloze", seed=31)


@pytest.fixture(scope="module")
def baseline(dataset):
    return run_baseline(dataset)


class TestModelRuns:
    def test_baseline_covers_seven_covariates(self, baseline):
        assert baseline.p == 8
        assert baseline.converged

    def test_baseline_deterministic(self, dataset, baseline):
        again = run_baseline(dataset)
        assert again.aic == baseline.aic
        assert again.beta == pytest.approx(baseline.beta, rel=0, abs=0)

    def test_null_data_mostly_insignificant(self):
        # under the null each covariate should cross |t| > 2 about 5% of
        # the time, so test the per-covariate rate rather than all-seven-
        # at-once (seven near-independent 5% events fail jointly too often)
        total = significant = 0
        for seed in range(12):
            ds = make_crossed_dataset(15, 100, n_rows=900, beta={},
                                      pred_effect=0.0, seed=1000 + seed)
            fit = run_baseline(ds)
            t = np.abs(fit.t[1:])
            total += len(t)
            significant += int((t >= 2.0).sum())
        assert significant / total <= 0.15

    def test_predictor_model(self, dataset, baseline):
        fit = run_with_predictor(dataset, "cloze")
        assert fit.p == 9
        assert fit.column_names[-1] == "cloze"
        assert fit.t[-1] < -2.0  # generating effect is negative
        assert delta_aic(fit, baseline) < 0.0

    def test_missing_predictor_column(self, dataset):
        with pytest.raises(ValidationError):
            run_with_predictor(dataset, "nope")


class TestDeltaAic:
    def test_self_difference_is_zero(self, baseline):
        assert delta_aic(baseline, baseline) == 0.0

    def test_antisymmetry(self, dataset, baseline):
        fit = run_with_predictor(dataset, "cloze")
        assert delta_aic(fit, baseline) == -delta_aic(baseline, fit)

    def test_mismatched_datasets_rejected(self, dataset, baseline):
        other = make_crossed_dataset(10, 30, seed=99)
        fit = run_baseline(other)
        with pytest.raises(ValidationError, match="hash"):
            delta_aic(fit, baseline)


class TestRemef:
    def test_included_predictor_leaves_nothing(self, dataset):
        design = build_design(dataset, ModelSpec(
            fixed_terms=BASELINE_TERMS + ["cloze"]))
        fit = fit_lmm(design)
        t = remef_cloze(fit, design,
                        dataset.data["cloze"].to_numpy(dtype=float))
        assert abs(t) < 0.5

    def test_baseline_residuals_keep_cloze_effect(self, dataset, baseline):
        design = build_design(dataset, ModelSpec(fixed_terms=BASELINE_TERMS))
        t = remef_cloze(baseline, design,
                        dataset.data["cloze"].to_numpy(dtype=float))
        assert t < -2.0

    def test_comp_pred_equal_to_cloze_zeroes_remef(self, dataset):
        # a predictor identical to cloze absorbs all of its variance
        data = dataset.data.copy()
        data["comp"] = data["cloze"]
        ds = AnalysisDataset(data=data)
        design = build_design(ds, ModelSpec(
            fixed_terms=BASELINE_TERMS + ["comp"]))
        fit = fit_lmm(design)
        t = remef_cloze(fit, design, data["cloze"].to_numpy(dtype=float))
        assert abs(t) < 0.5

    def test_predictor_column_join(self, dataset):
        design = build_design(dataset, ModelSpec(fixed_terms=BASELINE_TERMS))
        fit = fit_lmm(design)
        logits = {int(w): float(v) for w, v in
                  dataset.data.groupby("word_id")["cloze"].first().items()}
        column = PredictorColumn.__new__(PredictorColumn)
        column.source_name = "cloze"
        column.values = {}
        column.logits = logits
        t_col = remef_cloze(fit, design, column)
        t_vec = remef_cloze(fit, design,
                            dataset.data["cloze"].to_numpy(dtype=float))
        assert t_col == pytest.approx(t_vec, abs=1e-8)


@pytest.fixture(scope="module")
def report(dataset):
    data = dataset.data.copy()
    rng = np.random.default_rng(8)
    word_noise = {w: rng.normal(0.0, 1.0) for w in data["word_id"].unique()}
    data["comp"] = data["cloze"] + data["word_id"].map(word_noise)
    ds = AnalysisDataset(data=data, predictor_names=["cloze", "comp"])
    return compare(ds, ["cloze", "comp"], cloze="cloze")


class TestCompareAndReport:
    def test_baseline_column_daic_zero(self, report):
        assert report.delta_aic["M0"] == 0.0

    def test_remef_ordering(self, report):
        m0 = abs(report.cloze_remef_t["M0"])
        own = abs(report.cloze_remef_t["M0+cloze"])
        noisy = abs(report.cloze_remef_t["M0+comp"])
        assert own < 0.5
        assert own < noisy < m0

    def test_report_shape(self, report):
        frame = report.to_frame()
        assert list(frame.columns) == ["M0", "M0+cloze", "M0+comp"]
        assert frame.index[-3:].tolist() == ["Pred (logit)", "dAIC",
                                             "Cloze-Remef"]
        assert frame.loc["Pred (logit)", "M0"] is None or np.isnan(
            frame.loc["Pred (logit)", "M0"])

    def test_render_and_parse_round_trip(self, report, tmp_path):
        tsv = render_report(report, tsv_path=tmp_path / "r.tsv",
                            md_path=tmp_path / "r.md")
        parsed = parse_report_tsv(tsv)
        frame = report.to_frame()
        for label in report.labels:
            for row in parsed.index:
                raw = frame.loc[row, label]
                got = parsed.loc[row, label]
                if raw is None or (isinstance(raw, float) and np.isnan(raw)):
                    assert np.isnan(got)
                elif row == "dAIC":
                    assert got == round(raw)
                else:
                    assert got == pytest.approx(raw, abs=5e-3)
        md = (tmp_path / "r.md").read_text()
        assert md.startswith("| Co-variable |")

    def test_empty_report_rejected(self):
        empty = ComparisonReport(covariate_terms=[], labels=[],
                                 t_by_model={}, pred_t={}, delta_aic={},
                                 cloze_remef_t={})
        with pytest.raises(ValidationError):
            render_report(empty)

    def test_metadata_carries_hash(self, report, dataset):
        assert "dataset_hash" in report.metadata
        assert report.metadata["n"] == dataset.n


class TestRowSetHash:
    def test_order_invariant(self, dataset):
        shuffled = AnalysisDataset(
            data=dataset.data.sample(frac=1.0, random_state=2)
            .reset_index(drop=True))
        assert row_set_hash(dataset) == row_set_hash(shuffled)

    def test_sensitive_to_rows(self, dataset):
        smaller = AnalysisDataset(data=dataset.data.iloc[:-1])
        assert row_set_hash(dataset) != row_set_hash(smaller)
