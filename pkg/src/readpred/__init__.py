"""readpred: word predictability toolkit for eye-movement reading-time analysis."""

from .corpus import (AnalysisDataset, ExclusionPolicy, annotate_covariates,
                     assemble_dataset, load_cloze, load_fixations, load_words)
from .errors import ConvergenceError, ToolkitError, ValidationError
from .lmm import (DesignMatrices, FitResult, ModelSpec, OptimizerConfig,
                  build_design, fit_lmm, profiled_deviance,
                  remove_fixed_effects, t_values)
from .ngram import NgramModel, Smoothing, ngram_prob, score_corpus, train_ngram
from .pipeline import (ComparisonReport, compare, delta_aic, remef_cloze,
                       render_report, run_baseline, run_with_predictor)
from .predictors import (MatchConfig, PredictorColumn, SmoothingConfig,
                         compute_cloze_pred, import_lm_probs, logistic, logit,
                         match_response)

__version__ = "0.1.0"
