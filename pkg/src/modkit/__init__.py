"""Information-theoretic modulator analysis with random forests.

The library answers one question about tabular data: does a categorical
factor (diet, tumour line, ...) carry information about a set of
measured features?  Exact answers come from a joint pmf (:mod:`modkit.info`);
empirical answers come from comparing a random forest against the prior
baseline over repeated random splits (:mod:`modkit.evaluation`).
"""

__version__ = "0.1.0"

from .errors import DegenerateDataError, InputError, InvariantViolation, ModkitError
from .data import (
    Dataset,
    FactorColumn,
    FeatureColumn,
    FeatureKind,
    Partition,
    normalize_relative,
    partition,
    stratify,
    train_size,
)
from .info import (
    JointPmf,
    conditional_entropy,
    conditional_mutual_information,
    empirical_joint,
    entropy,
    is_modulator,
    is_robust_modulator,
    modulator_witness,
    mutual_information,
    quantile_bins,
    robust_modulator_witness,
)
from .forest import (
    Forest,
    ForestParams,
    Tree,
    best_split,
    gini_impurity,
    majority_vote,
    predict,
    train_forest,
)
from .evaluation import (
    EvaluationReport,
    TransferMatrix,
    accuracy,
    f1_score,
    macro_f1,
    prior_estimator,
    repeated_evaluation,
    transfer_matrix,
)
from .importance import (
    ImportanceRanking,
    elbow_subset_size,
    permutation_importance,
    rank_features,
    select_optimal_subset,
)
from .synth import GroundTruth, Scenario, ScenarioSpec, generate
from .io import TableSchema, load_csv, read_report, write_dataset_csv, write_report
