"""Judge regressors by the mutual information left between inputs and residuals."""

from .datamodel import (
    AdditiveModelSpec,
    Dataset,
    InputLaw,
    NoiseSpec,
    PCAModel,
    SplitSpec,
    Standardizer,
    load_csv,
    pca_fit,
    pca_inverse,
    pca_transform,
    sample_additive,
    sine_model,
    split,
    target_function,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    EvaluationError,
    InfoTeacherError,
    IngestionError,
    SizeError,
    TrainingError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentCurve,
    default_config,
    emit,
    load_config,
    parse_config,
    read_curves,
    run_experiment,
)
from .mi import MIEstimate, ScheduleParams, estimate_mi, partition_mi, residuals, threshold
from .partition import JointSample, PartitionParams, TreePartition, empirical_measures, grow_full_tree, prune
from .regressors import FAVORABLE, UNFAVORABLE, MLPConfig, TrainedModel, fit_knn, fit_linear, fit_mlp
from .teacher import (
    ErrorRateCurve,
    TeacherVerdict,
    information_teacher,
    monte_carlo_error_rates,
    naive_mse_teacher,
    oracle_teacher,
)

__version__ = "0.1.0"
