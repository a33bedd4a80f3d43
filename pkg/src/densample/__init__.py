"""densample: covariate-space sampling for imbalanced regression data.

Rebalances a training set whose covariates pile up in a few high-density
regions, then quantifies what the rebalancing buys (accuracy on
underrepresented observations) and what it costs (overall accuracy).
"""

from .dataset import (
    Dataset,
    FilterReport,
    IngestionConfig,
    SplitSpec,
    StandardizationParams,
    apply_standardization,
    filter_columns,
    fit_standardization,
    invert_standardization,
    load_csv,
    train_test_split,
    write_csv,
)
from .errors import ValidationError
from .evaluation import (
    BASELINE_LABEL,
    EvaluationReport,
    ExperimentSummary,
    StrategyResult,
    evaluate_model,
    residual_winner_map,
    rmse,
    run_experiment,
    run_resplit_experiment,
    select_underrepresented,
)
from .neighbors import (
    DensityScore,
    NeighborIndex,
    build_index,
    density_score_records,
    knn,
    mean_knn_distances,
)
from .pca import PcaModel, fit_pca, project
from .regression import LinearModel, fit_ols, load_model, predict, save_model
from .sampling import (
    HyperRectangle,
    SampledDataset,
    SamplingPlan,
    STRATEGIES,
    density_weights,
    draw_sample,
    hyper_rectangle,
    sample_1point,
    sample_density,
    sample_mean,
    sample_random_baseline,
    sample_random_equal_weight,
    sample_uniform_z,
    weighted_positions_with_replacement,
)
from .synth import SynthDataset, SynthSpec, benchmark_spec, generate

__version__ = "0.1.0"
