"""framenet: desk-scale neural-network frame classification.

Dense, convolutional, and locally untied architectures trained with
classical-momentum or Nesterov stochastic gradient, plus dataset
tooling (synthetic hierarchical frames, splicing, normalization, label
corruption), early stopping, early realignment, prior-scaled scoring,
and coding-property analysis.
"""

from .analysis import (
    AnalysisReport,
    GroupedConfusion,
    activation_probabilities,
    analyze_coding,
    code_length,
    dispersion,
    grouped_confusion,
    scree,
)
from .data import (
    Dataset,
    FormatError,
    SyntheticSpec,
    corrupt_labels,
    generate_synthetic,
    load_csv,
    load_dataset,
    normalize_global,
    apply_normalization,
    save_dataset,
    splice,
    splice_dataset,
    split_train_dev,
)
from .network import (
    Conv,
    Dense,
    FlatInput,
    ForwardTrace,
    GridInput,
    Network,
    SoftmaxOutput,
    Untied,
    backward,
    conv_forward,
    dense_forward,
    dropout_mask,
    forward,
    init_network,
    load_checkpoint,
    max_pool,
    num_params,
    relu,
    save_checkpoint,
    softmax,
    untied_forward,
)
from .numerics import (
    NumericError,
    ParameterError,
    Rng,
    ShapeError,
    gaussian_init,
    matmul,
)
from .optim import (
    ConstantMomentum,
    EveryNIterations,
    OptimizerConfig,
    OptimizerState,
    PerEpochHalving,
    RampMomentum,
    accuracy,
    anneal,
    cm_update,
    cross_entropy,
    momentum_schedule,
    nag_update,
)
from .training import (
    DivergenceError,
    TrainConfig,
    TrainLog,
    estimate_priors,
    evaluate,
    fraction_labels_changed,
    realign_labels,
    realign_train,
    scaled_scores,
    train,
)

__version__ = "0.1.0"
