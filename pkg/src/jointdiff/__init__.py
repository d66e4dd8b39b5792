"""jointdiff: joint multi-outcome interventional distributions learned with
masked conditional score diffusion, plus synthetic generators, a
product-of-marginals baseline, and distributional evaluation metrics.
"""

from .autoreg import (
    JointOutcomeModel,
    SampleSet,
    Standardization,
    TrainConfig,
    aggregate_orderings,
    autoregressive_sample,
    hierarchical_train,
    predict_capo,
    predict_cate,
)
from .baselines import (
    MarginalProductModel,
    sample_marginal_product,
    train_marginal_product,
)
from .bundle import load_bundle, save_bundle
from .categorical import (
    CategoricalModel,
    cat_forward,
    cat_sample,
    ce_loss,
    train_categorical,
)
from .conditioning import ConditionConfig, ConditionEncoder, embed_condition
from .diffusion import (
    ConditionBatch,
    ConditionalScoreModel,
    DiffusionSchedule,
    ModelConfig,
    dsm_loss,
    forward_perturb,
    reverse_sample,
    reverse_sample_scorefn,
    schedule_coefficients,
    train_conditional_score,
)
from .errors import ConfigError, DataError, JointDiffError, NumericError
from .metrics import (
    correlation_probe,
    empirical_kl,
    empirical_w1,
    ground_cost,
    kde_fit,
    pehe,
    pmf_fit,
    solve_assignment,
)
from .nn import (
    AdamState,
    MlpSpec,
    ParamStore,
    adam_step,
    backprop_gradients,
    mlp_forward,
    sinusoidal_time_embed,
)
from .schema import (
    Dataset,
    MaskTriple,
    ObservationalRecord,
    Ordering,
    OutcomeSchema,
    OutcomeSpec,
    build_orderings,
    masks_for_step,
    validate_record,
)
from .synthgen import (
    BivariateNormalDgpConfig,
    RhoDgpConfig,
    bvn_sample_joint,
    bvn_true_density,
    generate_bvn_dataset,
    generate_rho_dataset,
    oracle_capo_cate,
    rho_sample_joint,
    split_dataset,
)

__version__ = "0.1.0"
