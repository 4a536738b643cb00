"""Binary RBMs trained with contrastive divergence, instrumented with
partition-free stopping diagnostics, reconstruction probability, and
brute-force exact log-likelihood."""

from .criteria import (
    MetricsRecord,
    PartitionValue,
    XiProbe,
    XiVariant,
    exact_gradient,
    exact_log_likelihood,
    log_partition,
    log_xi,
    reconstruction_log_prob,
    xi_probe,
)
from .datasets import (
    Dataset,
    generate_bars_and_stripes,
    generate_labeled_shifter,
    read_dataset,
    write_dataset,
)
from .experiment import (
    ExperimentConfig,
    PeakReport,
    RunResult,
    average_runs,
    default_config,
    detect_peak,
    generate_samples,
    run_experiment,
)
from .rbm import (
    GibbsChain,
    RbmParams,
    energy,
    hidden_conditional_mean,
    log_unnormalized_marginal,
    run_gibbs_chain,
    sample_bernoulli,
    unnormalized_marginal,
    visible_conditional_mean,
    zero_params,
)
from .training import (
    GradientEstimate,
    TrainingConfig,
    apply_update,
    cd_gradient,
    init_params,
    train_epoch,
)

__version__ = "0.1.0"
