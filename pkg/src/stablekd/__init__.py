"""StableKD: blockwise teacher-routed distillation with progressive
block recomposition, plus a vanilla-KD baseline and optimization-
stability instrumentation, runnable at desk scale."""

from ._kernels import BACKEND as kernel_backend
from .datasets import Dataset, SubsetSpec, batches, gen_spirals, gen_tiles, load_skd, save_skd, stratified_subset
from .instrumentation import DistanceTrace, MetricRecord, fluctuation_score, param_distance
from .losses import LossBreakdown, cross_entropy, kl_divergence, mse_feature, stablekd_loss, vanilla_kd_loss
from .network import (
    Activation,
    LayerSpec,
    Network,
    build_network,
    forward_prefix,
    init_params,
    insert_projectors,
    load_arch,
    load_checkpoint,
    save_arch,
    save_checkpoint,
)
from .partition import Partition, make_partition, recompose, validate
from .tensor import Parameter, Tensor, backward, finite_diff_check
from .trainer import (
    OptimConfig,
    RunResult,
    StageSchedule,
    TrainState,
    evaluate,
    lr_at,
    run_ce,
    run_stablekd,
    run_vanilla_kd,
    sgd_step,
)

__version__ = "0.1.0"
