"""Intracranial error-decoding toolkit.

Synthetic iEEG generation, preprocessing, from-scratch convolutional
networks, a regularized LDA baseline, class-imbalance-aware metrics,
permutation and rank statistics, and time-resolved anatomical mapping.
"""

__version__ = "0.1.0"

from .data import (
    CLASS_NAMES,
    CORRECT,
    ERROR,
    ChannelMeta,
    EpochSet,
    EventMarker,
    Recording,
    class_index,
    load_recording,
    save_recording,
)
from .errors import ConfigError, DataError, ErrdecodeError, NumericalError
from .mapping import (
    RoiBox,
    RoiTable,
    TimeCourse,
    assign_roi,
    default_roi_table,
    gaussian_smooth,
    peak_sort,
    perturbation_correlation,
    roi_pool,
    sliding_window_decode,
)
from .metrics import (
    ConfusionMatrix,
    acc_norm,
    build_report,
    confusion,
    f1,
    macro,
    mean_acc_norm,
    pooled_acc_norm,
    precision,
    specificity,
    tpr,
)
from .pipeline import (
    RunConfig,
    run_all_channel,
    run_single_channel,
    run_synth,
    run_timeresolved,
)
from .preprocess import (
    bipolar_rereference,
    chronological_split,
    epoch_extract,
    resample,
    resample_signal,
    subsample_balance,
)
from .rlda import RldaModel, ledoit_wolf_cov, rlda_fit, rlda_predict, rlda_score
from .rng import derive_rng, derive_seedseq
from .stats import (
    PermutationResult,
    permutation_test,
    spearman,
    wilcoxon_signed_rank,
)
from .synth import SynthConfig, colored_noise, erp_template, generate

__all__ = [
    "CLASS_NAMES",
    "CORRECT",
    "ERROR",
    "ChannelMeta",
    "ConfigError",
    "ConfusionMatrix",
    "DataError",
    "EpochSet",
    "ErrdecodeError",
    "EventMarker",
    "NumericalError",
    "PermutationResult",
    "Recording",
    "RldaModel",
    "RoiBox",
    "RoiTable",
    "RunConfig",
    "SynthConfig",
    "TimeCourse",
    "acc_norm",
    "assign_roi",
    "bipolar_rereference",
    "build_report",
    "chronological_split",
    "class_index",
    "colored_noise",
    "confusion",
    "default_roi_table",
    "derive_rng",
    "derive_seedseq",
    "epoch_extract",
    "erp_template",
    "f1",
    "gaussian_smooth",
    "generate",
    "ledoit_wolf_cov",
    "load_recording",
    "macro",
    "mean_acc_norm",
    "peak_sort",
    "permutation_test",
    "perturbation_correlation",
    "pooled_acc_norm",
    "precision",
    "resample",
    "resample_signal",
    "rlda_fit",
    "rlda_predict",
    "rlda_score",
    "roi_pool",
    "run_all_channel",
    "run_single_channel",
    "run_synth",
    "run_timeresolved",
    "save_recording",
    "sliding_window_decode",
    "spearman",
    "specificity",
    "subsample_balance",
    "tpr",
    "wilcoxon_signed_rank",
    "__version__",
]
