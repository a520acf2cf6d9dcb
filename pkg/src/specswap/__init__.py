"""Frequency-domain data augmentation via amplitude swaps between clean
and adversarial images, with the training, attack, corruption, and
evaluation machinery needed to study its robustness effects."""

__version__ = "0.1.0"

from .attacks import AttackConfig, directional_gain, fgsm, pgd, project_l2, project_linf
from .corruptions import (
    CORRUPTION_TYPES,
    CorruptionSpec,
    corrupt,
    corrupt_dataset,
    corruption_suite,
)
from .data import Dataset, batch_iter, load_cifar_batch, load_dataset, save_dataset, synth_generate
from .estimator import AmplitudeRecombiner, CorruptionTransformer, SwapAugmentClassifier
from .evaluation import (
    EvalCondition,
    EvalReport,
    emit_report,
    evaluate,
    fooling_table,
    full_report,
    read_report,
)
from .harness import (
    EpochRecord,
    Regime,
    TrainConfig,
    build_step_batch,
    detect_catastrophic_overfit,
    detect_robust_overfit,
    train,
)
from .model import ConvClassifier, SGD, cross_entropy, load_model, lr_schedule, save_model
from .spectral import (
    adversarial_amplitude_swap,
    amplitude,
    apr_swap,
    dft,
    dft_direct,
    idft,
    idft_direct,
    phase,
    recombine,
)

__all__ = [
    "AttackConfig", "directional_gain", "fgsm", "pgd", "project_l2", "project_linf",
    "CORRUPTION_TYPES", "CorruptionSpec", "corrupt", "corrupt_dataset",
    "corruption_suite",
    "Dataset", "batch_iter", "load_cifar_batch", "load_dataset", "save_dataset",
    "synth_generate",
    "AmplitudeRecombiner", "CorruptionTransformer", "SwapAugmentClassifier",
    "EvalCondition", "EvalReport", "emit_report", "evaluate", "fooling_table",
    "full_report", "read_report",
    "EpochRecord", "Regime", "TrainConfig", "build_step_batch",
    "detect_catastrophic_overfit", "detect_robust_overfit", "train",
    "ConvClassifier", "SGD", "cross_entropy", "load_model", "lr_schedule",
    "save_model",
    "adversarial_amplitude_swap", "amplitude", "apr_swap", "dft", "dft_direct",
    "idft", "idft_direct", "phase", "recombine",
]
