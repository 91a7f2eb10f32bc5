"""Parameter-shared transformer classifier with a two-stage early-exit policy."""

from ._core import (
    CurvePoint,
    ElbertError,
    EncodedExample,
    ExitConfig,
    ExitDecision,
    ExitEngine,
    ExitReason,
    ModelConfig,
    Parameters,
    ProbDist,
    Stage2Criterion,
    SweepConfig,
    SynthSpec,
    TrainConfig,
    Vocab,
    build_vocab,
    encode,
    evaluate,
    exit_loss,
    flops_estimate,
    forward_adaptive,
    forward_full,
    generate_synthetic,
    gradient_audit,
    init_parameters,
    layer_weights,
    load_checkpoint,
    load_tsv,
    puzzlement,
    save_checkpoint,
    sweep,
    train,
    truncated_baseline,
)

__all__ = [
    "CurvePoint",
    "ElbertError",
    "EncodedExample",
    "ExitConfig",
    "ExitDecision",
    "ExitEngine",
    "ExitReason",
    "ModelConfig",
    "Parameters",
    "ProbDist",
    "Stage2Criterion",
    "SweepConfig",
    "SynthSpec",
    "TrainConfig",
    "Vocab",
    "build_vocab",
    "encode",
    "evaluate",
    "exit_loss",
    "flops_estimate",
    "forward_adaptive",
    "forward_full",
    "generate_synthetic",
    "gradient_audit",
    "init_parameters",
    "layer_weights",
    "load_checkpoint",
    "load_tsv",
    "puzzlement",
    "save_checkpoint",
    "sweep",
    "train",
    "truncated_baseline",
]
