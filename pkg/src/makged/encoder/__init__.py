from .gcn import (
    GcnParameters,
    GraphBatch,
    SubgraphEmbedding,
    TrainConfig,
    TrainResult,
    build_batch,
    encode_subgraph,
    init_parameters,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
    train_encoder,
)
from .gradcheck import gcn_gradient_check, gradient_oracle_check, lm_gradient_check
from .lm import (
    FusedEmbedding,
    TextEmbedding,
    TokenProbabilityModel,
    ToyConditionedModel,
    TrainingSequence,
    UniformModel,
    assemble_training_sequence,
    fuse,
    hashed_text_embedding,
    instruction_tuning_loss,
)

__all__ = [
    "FusedEmbedding",
    "GcnParameters",
    "GraphBatch",
    "SubgraphEmbedding",
    "TextEmbedding",
    "TokenProbabilityModel",
    "ToyConditionedModel",
    "TrainConfig",
    "TrainResult",
    "TrainingSequence",
    "UniformModel",
    "assemble_training_sequence",
    "build_batch",
    "encode_subgraph",
    "fuse",
    "gcn_gradient_check",
    "gradient_oracle_check",
    "hashed_text_embedding",
    "init_parameters",
    "instruction_tuning_loss",
    "lm_gradient_check",
    "load_checkpoint",
    "predict_proba",
    "save_checkpoint",
    "train_encoder",
]
