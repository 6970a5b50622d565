"""Reasoning network over language and image graphs."""

from .config import MERGE_MODES, ModelConfig
from .model import (
    GroundingModel,
    PhraseEncoding,
    SceneEncoding,
    attend_node,
    attend_relation,
    encode_phrase,
    forward,
    gate_value,
    inference_order,
    init_params,
    loss,
    merge,
    norm,
    predict,
    process_intermediate,
    process_leaf,
    transfer,
    word_attention,
)
from .trace import ReasoningTrace, trace_to_dot
from .vocab import UNK, Vocabulary

__all__ = [
    "MERGE_MODES",
    "ModelConfig",
    "GroundingModel",
    "PhraseEncoding",
    "ReasoningTrace",
    "SceneEncoding",
    "UNK",
    "Vocabulary",
    "attend_node",
    "attend_relation",
    "encode_phrase",
    "forward",
    "gate_value",
    "inference_order",
    "init_params",
    "loss",
    "merge",
    "norm",
    "predict",
    "process_intermediate",
    "process_leaf",
    "trace_to_dot",
    "transfer",
    "word_attention",
]
