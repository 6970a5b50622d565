"""Model hyperparameters with strict (de)serialization."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import SchemaError, ValidationError

MERGE_MODES = ("sum", "max", "min")


@dataclass
class ModelConfig:
    feature_dim: int = 32
    embedding_dim: int = 64
    lstm_hidden: int = 64
    mlp_hidden: int = 64
    geometry_proj: int = 16
    neighbors: int = 5
    merge_mode: str = "sum"
    enable_transfer: bool = True
    enable_norm: bool = True
    logit_scale: float = 1.0

    def validate(self):
        for name in ("feature_dim", "embedding_dim", "lstm_hidden", "mlp_hidden",
                     "geometry_proj"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"config {name} must be positive")
        if self.neighbors < 0:
            raise ValidationError("config neighbors must be non-negative")
        if self.merge_mode not in MERGE_MODES:
            raise ValidationError(f"config merge_mode must be one of {MERGE_MODES}")
        if self.logit_scale <= 0:
            raise ValidationError("config logit_scale must be positive")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict):
            raise SchemaError("model config: expected a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise SchemaError(f"model config: unknown fields {sorted(unknown)}")
        return cls(**payload).validate()
