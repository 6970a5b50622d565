"""Named trainable parameters with optimizer state and exact JSON round-trip."""

from __future__ import annotations

import json

import numpy as np

from ..errors import SchemaError, UsageError
from ..util import atomic_write_text
from .tensor import Tensor

CHECKPOINT_FORMAT = "refground-params"
CHECKPOINT_VERSION = 1


class ParamStore:
    """Ordered mapping name -> trainable Tensor, plus Adam moment buffers."""

    def __init__(self):
        self._params = {}
        self.adam_m = {}
        self.adam_v = {}
        self.step_count = 0

    def add(self, name, data):
        if name in self._params:
            raise UsageError(f"parameter {name!r} already registered")
        t = Tensor(np.array(data, dtype=np.float64), trainable=True)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        try:
            return self._params[name]
        except KeyError:
            raise UsageError(f"unknown parameter {name!r}") from None

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def total_size(self):
        return sum(int(t.data.size) for t in self._params.values())

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def any_grad(self):
        return any(t.grad is not None for t in self._params.values())

    def to_dict(self):
        """JSON-safe dict; float lists round-trip float64 exactly via repr."""
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "params": {
                name: {
                    "shape": list(t.data.shape),
                    "data": t.data.reshape(-1).tolist(),
                }
                for name, t in self._params.items()
            },
        }

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
            raise SchemaError("not a parameter checkpoint payload")
        if payload.get("version") != CHECKPOINT_VERSION:
            raise SchemaError(f"unsupported checkpoint version {payload.get('version')!r}")
        store = cls()
        entries = payload.get("params")
        if not isinstance(entries, dict):
            raise SchemaError("checkpoint missing 'params' mapping")
        for name, entry in entries.items():
            try:
                shape = tuple(entry["shape"])
                data = np.array(entry["data"], dtype=np.float64).reshape(shape)
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"malformed checkpoint entry {name!r}: {exc}") from None
            store.add(name, data)
        return store

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise SchemaError(f"checkpoint file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise SchemaError(f"checkpoint is not valid JSON: {exc}") from None
        return cls.from_dict(payload)
