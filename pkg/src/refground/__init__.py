"""refground: grounding referring expressions by reasoning over object graphs."""

__version__ = "0.1.0"
