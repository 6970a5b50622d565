"""Small shared helpers: atomic writes, canonical JSON, seed derivation."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


def atomic_write_text(path, text):
    """Write text to path via a temp file in the same directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj, indent=2):
    # repr-based float formatting: round-trips float64 exactly in json
    return json.dumps(obj, indent=indent, sort_keys=False, ensure_ascii=False)


def atomic_write_json(path, obj, indent=2):
    atomic_write_text(path, dump_json(obj, indent=indent) + "\n")


def derive_seed(*parts):
    """Stable 63-bit seed from a base seed plus arbitrary string/int parts.

    Independent of PYTHONHASHSEED so artifacts reproduce across processes.
    """
    h = hashlib.sha256()
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big") >> 1
