"""MLP and bi-directional LSTM built on the taped primitives.

Initialization convention (the one documented place): every weight and bias is
drawn uniformly from [-k, k] with k = 1/sqrt(fan) where fan is the layer's
input width for MLP layers and the hidden width for LSTM weights.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, UsageError
from . import tensor as T


def uniform_init(rng, shape, k):
    return rng.uniform(-k, k, size=shape)


def init_mlp(store, prefix, dims, rng):
    """Register an MLP under ``prefix`` with widths dims[0] -> ... -> dims[-1]."""
    if len(dims) < 2:
        raise UsageError(f"mlp {prefix!r} needs at least one layer")
    for i, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        k = 1.0 / np.sqrt(din)
        store.add(f"{prefix}.w{i}", uniform_init(rng, (din, dout), k))
        store.add(f"{prefix}.b{i}", uniform_init(rng, (dout,), k))


def mlp_layer_count(store, prefix):
    n = 0
    while f"{prefix}.w{n}" in store:
        n += 1
    if n == 0:
        raise UsageError(f"no MLP registered under {prefix!r}")
    return n


def mlp_apply(store, prefix, x):
    """Affine/ReLU chain; ReLU between layers, none after the last."""
    n = mlp_layer_count(store, prefix)
    out = x
    for i in range(n):
        w = store[f"{prefix}.w{i}"]
        b = store[f"{prefix}.b{i}"]
        try:
            out = T.affine(out, w, b)
        except ShapeError as exc:
            raise ShapeError(f"{prefix}.w{i}: {exc}") from None
        if i < n - 1:
            out = T.relu(out)
    return out


def init_bilstm(store, prefix, embed_dim, hidden, rng):
    k = 1.0 / np.sqrt(hidden)
    for direction in ("fw", "bw"):
        store.add(
            f"{prefix}.{direction}.w",
            uniform_init(rng, (4 * hidden, embed_dim + hidden), k),
        )
        store.add(f"{prefix}.{direction}.b", uniform_init(rng, (4 * hidden,), k))


def _run_direction(w, b, steps, hidden):
    h = T.Tensor(np.zeros(hidden))
    c = T.Tensor(np.zeros(hidden))
    states = []
    for x in steps:
        hc = T.lstm_step(w, b, x, h, c)
        h = T.slice1(hc, 0, hidden)
        c = T.slice1(hc, hidden, 2 * hidden)
        states.append(h)
    return states


def bilstm_encode(store, prefix, embeddings):
    """Encode a token embedding sequence.

    Returns (contexts, summary): per-token vectors [h_fw(t); h_bw(t)] and the
    concatenation of each direction's final hidden state. For a single token
    the summary equals the lone context vector.
    """
    if not embeddings:
        raise UsageError("bilstm_encode needs a non-empty sequence")
    wf = store[f"{prefix}.fw.w"]
    bf = store[f"{prefix}.fw.b"]
    wb = store[f"{prefix}.bw.w"]
    bb = store[f"{prefix}.bw.b"]
    hidden = bf.data.shape[0] // 4
    fw = _run_direction(wf, bf, embeddings, hidden)
    bw_rev = _run_direction(wb, bb, list(reversed(embeddings)), hidden)
    bw = list(reversed(bw_rev))
    contexts = [T.concat([f, b]) for f, b in zip(fw, bw)]
    summary = T.concat([fw[-1], bw[0]])
    return contexts, summary
