"""Independent reference computations used to freeze expected test values.

Everything here is straight-line numpy with no imports from the package's
differentiable code paths, so agreement is meaningful.
"""

from __future__ import annotations

import numpy as np


def fd_gradient(f, x, h=1e-5):
    """Central finite differences of scalar f at flat array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a, b, floor=1e-3):
    """Worst-case relative error with a small absolute floor on the scale."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def mlp_forward(weights, x):
    """weights: list of (W, b) pairs; ReLU between layers, none after last."""
    out = np.asarray(x, dtype=np.float64)
    for i, (w, b) in enumerate(weights):
        out = out @ w + b
        if i < len(weights) - 1:
            out = np.maximum(out, 0.0)
    return out


def _sig(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_direction(w, b, xs, hidden):
    """Step-by-step recurrence; gate order input, forget, cell, output."""
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    states = []
    for x in xs:
        z = w @ np.concatenate([x, h]) + b
        gi = _sig(z[:hidden])
        gf = _sig(z[hidden : 2 * hidden])
        gg = np.tanh(z[2 * hidden : 3 * hidden])
        go = _sig(z[3 * hidden :])
        c = gf * c + gi * gg
        h = go * np.tanh(c)
        states.append(h.copy())
    return states


def bilstm_reference(wf, bf, wb, bb, xs, hidden):
    fw = lstm_direction(wf, bf, xs, hidden)
    bw = lstm_direction(wb, bb, list(reversed(xs)), hidden)
    bw = list(reversed(bw))
    contexts = [np.concatenate([f, bk]) for f, bk in zip(fw, bw)]
    summary = np.concatenate([fw[-1], bw[0]])
    return contexts, summary


def softmax_np(x):
    e = np.exp(x - np.max(x))
    return e / e.sum()


def l2n(x):
    n = np.linalg.norm(x)
    return x if n < 1e-12 else x / n


def word_attention_reference(contexts, embeddings, head):
    """Eq-style word attention: softmax over head scores, sum of embeddings."""
    scores = np.array([head @ c for c in contexts])
    alpha = softmax_np(scores)
    return alpha, sum(a * e for a, e in zip(alpha, embeddings))


def knn_edges_bruteforce(centers, ids, k):
    """All-pairs sort per receiver; ties by smaller candidate id."""
    n = len(centers)
    edges = set()
    for i in range(n):
        cands = []
        for j in range(n):
            if j == i:
                continue
            d = float(np.hypot(*(np.asarray(centers[i]) - np.asarray(centers[j]))))
            cands.append((d, ids[j], j))
        cands.sort()
        for _, _, j in cands[: min(k, n - 1)]:
            edges.add((i, j))
    return edges


def dense_transfer(gamma_matrix, lam):
    return np.asarray(gamma_matrix) @ np.asarray(lam)
