"""Adam with bias correction, operating in place on a ParamStore."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError


def adam_step(store, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One update over every parameter; missing gradients count as zero.

    Consumes the accumulated gradients (zeroed afterwards) and advances the
    shared step counter used for bias correction.
    """
    if not store.any_grad():
        raise UsageError("adam_step called with no gradients populated")
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in store.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        m = store.adam_m.get(name)
        if m is None:
            m = store.adam_m[name] = np.zeros_like(p.data)
            store.adam_v[name] = np.zeros_like(p.data)
        v = store.adam_v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    store.zero_grads()
