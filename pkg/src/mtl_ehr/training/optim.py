"""Adam with decoupled weight decay, and global-norm gradient clipping."""
from __future__ import annotations

import numpy as np

from ..errors import NumericError

BETA1, BETA2, EPS = 0.9, 0.999, 1e-8


def global_norm(params):
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))


def clip_gradients(params, max_norm):
    """Rescale gradients in place so their joint L2 norm is at most ``max_norm``."""
    norm = global_norm(params)
    if not np.isfinite(norm):
        raise NumericError("non-finite gradient norm")
    if max_norm is not None and norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


def adam_step(params, lr, weight_decay=0.0, beta1=BETA1, beta2=BETA2, eps=EPS):
    """One Adam update on every unfrozen parameter.

    Parameters without a gradient (not reached by the loss) are left alone,
    including their decay, so an omitted decoder stays at its initial value.
    """
    for p in params:
        if p.frozen or p.grad is None:
            continue
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {p.name}")
        p.step_count += 1
        t = p.step_count
        p.moment1 = beta1 * p.moment1 + (1.0 - beta1) * g
        p.moment2 = beta2 * p.moment2 + (1.0 - beta2) * g * g
        m_hat = p.moment1 / (1.0 - beta1 ** t)
        v_hat = p.moment2 / (1.0 - beta2 ** t)
        update = m_hat / (np.sqrt(v_hat) + eps)
        if weight_decay:
            update = update + weight_decay * p.data
        p.data = p.data - lr * update


def zero_grad(params):
    for p in params:
        p.grad = None
