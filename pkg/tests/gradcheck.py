"""Finite-difference gradient checking shared by the nn and agent tests."""

import numpy as np


def max_relative_error(loss_fn, params, eps=1e-5, per_param=None, seed=0):
    """Worst relative error between autodiff and central differences over ``params``.

    ``per_param`` limits the check to that many random entries of each tensor.
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = np.arange(p.data.size)
        if per_param is not None and flat.size > per_param:
            flat = rng.choice(flat, per_param, replace=False)
        for j in flat:
            i = np.unravel_index(j, p.data.shape)
            orig = p.data[i]
            p.data[i] = orig + eps
            up = loss_fn().item()
            p.data[i] = orig - eps
            down = loss_fn().item()
            p.data[i] = orig
            numeric = (up - down) / (2 * eps)
            denom = max(abs(numeric), abs(analytic[i]), 1e-6)
            worst = max(worst, abs(numeric - analytic[i]) / denom)
    return worst
