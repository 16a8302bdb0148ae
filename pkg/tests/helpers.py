"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from deeplcp.nn import backward, forward, loss


def _loss_at(model, x, label):
    pred, _ = forward(model, x)
    return loss(pred, label)


def max_gradient_error(model, x, label, step=1e-5):
    """Max relative error between analytic and central-difference gradients
    over every parameter of the model."""
    _pred, cache = forward(model, x)
    grads = backward(model, cache, label)
    worst = 0.0

    def compare(array, grad):
        nonlocal worst
        flat, gflat = array.reshape(-1), np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = _loss_at(model, x, label)
            flat[i] = orig - step
            lo = _loss_at(model, x, label)
            flat[i] = orig
            numeric = (hi - lo) / (2 * step)
            denom = max(abs(numeric) + abs(gflat[i]), 1e-8)
            worst = max(worst, abs(numeric - gflat[i]) / denom)

    for f, g in zip(model.filters, grads.filter_w):
        compare(f.weights, g)
    for j, f in enumerate(model.filters):
        orig = f.bias
        f.bias = orig + step
        hi = _loss_at(model, x, label)
        f.bias = orig - step
        lo = _loss_at(model, x, label)
        f.bias = orig
        numeric = (hi - lo) / (2 * step)
        denom = max(abs(numeric) + abs(grads.filter_b[j]), 1e-8)
        worst = max(worst, abs(numeric - grads.filter_b[j]) / denom)
    compare(model.dense_w, grads.dense_w)
    compare(model.dense_b, grads.dense_b)
    return worst
