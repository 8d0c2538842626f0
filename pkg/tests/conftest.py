"""Shared oracles for the test suite."""

import numpy as np

import framenet as fn


def finite_difference_grads(net, batch, labels, h=1e-5, forward_fn=None):
    """Central-difference gradient of mean cross entropy w.r.t. every
    parameter, probing the real forward pass one scalar at a time."""
    if forward_fn is None:
        forward_fn = lambda: fn.forward(net, batch)
    grads = []
    for arr in net.get_params():
        g = np.zeros_like(arr)
        flat, gflat = arr.ravel(), g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn.cross_entropy(forward_fn().yhat, labels)
            flat[i] = orig - h
            f_minus = fn.cross_entropy(forward_fn().yhat, labels)
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric, floor=1e-4):
    """Largest elementwise relative error between two gradient lists.

    The denominator is floored so that exactly-dead entries (both sides
    ~0) compare by absolute difference against the floor instead of
    dividing noise by noise.
    """
    worst = 0.0
    for a, b in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


def nearest_mean_accuracy(d):
    """Linear-classifier oracle: fit per-class means, classify by
    nearest mean, return accuracy on the same frames."""
    k = d.num_classes
    means = np.vstack([d.frames[d.labels == c].mean(axis=0) for c in range(k)])
    d2 = ((d.frames[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return float((d2.argmin(axis=1) == d.labels).mean())
