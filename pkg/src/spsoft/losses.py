"""Segmentation losses with hand-derived gradients.

Predictions are arrays of shape ``(C, *dims)``. Every ``*_and_grad``
function takes logits and returns ``(value, d value / d logits)``; the
gradient is chained through the softmax analytically. All losses are
means over pixels, so values do not depend on image size.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_EPS = 1e-7
DICE_EPS = 1e-5


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    class_weights: np.ndarray | None = None  # None means uniform

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.class_weights is not None:
            w = np.asarray(self.class_weights, dtype=float)
            if np.any(w <= 0):
                raise ValueError("class weights must be positive")
            object.__setattr__(self, "class_weights", w)


def _planes(x):
    return np.asarray(getattr(x, "planes", x), dtype=float)


def _check_shapes(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ValueError(f"shape mismatch: {shape} vs {a.shape}")


def softmax(logits):
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def softmax_backward(p, grad_p):
    """Pull a gradient w.r.t. probabilities back to the logits."""
    return p * (grad_p - (p * grad_p).sum(axis=0, keepdims=True))


def _weights(class_weights, c):
    if class_weights is None:
        return np.ones(c)
    w = np.asarray(class_weights, dtype=float)
    if w.shape != (c,):
        raise ValueError(f"expected {c} class weights, got shape {w.shape}")
    return w


def _bcast(w, ndim):
    return w.reshape((-1,) + (1,) * (ndim - 1))


def class_weights_enet(freqs):
    """ENet-style weights 1 / ln(1.02 + freq); rare classes get up to ~50."""
    f = np.asarray(freqs, dtype=float)
    return 1.0 / np.log(1.02 + f)


def ce_loss(hard, pred, class_weights=None):
    y, p = _planes(hard), _planes(pred)
    _check_shapes(y, p)
    w = _bcast(_weights(class_weights, y.shape[0]), y.ndim)
    n = y[0].size
    return float(-(w * y * np.log(np.maximum(p, LOG_EPS))).sum() / n)


def _ce_grad_p(y, p, w):
    n = y[0].size
    return np.where(p > LOG_EPS, -w * y / (n * p), 0.0)


def kl_loss(soft, pred):
    q, p = _planes(soft), _planes(pred)
    _check_shapes(q, p)
    n = q[0].size
    pos = q > 0
    terms = np.zeros_like(q)
    terms[pos] = q[pos] * (np.log(q[pos]) - np.log(np.maximum(p[pos], LOG_EPS)))
    return float(terms.sum() / n)


def _kl_grad_p(q, p):
    n = q[0].size
    return np.where(p > LOG_EPS, -q / (n * p), 0.0)


def _dice_terms(y, p):
    axes = tuple(range(1, y.ndim))
    inter = (p * y).sum(axis=axes)
    denom = p.sum(axis=axes) + y.sum(axis=axes)
    return inter, denom


def dice_loss(hard, pred):
    """1 minus the class-averaged soft Dice, smoothed by ``DICE_EPS``."""
    y, p = _planes(hard), _planes(pred)
    _check_shapes(y, p)
    inter, denom = _dice_terms(y, p)
    return float(1.0 - np.mean((2 * inter + DICE_EPS) / (denom + DICE_EPS)))


def _dice_grad_p(y, p):
    c = y.shape[0]
    inter, denom = _dice_terms(y, p)
    d = denom + DICE_EPS
    num = 2 * inter + DICE_EPS
    a = _bcast(d, y.ndim)
    b = _bcast(num, y.ndim)
    return -(2 * y * a - b) / (c * a**2)


def ce_loss_and_grad(hard, logits, class_weights=None):
    y, z = _planes(hard), _planes(logits)
    _check_shapes(y, z)
    p = softmax(z)
    w = _bcast(_weights(class_weights, y.shape[0]), y.ndim)
    return ce_loss(y, p, class_weights), softmax_backward(p, _ce_grad_p(y, p, w))


def kl_loss_and_grad(soft, logits):
    q, z = _planes(soft), _planes(logits)
    _check_shapes(q, z)
    p = softmax(z)
    return kl_loss(q, p), softmax_backward(p, _kl_grad_p(q, p))


def dice_loss_and_grad(hard, logits):
    y, z = _planes(hard), _planes(logits)
    _check_shapes(y, z)
    p = softmax(z)
    return dice_loss(y, p), softmax_backward(p, _dice_grad_p(y, p))


def combined_loss(hard, soft, logits, weights=None):
    """CE (optionally weighted) + alpha * Dice + beta * KL, and its logit gradient.

    ``soft`` may be None when ``beta == 0``.
    """
    weights = weights or LossWeights()
    y, z = _planes(hard), _planes(logits)
    _check_shapes(y, z)
    p = softmax(z)
    w = _bcast(_weights(weights.class_weights, y.shape[0]), y.ndim)
    value = ce_loss(y, p, weights.class_weights)
    grad_p = _ce_grad_p(y, p, w)
    if weights.alpha:
        value += weights.alpha * dice_loss(y, p)
        grad_p = grad_p + weights.alpha * _dice_grad_p(y, p)
    if weights.beta:
        if soft is None:
            raise ValueError("soft labels required when beta > 0")
        q = _planes(soft)
        _check_shapes(q, z)
        value += weights.beta * kl_loss(q, p)
        grad_p = grad_p + weights.beta * _kl_grad_p(q, p)
    return value, softmax_backward(p, grad_p)
