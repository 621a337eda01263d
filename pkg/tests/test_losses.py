import math

import numpy as np
import pytest

from oracles import central_difference, relative_error
from spsoft.grid import LabelMap, one_hot_encode
from spsoft.losses import (
    LOG_EPS,
    LossWeights,
    ce_loss,
    ce_loss_and_grad,
    class_weights_enet,
    combined_loss,
    dice_loss,
    dice_loss_and_grad,
    kl_loss,
    kl_loss_and_grad,
    softmax,
)


def col(*values):
    """A single-pixel (C, 1) stack."""
    return np.array(values, dtype=float).reshape(-1, 1)


def test_softmax_examples():
    assert np.allclose(softmax(col(0, 0)), col(0.5, 0.5))
    assert np.allclose(softmax(col(math.log(3), 0)), col(0.75, 0.25), atol=1e-15)
    p = softmax(col(1000, 0))
    assert np.all(np.isfinite(p))
    assert p[0, 0] == pytest.approx(1.0) and p[1, 0] == pytest.approx(0.0)


def test_kl_examples():
    p = softmax(np.random.default_rng(0).normal(size=(3, 4, 4)))
    assert kl_loss(p, p) == pytest.approx(0.0, abs=1e-15)
    assert kl_loss(col(0.75, 0.25), col(0.5, 0.5)) == pytest.approx(0.13081203594113697, abs=1e-12)
    assert kl_loss(col(1, 0), col(0.5, 0.5)) == pytest.approx(math.log(2), abs=1e-12)


def test_ce_examples():
    assert ce_loss(col(1, 0), col(1 - LOG_EPS, LOG_EPS)) == pytest.approx(0.0, abs=1e-6)
    assert ce_loss(col(0, 1), col(0.5, 0.5)) == pytest.approx(0.6931471805599453, abs=1e-12)
    assert ce_loss(col(0, 1), col(0.5, 0.5), [1, 2]) == pytest.approx(1.3862943611198906, abs=1e-12)


def test_enet_weights():
    w = class_weights_enet([0.5, 0.0, 1.0])
    assert w == pytest.approx([2.388285926447683, 50.4983497918439, 1.4222778260019158], abs=1e-9)


def test_dice_examples():
    y = one_hot_encode(LabelMap(np.array([[0, 0, 1, 1]] * 2), 2)).planes
    assert dice_loss(y, y) == pytest.approx(0.0, abs=1e-9)
    assert dice_loss(y, np.full_like(y, 0.5)) == pytest.approx(0.5, abs=1e-5)
    # class 1 absent from y and from p: smoothing makes it a perfect match
    y1 = np.stack([np.ones((2, 2)), np.zeros((2, 2))])
    assert dice_loss(y1, y1) == pytest.approx(0.0, abs=1e-9)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        kl_loss(col(0.5, 0.5), np.full((3, 1), 1 / 3))
    with pytest.raises(ValueError):
        ce_loss(col(1, 0), np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        dice_loss(col(1, 0), np.full((3, 1), 1 / 3))


def test_hard_soft_kl_equals_ce():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 4, (6, 6))
    y = one_hot_encode(LabelMap(labels, 4)).planes
    p = softmax(rng.normal(size=y.shape))
    assert kl_loss(y, p) == ce_loss(y, p)
    assert ce_loss(y, p, np.ones(4)) == ce_loss(y, p)


def test_combined_reductions():
    rng = np.random.default_rng(2)
    y = one_hot_encode(LabelMap(rng.integers(0, 3, (5, 5)), 3)).planes
    z = rng.normal(size=y.shape)
    p = softmax(z)
    value, _ = combined_loss(y, None, z, LossWeights(alpha=1.0, beta=0.0))
    assert value == ce_loss(y, p) + 1.0 * dice_loss(y, p)
    value, _ = combined_loss(y, None, z, LossWeights(alpha=0.0, beta=0.0))
    assert value == ce_loss(y, p)


def test_combined_permutation_equivariance():
    rng = np.random.default_rng(3)
    y = one_hot_encode(LabelMap(rng.integers(0, 3, (6, 6)), 3)).planes
    q = softmax(rng.normal(size=y.shape))
    z = rng.normal(size=y.shape)
    w = np.array([1.0, 2.0, 3.0])
    perm = [2, 0, 1]
    a, _ = combined_loss(y, q, z, LossWeights(1.0, 1.0, w))
    b, _ = combined_loss(y[perm], q[perm], z[perm], LossWeights(1.0, 1.0, w[perm]))
    assert a == pytest.approx(b, rel=1e-12)


def _instance(rng, shape, c):
    labels = rng.integers(0, c, shape)
    y = one_hot_encode(LabelMap(labels, c)).planes
    q = softmax(rng.normal(size=y.shape) * 2)
    z = rng.normal(size=y.shape)
    return y, q, z


def _check_grad(value_and_grad, z, rng, samples=20):
    _, grad = value_and_grad(z)
    idx = [tuple(rng.integers(0, n) for n in z.shape) for _ in range(samples)]
    fd = [central_difference(lambda x: value_and_grad(x)[0], z, i) for i in idx]
    return relative_error([grad[i] for i in idx], fd)


@pytest.mark.parametrize("c", [2, 3, 5])
def test_gradients_match_finite_differences(c):
    rng = np.random.default_rng(c)
    y, q, z = _instance(rng, (8, 8), c)
    w = class_weights_enet(rng.dirichlet(np.ones(c)))
    checks = {
        "ce": lambda x: ce_loss_and_grad(y, x),
        "wce": lambda x: ce_loss_and_grad(y, x, w),
        "dice": lambda x: dice_loss_and_grad(y, x),
        "kl": lambda x: kl_loss_and_grad(q, x),
        "combined": lambda x: combined_loss(y, q, x, LossWeights(1.0, 1.0, w)),
    }
    for name, fn in checks.items():
        assert _check_grad(fn, z, rng) < 1e-5, name
