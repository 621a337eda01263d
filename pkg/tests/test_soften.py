import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from oracles import dense_convolve_1d
from spsoft.grid import LabelMap, one_hot_encode
from spsoft.sdt import signed_edt
from spsoft.slic import SuperpixelMap
from spsoft.soften import (
    Relation,
    classify_relation,
    dist_to_prob,
    gaussian_kernel,
    gaussian_soften,
    soften,
)

ROW = np.array([[0, 0, 1, 1, 1, 0]])


def test_relations():
    block = [(0, 0), (0, 1)]
    assert classify_relation(block, np.ones((2, 2))) is Relation.INSIDE
    assert classify_relation(block, np.zeros((2, 2))) is Relation.OUTSIDE
    plane = np.zeros((2, 2))
    plane[0, 1] = 1
    assert classify_relation(block, plane) is Relation.INTERSECT
    mask = np.zeros((2, 2), bool)
    mask[0] = True
    assert classify_relation(mask, plane) is Relation.INTERSECT


@pytest.mark.parametrize(
    "d, q", [(0, 0.5), (1, 0.75), (-1, 0.25), (3, 0.875), (-3, 0.125)]
)
def test_dist_to_prob_values(d, q):
    assert dist_to_prob(d) == pytest.approx(q, abs=1e-12)


@settings(max_examples=200)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_dist_to_prob_monotone_and_symmetric(a, b):
    fa, fb = float(dist_to_prob(a)), float(dist_to_prob(b))
    assert 0 <= fa <= 1
    assert abs(fa + float(dist_to_prob(-a)) - 1.0) <= 1e-12
    if a < b and (b - a) > 1e-9 * max(1.0, abs(a), abs(b)) and max(abs(a), abs(b)) < 1e3:
        assert fa < fb


def test_row_single_superpixel():
    hard = one_hot_encode(LabelMap(ROW, 2))
    sp = SuperpixelMap(np.zeros_like(ROW))
    raw = soften(hard, sp, normalize=False)
    assert np.allclose(raw.planes[1, 0], [1 / 6, 0.25, 0.5, 0.75, 0.5, 0.25], atol=1e-15)
    normed = soften(hard, sp, normalize=True)
    assert normed.normalized
    assert np.allclose(normed.planes.sum(axis=0), 1.0, atol=1e-9)


def test_degeneration_on_class_pure_blocks():
    rng = np.random.default_rng(4)
    labels = ndimage.zoom(rng.integers(0, 3, (4, 4)), 4, order=0)
    hard = one_hot_encode(LabelMap(labels, 3))
    # one block per connected class region
    ids = np.zeros_like(labels)
    offset = 0
    for c in range(3):
        lab, k = ndimage.label(labels == c)
        ids[lab > 0] = lab[lab > 0] + offset - 1
        offset += k
    for normalize in (False, True):
        out = soften(hard, SuperpixelMap(ids), normalize=normalize)
        assert np.array_equal(out.planes, hard.planes)


def test_dim_mismatch():
    hard = one_hot_encode(LabelMap(ROW, 2))
    with pytest.raises(ValueError, match="mismatch"):
        soften(hard, SuperpixelMap(np.zeros((2, 6), dtype=int)))


def _random_case(seed):
    rng = np.random.default_rng(seed)
    labels = ndimage.zoom(rng.integers(0, 3, (3, 3)), 5, order=0)
    ids = ndimage.zoom(rng.permutation(9).reshape(3, 3), 5, order=0)
    ids = np.roll(ids, 2, axis=1)  # blocks straddle class borders
    return labels, ids


@pytest.mark.parametrize("seed", range(8))
def test_locality_range_and_consistency(seed):
    labels, ids = _random_case(seed)
    hard = one_hot_encode(LabelMap(labels, 3))
    raw = soften(hard, SuperpixelMap(ids), normalize=False)
    normed = soften(hard, SuperpixelMap(ids), normalize=True)
    assert raw.planes.min() >= 0 and raw.planes.max() <= 1
    assert np.allclose(normed.planes.sum(axis=0), 1.0, atol=1e-9)
    touched = np.zeros(labels.shape, bool)
    for c in range(3):
        plane = hard.planes[c]
        straddle = np.zeros(labels.shape, bool)
        for b in np.unique(ids):
            vals = plane[ids == b]
            if vals.min() != vals.max():
                straddle |= ids == b
        touched |= straddle
        # untouched blocks keep the hard value for this class
        assert np.array_equal(raw.planes[c][~straddle], plane[~straddle])
        if straddle.any():
            d = signed_edt(plane)
            q = raw.planes[c][straddle]
            assert np.all(q[d[straddle] >= 0] >= 0.5)
            assert np.all(q[d[straddle] < 0] < 0.5)
    assert np.array_equal(normed.planes[:, ~touched], hard.planes[:, ~touched])


def test_gaussian_tiny_sigma_is_identity():
    labels = np.random.default_rng(0).integers(0, 3, (6, 7))
    hard = one_hot_encode(LabelMap(labels, 3))
    out = gaussian_soften(hard, sigma=0.1)
    assert len(gaussian_kernel(0.1)) == 1
    assert np.array_equal(out.planes, hard.planes)


def test_gaussian_constant_plane():
    hard = one_hot_encode(LabelMap(np.ones((9, 9), dtype=int), 2))
    out = gaussian_soften(hard, sigma=2.0)
    assert np.allclose(out.planes[1], 1.0, atol=1e-15)
    assert np.allclose(out.planes[0], 0.0, atol=1e-15)


def test_gaussian_step_matches_dense_convolution():
    labels = np.zeros((1, 20), dtype=int)
    labels[0, 9:] = 1
    hard = one_hot_encode(LabelMap(labels, 2))
    out = gaussian_soften(hard, sigma=1.0)
    x = np.arange(-3, 4, dtype=float)
    kernel = np.exp(-0.5 * x**2)
    kernel /= kernel.sum()
    blurred = dense_convolve_1d(hard.planes, kernel)
    want = blurred / blurred.sum(axis=0, keepdims=True)
    assert np.allclose(out.planes, want, rtol=0, atol=1e-9)


def test_gaussian_rejects_nonpositive_sigma():
    hard = one_hot_encode(LabelMap(ROW, 2))
    with pytest.raises(ValueError):
        gaussian_soften(hard, sigma=0)
