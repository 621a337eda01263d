import numpy as np
import pytest

from oracles import brute_boundary, brute_directed, percentile_linear
from spsoft.metrics import (
    UndefinedDistanceError,
    asd,
    assd,
    dice_score,
    evaluate_labels,
    hd95,
    surface_distances,
    volumetric_similarity,
)


def shifted_squares():
    a = np.zeros((4, 4), bool)
    b = np.zeros((4, 4), bool)
    a[1:3, 0:2] = True
    b[1:3, 1:3] = True
    return a, b


def test_dice_and_vs_examples():
    a, b = shifted_squares()
    assert dice_score(a, a) == 1.0
    assert dice_score(a, b) == 0.5
    assert volumetric_similarity(a, b) == 1.0
    disjoint = np.zeros((4, 4), bool)
    disjoint[3, 3] = True
    assert dice_score(a, disjoint) == 0.0
    assert dice_score(np.zeros((3, 3)), np.zeros((3, 3))) == 1.0
    four = np.zeros((4, 4), bool)
    four[0] = True
    assert volumetric_similarity(four, np.zeros((4, 4))) == 0.0
    six = np.zeros((4, 4), bool)
    six.flat[:6] = True
    two = np.zeros((4, 4), bool)
    two.flat[10:12] = True
    assert volumetric_similarity(six, two) == 0.5


def test_dim_mismatch():
    with pytest.raises(ValueError):
        dice_score(np.zeros((2, 2)), np.zeros((2, 3)))


def test_surface_distance_examples():
    a, _ = shifted_squares()
    ab, ba = surface_distances(a, a)
    assert np.all(ab == 0) and np.all(ba == 0)
    p = np.zeros((5, 8), bool)
    q = np.zeros((5, 8), bool)
    p[2, 1] = True
    q[2, 4] = True
    ab, ba = surface_distances(p, q)
    assert list(ab) == [3.0] and list(ba) == [3.0]
    ab, ba = surface_distances(p, q, spacing=(1.0, 0.5))
    assert list(ab) == [1.5] and list(ba) == [1.5]
    assert hd95(p, q) == 3.0
    assert hd95(a, a) == 0.0 and asd(a, a) == 0.0 and assd(a, a) == 0.0


def test_hd95_interpolation_rule():
    assert percentile_linear(list(range(1, 101)), 95) == pytest.approx(95.05, abs=1e-12)
    assert np.percentile(np.arange(1, 101), 95) == pytest.approx(95.05, abs=1e-12)


def test_asd_is_directed_and_assd_symmetric():
    a = np.zeros((10, 10), bool)
    b = np.zeros((10, 10), bool)
    a[2:8, 2:8] = True
    b[3:5, 3:5] = True
    assert asd(a, b) != asd(b, a)
    assert assd(a, b) == assd(b, a)
    assert hd95(a, b) == hd95(b, a)


def test_empty_mask_undefined():
    a, _ = shifted_squares()
    with pytest.raises(UndefinedDistanceError):
        surface_distances(a, np.zeros_like(a))
    report = evaluate_labels(np.zeros((4, 4), int), a.astype(int), 2)
    assert report.per_class[1]["hd95"] is None
    assert report.per_class[1]["dice"] == 0.0
    assert report.mean["hd95"] == report.per_class[0]["hd95"]


def test_report_schema():
    a, b = shifted_squares()
    report = evaluate_labels(a.astype(int), b.astype(int), 2)
    assert set(report.per_class) == {0, 1}
    assert set(report.mean) == {"dice", "vs", "hd95", "asd", "assd"}
    assert report.rows()[-1][0] == "mean"


def _oracle_metrics(a, b, spacing):
    ba_pts, bb_pts = brute_boundary(a), brute_boundary(b)
    ab = brute_directed(ba_pts, bb_pts, spacing)
    ba = brute_directed(bb_pts, ba_pts, spacing)
    h = max(percentile_linear(ab, 95), percentile_linear(ba, 95))
    return ab, ba, h, ab.mean(), np.concatenate([ab, ba]).mean()


@pytest.mark.parametrize("seed", range(10))
def test_against_all_pairs_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((16, 16)) < 0.4
    b = rng.random((16, 16)) < 0.4
    spacing = (1.0, 1.0) if seed % 2 else (0.8, 1.7)
    ab, ba, h, d1, d2 = _oracle_metrics(a, b, spacing)
    got_ab, got_ba = surface_distances(a, b, spacing)
    assert np.allclose(got_ab, ab, atol=1e-12) and np.allclose(got_ba, ba, atol=1e-12)
    assert abs(hd95(a, b, spacing) - h) <= 1e-9
    assert abs(asd(a, b, spacing) - d1) <= 1e-9
    assert abs(assd(a, b, spacing) - d2) <= 1e-9


@pytest.mark.parametrize("axes", [(0,), (1,), (0, 1)])
def test_reflection_invariance(axes):
    rng = np.random.default_rng(7)
    a = rng.random((12, 12)) < 0.5
    b = rng.random((12, 12)) < 0.5
    fa, fb = np.flip(a, axes), np.flip(b, axes)
    for fn in (dice_score, volumetric_similarity, hd95, asd, assd):
        assert fn(a, b) == pytest.approx(fn(fa, fb), abs=1e-12)
