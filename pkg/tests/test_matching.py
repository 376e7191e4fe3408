import itertools

import numpy as np
import pytest

from refground.ndauto import Tensor
from refground.train.matching import (
    Assignment,
    box_iou_xyxy,
    cxcywh_to_xyxy,
    giou_pairs,
    giou_xyxy,
    hungarian,
    match_cost,
)


def brute_force_assignment(cost: np.ndarray) -> Assignment:
    """Exhaustive minimum over all injective assignments of size min(P, Q).

    Ties resolve to the lexicographically smallest pair list, mirroring the
    contract of ``hungarian``.
    """
    rows, cols = cost.shape
    m = min(rows, cols)
    best_cost, best_pairs = None, None
    for row_subset in itertools.combinations(range(rows), m):
        for col_perm in itertools.permutations(range(cols), m):
            pairs = list(zip(row_subset, col_perm))
            total = float(sum(cost[r, c] for r, c in pairs))
            if best_cost is None or total < best_cost - 1e-12 or (
                abs(total - best_cost) <= 1e-12 and pairs < best_pairs
            ):
                best_cost, best_pairs = total, pairs
    return Assignment(pairs=best_pairs or [], total_cost=best_cost or 0.0)


def test_diagonal_optimum():
    out = hungarian(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert out.pairs == [(0, 0), (1, 1)]
    assert out.total_cost == 2.0


def test_tie_breaks_to_lexicographically_smallest():
    out = hungarian(np.array([[0.0, 5.0], [0.0, 5.0]]))
    assert out.pairs == [(0, 0), (1, 1)]
    assert out.total_cost == 5.0


def test_rejects_non_finite():
    with pytest.raises(ValueError, match="non-finite"):
        hungarian(np.array([[np.inf, 1.0], [1.0, 1.0]]))


@pytest.mark.parametrize("shape", [(2, 2), (3, 3), (4, 4), (3, 5), (5, 3), (6, 6), (1, 4)])
def test_matches_brute_force_on_random_floats(shape):
    for seed in range(20):
        cost = np.random.default_rng(seed * 100 + shape[0] * 10 + shape[1]).uniform(-1, 1, shape)
        got = hungarian(cost)
        want = brute_force_assignment(cost)
        assert got.pairs == want.pairs
        assert got.total_cost == pytest.approx(want.total_cost, abs=1e-9)


@pytest.mark.parametrize("shape", [(3, 3), (4, 4), (4, 2), (2, 4)])
def test_matches_brute_force_with_ties(shape):
    for seed in range(20):
        cost = np.random.default_rng(seed + 7).integers(0, 3, shape).astype(float)
        got = hungarian(cost)
        want = brute_force_assignment(cost)
        assert got.pairs == want.pairs, f"seed {seed}: {got.pairs} vs {want.pairs}"


def test_match_cost_identical_box_full_confidence():
    box = np.array([[0.5, 0.5, 0.2, 0.2]])
    cost = match_cost(box, np.array([1.0]), box)
    assert cost.shape == (1, 1)
    assert cost[0, 0] == pytest.approx(-1.0)


def test_match_cost_rejects_degenerate_gt():
    with pytest.raises(ValueError, match="degenerate"):
        match_cost(np.array([[0.5, 0.5, 0.2, 0.2]]), np.array([1.0]),
                   np.array([[0.5, 0.5, 0.0, 0.2]]))


def test_giou_identical_boxes_is_one():
    a = cxcywh_to_xyxy(np.array([[0.4, 0.6, 0.2, 0.3]]))
    assert giou_xyxy(a, a)[0, 0] == pytest.approx(1.0)


def test_giou_nested_equal_center_equals_iou():
    outer = np.array([[0.5, 0.5, 0.4, 0.4]])
    inner = np.array([[0.5, 0.5, 0.2, 0.2]])
    g = giou_xyxy(cxcywh_to_xyxy(outer), cxcywh_to_xyxy(inner))[0, 0]
    # enclosure equals the outer box, so the GIoU penalty vanishes
    iou = (0.2 * 0.2) / (0.4 * 0.4)
    assert g == pytest.approx(iou)


def test_giou_disjoint_boxes_negative():
    a = cxcywh_to_xyxy(np.array([[0.1, 0.1, 0.1, 0.1]]))
    b = cxcywh_to_xyxy(np.array([[0.9, 0.9, 0.1, 0.1]]))
    assert giou_xyxy(a, b)[0, 0] < 0.0


def test_differentiable_giou_agrees_with_numpy_kernel():
    rng = np.random.default_rng(11)
    pred = rng.uniform(0.2, 0.8, (6, 4))
    gt = rng.uniform(0.2, 0.8, (6, 4))
    pred[:, 2:] = rng.uniform(0.05, 0.3, (6, 2))
    gt[:, 2:] = rng.uniform(0.05, 0.3, (6, 2))
    got = giou_pairs(Tensor(pred), gt).data
    want = np.diag(giou_xyxy(cxcywh_to_xyxy(pred), cxcywh_to_xyxy(gt)))
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_differentiable_giou_gradient():
    from refground.ndauto import grad_check

    rng = np.random.default_rng(3)
    gt = np.array([[0.5, 0.5, 0.3, 0.3], [0.3, 0.6, 0.2, 0.25]])
    start = np.array([[0.45, 0.52, 0.28, 0.33], [0.35, 0.55, 0.22, 0.2]])

    def f(t):
        return giou_pairs(t.sigmoid(), gt).sum()

    err = grad_check(lambda t: f(t), Tensor(np.log(start / (1 - start)), requires_grad=True))
    assert err < 1e-6


def test_box_iou_basic():
    a = np.array([[0.0, 0.0, 1.0, 1.0]])
    b = np.array([[0.5, 0.0, 1.5, 1.0]])
    assert box_iou_xyxy(a, b)[0, 0] == pytest.approx(0.5 / 1.5)
