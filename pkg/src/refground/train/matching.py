"""Bipartite query-to-target assignment and the box geometry kernels.

Assignment semantics: minimal total cost over one-to-one mappings of size
``min(P, Q)``, ties broken toward the lexicographically smallest pair list.
Cost minimization itself is delegated to scipy's assignment solver; the
lexicographic refinement fixes pairs row by row under an optimality check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..ndauto import Tensor, maximum, minimum

_REL_TOL = 1e-9


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    total_cost: float

    @property
    def query_indices(self) -> list[int]:
        return [q for q, _ in self.pairs]

    @property
    def target_indices(self) -> list[int]:
        return [g for _, g in self.pairs]


def _solve_cost(cost: np.ndarray) -> float:
    if cost.shape[0] == 0 or cost.shape[1] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _REL_TOL * max(1.0, abs(a), abs(b))


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimal-cost injective assignment of size ``min(P, Q)``."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    num_rows, num_cols = cost.shape
    target_size = min(num_rows, num_cols)
    optimum = _solve_cost(cost)

    pairs: list[tuple[int, int]] = []
    fixed = 0.0
    free_rows = list(range(num_rows))
    free_cols = list(range(num_cols))
    for q in range(num_rows):
        if len(pairs) == target_size:
            break
        rows_left = [r for r in free_rows if r != q]
        chosen = None
        for g in free_cols:
            cols_left = [c for c in free_cols if c != g]
            rest = _solve_cost(cost[np.ix_(rows_left, cols_left)])
            if _close(fixed + cost[q, g] + rest, optimum):
                chosen = g
                break
        if chosen is None:
            # q is unmatched in every optimal assignment extending the fixed pairs
            free_rows.remove(q)
            continue
        pairs.append((q, chosen))
        fixed += cost[q, chosen]
        free_rows.remove(q)
        free_cols.remove(chosen)
    return Assignment(pairs=pairs, total_cost=optimum)


# -- box kernels (boxes are cxcywh in [0,1] unless noted) -------------------


def cxcywh_to_xyxy(boxes: np.ndarray) -> np.ndarray:
    cx, cy, w, h = boxes[..., 0], boxes[..., 1], boxes[..., 2], boxes[..., 3]
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=-1)


def box_iou_xyxy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU matrix between two xyxy box arrays [Na,4] and [Nb,4]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    tl = np.maximum(a[:, None, :2], b[None, :, :2])
    br = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(br - tl, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = np.clip(a[:, 2] - a[:, 0], 0, None) * np.clip(a[:, 3] - a[:, 1], 0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0, None) * np.clip(b[:, 3] - b[:, 1], 0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def giou_xyxy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise generalized IoU matrix (numpy; metric/cost use only)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iou_inter = box_iou_xyxy(a, b)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    tl = np.maximum(a[:, None, :2], b[None, :, :2])
    br = np.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = np.clip(br - tl, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    etl = np.minimum(a[:, None, :2], b[None, :, :2])
    ebr = np.maximum(a[:, None, 2:], b[None, :, 2:])
    ewh = ebr - etl
    enclosure = ewh[..., 0] * ewh[..., 1]
    return iou_inter - (enclosure - union) / enclosure


def giou_pairs(pred_cxcywh: Tensor, gt_cxcywh: np.ndarray) -> Tensor:
    """Differentiable elementwise GIoU between matched box rows [M,4]."""
    gt = Tensor(np.asarray(gt_cxcywh, dtype=pred_cxcywh.dtype))
    px1 = pred_cxcywh[:, 0] - pred_cxcywh[:, 2] * 0.5
    py1 = pred_cxcywh[:, 1] - pred_cxcywh[:, 3] * 0.5
    px2 = pred_cxcywh[:, 0] + pred_cxcywh[:, 2] * 0.5
    py2 = pred_cxcywh[:, 1] + pred_cxcywh[:, 3] * 0.5
    gx1, gy1 = gt[:, 0] - gt[:, 2] * 0.5, gt[:, 1] - gt[:, 3] * 0.5
    gx2, gy2 = gt[:, 0] + gt[:, 2] * 0.5, gt[:, 1] + gt[:, 3] * 0.5

    zero = Tensor(np.zeros(px1.shape, dtype=pred_cxcywh.dtype))
    iw = maximum(minimum(px2, gx2) - maximum(px1, gx1), zero)
    ih = maximum(minimum(py2, gy2) - maximum(py1, gy1), zero)
    inter = iw * ih
    area_p = (px2 - px1) * (py2 - py1)
    area_g = (gx2 - gx1) * (gy2 - gy1)
    union = area_p + area_g - inter
    iou = inter / union
    ew = maximum(px2, gx2) - minimum(px1, gx1)
    eh = maximum(py2, gy2) - minimum(py1, gy1)
    enclosure = ew * eh
    return iou - (enclosure - union) / enclosure


def match_cost(pred_boxes: np.ndarray, fg_probs: np.ndarray, gt_boxes: np.ndarray,
               cost_class: float = 1.0, cost_l1: float = 5.0, cost_giou: float = 2.0) -> np.ndarray:
    """DETR-style matching cost: -p_fg, box L1, and (1 - GIoU), weighted."""
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    if np.any(gt_boxes[:, 2] <= 0) or np.any(gt_boxes[:, 3] <= 0):
        raise ValueError("degenerate ground-truth box (w or h <= 0)")
    pred_boxes = np.asarray(pred_boxes, dtype=np.float64).reshape(-1, 4)
    l1 = np.abs(pred_boxes[:, None, :] - gt_boxes[None, :, :]).sum(axis=-1)
    giou = giou_xyxy(cxcywh_to_xyxy(pred_boxes), cxcywh_to_xyxy(gt_boxes))
    return (
        cost_class * (-np.asarray(fg_probs, dtype=np.float64)[:, None])
        + cost_l1 * l1
        + cost_giou * (1.0 - giou)
    )
