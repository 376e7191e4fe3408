"""The four training objectives and their weighted combination.

Matching runs on detached predictions; gradient flows only through the loss
terms themselves. An empty-target sample contributes no box regression terms,
an all-zero referring target vector, an all-zero mask, and existence 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import TrainConfig
from ..ndauto import Tensor, concat
from .matching import Assignment, giou_pairs, hungarian, match_cost


@dataclass
class SampleTarget:
    """Ground truth for one image-expression pair."""

    boxes: np.ndarray        # [G, 4] cxcywh of foreground objects, normalized
    referred: np.ndarray     # [G] bool, True where the object is a referred target
    mask: np.ndarray         # [H, W] float in {0, 1}
    exists: bool


@dataclass
class LossBreakdown:
    seg: Tensor
    det: Tensor
    exist: Tensor
    ref: Tensor
    total: Tensor
    assignments: list[Assignment]

    def scalars(self) -> dict[str, float]:
        return {
            "loss_seg": self.seg.item(),
            "loss_det": self.det.item(),
            "loss_exist": self.exist.item(),
            "loss_ref": self.ref.item(),
            "loss_total": self.total.item(),
        }


def bce(probs: Tensor, targets: np.ndarray, eps: float = 1e-7) -> Tensor:
    """Binary cross-entropy on probabilities, averaged over all elements."""
    t = np.asarray(targets, dtype=probs.dtype)
    pos = probs.clip(eps, 1.0).log() * t
    neg = (1.0 - probs).clip(eps, 1.0).log() * (1.0 - t)
    return -(pos + neg).mean()


def dice_loss(probs: Tensor, target: np.ndarray, smooth: float = 1.0) -> Tensor:
    """Dice loss over the trailing spatial axes, averaged over the batch."""
    t = np.asarray(target, dtype=probs.dtype)
    b = probs.shape[0]
    p = probs.reshape(b, -1)
    tt = t.reshape(b, -1)
    num = (p * tt).sum(axis=1) * 2.0 + smooth
    den = p.sum(axis=1) + tt.sum(axis=1) + smooth
    return (1.0 - num / den).mean()


def cross_entropy_two_class(logits: Tensor, labels: np.ndarray, eps: float = 1e-7) -> Tensor:
    """Mean CE over [B, N, 2] logits with integer labels (0 = foreground)."""
    probs = logits.softmax(axis=-1)
    onehot = np.eye(2, dtype=logits.dtype)[np.asarray(labels, dtype=int)]
    picked = (probs * onehot).sum(axis=-1)
    return -picked.clip(eps, 1.0).log().mean()


def assign_batch(pred_boxes: Tensor, det_logits: Tensor, targets: list[SampleTarget],
                 cfg: TrainConfig) -> list[Assignment]:
    """Hungarian assignment per sample on detached predictions."""
    fg_probs = _fg_probs(det_logits.data)
    out = []
    for b, target in enumerate(targets):
        if target.boxes.shape[0] == 0:
            out.append(Assignment(pairs=[], total_cost=0.0))
            continue
        cost = match_cost(pred_boxes.data[b], fg_probs[b], target.boxes,
                          cfg.cost_class, cfg.cost_l1, cfg.cost_giou)
        out.append(hungarian(cost))
    return out


def _fg_probs(det_logits: np.ndarray) -> np.ndarray:
    shifted = det_logits - det_logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return (e / e.sum(axis=-1, keepdims=True))[..., 0]


def compute_losses(pred_boxes: Tensor, det_logits: Tensor, ref_probs: Tensor,
                   seg_probs: Tensor, exist_probs: Tensor,
                   targets: list[SampleTarget], cfg: TrainConfig,
                   assignments: list[Assignment] | None = None) -> LossBreakdown:
    """All loss terms for one batch.

    pred_boxes [B,N,4] cxcywh, det_logits [B,N,2], ref_probs [B,N] in (0,1),
    seg_probs [B,H,W] in (0,1), exist_probs [B] in (0,1).
    """
    batch, num_queries, _ = pred_boxes.shape
    if assignments is None:
        assignments = assign_batch(pred_boxes, det_logits, targets, cfg)

    class_labels = np.ones((batch, num_queries), dtype=int)  # background by default
    t_ref = np.zeros((batch, num_queries))
    rows_b, rows_q, gt_rows = [], [], []
    for b, (assignment, target) in enumerate(zip(assignments, targets)):
        for q, g in assignment.pairs:
            if not (0 <= q < num_queries and 0 <= g < target.boxes.shape[0]):
                raise IndexError(f"assignment ({q}, {g}) out of range for sample {b}")
            class_labels[b, q] = 0
            if target.referred[g]:
                t_ref[b, q] = 1.0
            rows_b.append(b)
            rows_q.append(q)
            gt_rows.append(target.boxes[g])

    loss_class = cross_entropy_two_class(det_logits, class_labels)
    if rows_b:
        matched = pred_boxes[np.asarray(rows_b), np.asarray(rows_q)]
        gt = np.asarray(gt_rows, dtype=pred_boxes.dtype)
        loss_l1 = (matched - gt).abs().sum(axis=-1).mean()
        loss_giou = (1.0 - giou_pairs(matched, gt)).mean()
        loss_det = loss_class + cfg.cost_l1 * loss_l1 + cfg.cost_giou * loss_giou
    else:
        loss_det = loss_class

    loss_ref = bce(ref_probs, t_ref)
    masks = np.stack([t.mask for t in targets])
    loss_seg = bce(seg_probs, masks) + dice_loss(seg_probs, masks)
    flags = np.array([float(t.exists) for t in targets])
    loss_exist = bce(exist_probs, flags)

    total = (loss_seg + cfg.weight_det * loss_det
             + cfg.weight_exist * loss_exist + cfg.weight_ref * loss_ref)
    return LossBreakdown(seg=loss_seg, det=loss_det, exist=loss_exist,
                         ref=loss_ref, total=total, assignments=assignments)
