"""Segmentation evaluation and the seeded-watershed baseline.

Variation of information and the adjusted-Rand complement are computed from
a contingency table of pixels, optionally excluding a tolerance band around
ground-truth boundaries: a pixel is excluded iff some pixel within Chebyshev
distance ``tolerance`` carries a different ground-truth label.  Only the
ground truth is dilated; predictions are compared as-is.  Entropies are in
nats.
"""

from __future__ import annotations

import heapq
import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter
from scipy.special import xlogy

from ._errors import ValidationError
from .lattice import SeedSet

__all__ = [
    "EvalReport",
    "voi",
    "arand",
    "error_map",
    "seeded_watershed",
    "evaluate",
]


@dataclass(frozen=True)
class EvalReport:
    """VOI (nats), adjusted-Rand complement, and the tolerance-band size."""

    voi_split: float
    voi_merge: float
    voi_total: float
    arand: float
    excluded_pixels: int

    def to_json_dict(self) -> dict:
        return {
            "voi_split": self.voi_split,
            "voi_merge": self.voi_merge,
            "voi_total": self.voi_total,
            "arand": self.arand,
            "excluded_pixels": self.excluded_pixels,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise ValidationError(
            f"prediction and ground truth must be 2D and same shape, "
            f"got {pred.shape} vs {gt.shape}"
        )
    return pred, gt


def _tolerance_mask(gt: np.ndarray, tolerance: int) -> np.ndarray:
    """True where a pixel survives the boundary-tolerance filter."""
    if tolerance <= 0:
        return np.ones(gt.shape, dtype=bool)
    size = 2 * int(tolerance) + 1
    lo = minimum_filter(gt, size=size, mode="nearest")
    hi = maximum_filter(gt, size=size, mode="nearest")
    return lo == hi


def _contingency(
    pred: np.ndarray, gt: np.ndarray, tolerance: int
) -> tuple[np.ndarray, int]:
    pred, gt = _check_pair(pred, gt)
    keep = _tolerance_mask(gt, tolerance)
    if not keep.any():
        raise ValidationError("tolerance band excludes every pixel")
    p = pred[keep].ravel()
    g = gt[keep].ravel()
    _, p_idx = np.unique(p, return_inverse=True)
    _, g_idx = np.unique(g, return_inverse=True)
    n_p = p_idx.max() + 1
    n_g = g_idx.max() + 1
    table = np.bincount(p_idx * n_g + g_idx, minlength=n_p * n_g).reshape(n_p, n_g)
    return table.astype(np.float64), int((~keep).sum())


def _entropy(counts: np.ndarray, n: float) -> float:
    p = counts / n
    return float(-xlogy(p, p).sum())


def voi(pred: np.ndarray, gt: np.ndarray, tolerance: int = 2) -> tuple[float, float]:
    """Variation of information between two partitions.

    Returns
    -------
    (split, merge)
        ``split`` is the conditional entropy of the prediction given the
        ground truth (over-segmentation), ``merge`` the converse
        (under-segmentation); both in nats, computed over pixels outside
        the tolerance band.
    """
    table, _ = _contingency(pred, gt, tolerance)
    n = table.sum()
    h_joint = _entropy(table, n)
    h_pred = _entropy(table.sum(axis=1), n)
    h_gt = _entropy(table.sum(axis=0), n)
    split = h_joint - h_gt
    merge = h_joint - h_pred
    return split, merge


def arand(pred: np.ndarray, gt: np.ndarray, tolerance: int = 2) -> float:
    """Complement of the adjusted Rand index on the tolerance-filtered pixels.

    0 for identical partitions (up to id permutation), about 1 for
    unrelated ones.
    """
    table, _ = _contingency(pred, gt, tolerance)
    n = table.sum()

    def comb2(x):
        return x * (x - 1.0) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0.0:
        # Both partitions are pair-degenerate (all one segment, or all
        # singletons); they carry identical pair information.
        return 0.0
    ari = (sum_ij - expected) / denom
    return float(1.0 - ari)


def evaluate(pred: np.ndarray, gt: np.ndarray, tolerance: int = 2) -> EvalReport:
    """Full evaluation report (VOI split/merge/total, ARAND, excluded count)."""
    table, excluded = _contingency(pred, gt, tolerance)
    n = table.sum()
    h_joint = _entropy(table, n)
    split = h_joint - _entropy(table.sum(axis=0), n)
    merge = h_joint - _entropy(table.sum(axis=1), n)
    return EvalReport(
        voi_split=split,
        voi_merge=merge,
        voi_total=split + merge,
        arand=arand(pred, gt, tolerance),
        excluded_pixels=excluded,
    )


def error_map(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Boolean image of wrongly labeled pixels under majority id matching.

    Each predicted segment is mapped to the ground-truth id it overlaps
    most (ties to the smaller gt id); a pixel is an error where the mapped
    prediction disagrees with the ground truth.  The matching makes the map
    invariant to consistent relabelings, e.g. two swapped equal segments
    produce no errors.
    """
    pred, gt = _check_pair(pred, gt)
    table, _ = _contingency(pred, gt, tolerance=0)
    gt_ids = np.unique(gt)
    best = gt_ids[table.argmax(axis=1)]
    pred_ids, pred_idx = np.unique(pred, return_inverse=True)
    mapped = best[pred_idx].reshape(pred.shape)
    return mapped != gt


def seeded_watershed(boundary_map: np.ndarray, seeds: SeedSet) -> np.ndarray:
    """Priority-flood segmentation of a boundary-strength map from seeds.

    The frontier pixel with the lowest boundary value is claimed first
    (ties broken by insertion order, so results are deterministic); each
    pixel is assigned once.  Pixels in components without any seed remain
    ``-1`` and are reported via a warning.

    Parameters
    ----------
    boundary_map : ndarray
        2D finite boundary strengths (high = barrier).
    seeds : SeedSet
        Vertex ids interpreted on the row-major grid of ``boundary_map``.

    Returns
    -------
    ndarray
        2D int64 label image.
    """
    boundary = np.asarray(boundary_map, dtype=np.float64)
    if boundary.ndim != 2:
        raise ValidationError(f"boundary map must be 2D, got shape {boundary.shape}")
    if not np.all(np.isfinite(boundary)):
        raise ValidationError("boundary map must be finite")
    height, width = boundary.shape
    if len(seeds.vertices) and seeds.vertices.max() >= boundary.size:
        raise ValidationError("seed vertex out of range for the boundary map")

    labels = np.full(boundary.size, -1, dtype=np.int64)
    flat = boundary.ravel()
    heap: list[tuple[float, int, int, int]] = []
    counter = 0
    for v, lab in zip(seeds.vertices, seeds.labels):
        heapq.heappush(heap, (flat[v], counter, int(v), int(lab)))
        counter += 1

    while heap:
        _, _, v, lab = heapq.heappop(heap)
        if labels[v] != -1:
            continue
        labels[v] = lab
        r, c = divmod(v, width)
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < height and 0 <= nc < width:
                nv = nr * width + nc
                if labels[nv] == -1:
                    heapq.heappush(heap, (flat[nv], counter, nv, lab))
                    counter += 1

    if (labels == -1).any():
        warnings.warn(
            f"{int((labels == -1).sum())} pixels lie in components without a seed "
            "and remain unlabeled (-1)",
            stacklevel=2,
        )
    return labels.reshape(height, width)
