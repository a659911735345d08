"""Oracle seed generation from ground-truth label images.

Seeds are placed automatically, one segment at a time in ascending segment-id
order: the sparse mode drops a single pixel per segment, chosen uniformly
among the pixels whose Euclidean distance to the nearest other segment is at
least 60% of the segment's maximum such distance (a scale-free notion of
"comfortably interior"); the extended mode grows that pixel into a brush
stroke — the disk of radius half the maximum interior distance, clipped to
the segment.  The image border is not a segmentation boundary and does not
repel seeds, except in the degenerate single-segment image, where distances
fall back to the border so that "interior" stays meaningful.

Seed label ``k`` always refers to the k-th smallest segment id of the ground
truth, so seed labels are bijective with segment ids.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import distance_transform_edt

from ._errors import ValidationError
from .lattice import SeedSet

__all__ = ["oracle_seeds", "one_hot_labels", "relabel_contiguous"]

_INTERIOR_FRACTION = 0.6


def relabel_contiguous(gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map arbitrary nonnegative segment ids to ``0..K-1`` (ascending id order).

    Returns the relabeled image and the sorted original ids.
    """
    gt = np.asarray(gt)
    if gt.ndim != 2:
        raise ValidationError(f"label image must be 2D, got shape {gt.shape}")
    if gt.size == 0:
        raise ValidationError("label image is empty")
    if gt.min() < 0:
        raise ValidationError("segment ids must be nonnegative")
    ids, inverse = np.unique(gt, return_inverse=True)
    return inverse.reshape(gt.shape).astype(np.int64), ids


def one_hot_labels(gt: np.ndarray) -> np.ndarray:
    """Ground-truth assignment matrix: ``(n_pixels, n_segments)`` one-hot rows."""
    relabeled, ids = relabel_contiguous(gt)
    flat = relabeled.ravel()
    out = np.zeros((flat.size, len(ids)))
    out[np.arange(flat.size), flat] = 1.0
    return out


def _interior_distance(mask: np.ndarray) -> np.ndarray:
    if mask.all():
        # Whole-image segment: measure interiority against the border.
        padded = np.pad(mask, 1, constant_values=False)
        return distance_transform_edt(padded)[1:-1, 1:-1]
    return distance_transform_edt(mask)


def oracle_seeds(gt: np.ndarray, mode: str = "sparse", rng_seed: int = 0) -> SeedSet:
    """Generate seeds from a ground-truth label image.

    Parameters
    ----------
    gt : ndarray
        2D integer segment ids; every id class must be nonempty.
    mode : {"sparse", "extended"}
        One pixel per segment, or a boundary-avoiding disk per segment.
    rng_seed : int
        Fixes the within-segment pixel choice; identical seeds yield
        byte-identical seed sets.

    Returns
    -------
    SeedSet
        Labels are contiguous ranks of the sorted segment ids.
    """
    if mode not in ("sparse", "extended"):
        raise ValidationError(f"unknown seeding mode {mode!r}")
    relabeled, ids = relabel_contiguous(gt)
    height, width = relabeled.shape
    rng = np.random.default_rng(rng_seed)

    rows_out: list[np.ndarray] = []
    cols_out: list[np.ndarray] = []
    labels_out: list[np.ndarray] = []
    for rank in range(len(ids)):
        mask = relabeled == rank
        dist = _interior_distance(mask)
        dmax = dist.max()
        eligible = np.flatnonzero((dist >= _INTERIOR_FRACTION * dmax) & mask)
        # Single-pixel segments degenerate to that pixel (dmax rule vacuous).
        pick = eligible[rng.integers(len(eligible))]
        r0, c0 = divmod(int(pick), width)
        if mode == "sparse":
            rows, cols = np.array([r0]), np.array([c0])
        else:
            radius = dmax / 2.0
            rr, cc = np.nonzero(mask)
            inside = (rr - r0) ** 2 + (cc - c0) ** 2 <= radius**2
            rows, cols = rr[inside], cc[inside]
        rows_out.append(rows)
        cols_out.append(cols)
        labels_out.append(np.full(len(rows), rank, dtype=np.int64))

    vertices = np.concatenate(rows_out) * width + np.concatenate(cols_out)
    return SeedSet(
        vertices=vertices,
        labels=np.concatenate(labels_out),
        n_labels=len(ids),
    )
