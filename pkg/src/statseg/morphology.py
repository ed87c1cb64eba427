"""Binary erosion and the erosion-based weak mask simulating partial annotation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMaskError
from .grid import Mask, centroid_pixel, foreground_count


@dataclass(frozen=True)
class StructuringElement:
    """Symmetric point set of (drow, dcol) offsets containing the origin."""

    offsets: frozenset

    def __post_init__(self):
        offs = frozenset((int(r), int(c)) for r, c in self.offsets)
        object.__setattr__(self, "offsets", offs)
        if (0, 0) not in offs:
            raise ValueError("structuring element must contain (0, 0)")
        for r, c in offs:
            if (-r, -c) not in offs:
                raise ValueError("structuring element must be symmetric under negation")


CROSS = StructuringElement(frozenset({(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}))


def _shifted(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """out[i, j] = arr[i+dr, j+dc], with out-of-grid treated as background (0)."""
    h, w = arr.shape
    out = np.zeros_like(arr)
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = arr[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    return out


def erode(mask: Mask, se: StructuringElement = CROSS) -> Mask:
    """Keep a pixel only if its whole SE neighborhood is foreground.

    Pixels outside the grid count as background, so regions touching the
    border shrink too.
    """
    arr = mask.values
    out = np.ones_like(arr)
    for dr, dc in se.offsets:
        out = out * _shifted(arr, dr, dc)
    return Mask(out)


def weak_mask(gt: Mask, coverage: float, se: StructuringElement = CROSS) -> Mask:
    """Erode gt until its foreground count drops to ceil(coverage * count).

    Always returns a non-empty subset of gt: if an erosion step would empty
    the mask before reaching the target, the previous iterate is returned,
    and if the very first erosion empties gt, a single centroid pixel is.
    """
    if not 0.0 < coverage <= 1.0:
        raise ValueError(f"coverage must be in (0, 1], got {coverage}")
    n = foreground_count(gt)
    if n == 0:
        raise EmptyMaskError("weak_mask requires a non-empty ground-truth mask")
    target = math.ceil(coverage * n)
    current, count = gt, n
    while count > target:
        nxt = erode(current, se)
        ncount = foreground_count(nxt)
        if ncount == 0:
            if count == n:  # first erosion emptied gt
                single = np.zeros_like(gt.values)
                single[centroid_pixel(gt)] = 1.0
                return Mask(single)
            return current
        if ncount == count:  # fixed point; cannot shrink further
            return current
        current, count = nxt, ncount
    return current
