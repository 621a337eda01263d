"""Superpixel-guided label softening and the Gaussian-blur baseline."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .grid import OneHotStack
from .sdt import signed_edt
from .slic import SuperpixelMap


class Relation(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    INTERSECT = "intersect"


@dataclass(frozen=True)
class SoftLabelStack:
    planes: np.ndarray  # (C, *dims), values in [0, 1]
    normalized: bool = False
    spacing: tuple = None

    @property
    def num_classes(self):
        return self.planes.shape[0]

    @property
    def dims(self):
        return self.planes.shape[1:]


def classify_relation(block_pixels, plane):
    """Relation of one block to the foreground of ``plane``.

    ``block_pixels`` is a boolean mask or an iterable of coordinate tuples.
    """
    plane = np.asarray(plane) != 0
    block = np.asarray(block_pixels)
    if block.dtype == bool and block.shape == plane.shape:
        inside = plane[block]
    else:
        coords = np.atleast_2d(block)
        inside = plane[tuple(coords.T)]
    if inside.size == 0:
        raise ValueError("empty block")
    if inside.all():
        return Relation.INSIDE
    if not inside.any():
        return Relation.OUTSIDE
    return Relation.INTERSECT


def dist_to_prob(d):
    """Map signed boundary distance to a pseudo-probability: 0.5 at d=0, ->1 inside, ->0 outside."""
    d = np.asarray(d, dtype=float)
    return 0.5 * (d / (1.0 + np.abs(d)) + 1.0)


def _block_relations(ids, plane, num_blocks):
    """Per-block flags (any foreground, any background) via bincount."""
    flat = ids.ravel()
    fg = np.bincount(flat, weights=plane.ravel(), minlength=num_blocks)
    total = np.bincount(flat, minlength=num_blocks)
    return fg > 0, fg < total


def soften(hard, sp, normalize=True):
    """Soft labels from hard one-hot planes and a superpixel partition.

    Blocks fully inside or outside a class keep the hard value; in blocks
    that straddle the class boundary each pixel gets ``dist_to_prob`` of its
    signed distance to that boundary. With ``normalize`` the planes are
    rescaled to sum to 1 at every pixel.
    """
    planes = np.asarray(hard.planes, dtype=float)
    ids = np.asarray(sp.block_ids if isinstance(sp, SuperpixelMap) else sp)
    if ids.shape != planes.shape[1:]:
        raise ValueError(f"dimension mismatch: labels {planes.shape[1:]} vs superpixels {ids.shape}")
    ids = ids.astype(np.int64)
    num_blocks = int(ids.max()) + 1
    out = planes.copy()
    for c in range(planes.shape[0]):
        plane = planes[c]
        has_fg, has_bg = _block_relations(ids, plane, num_blocks)
        straddle = has_fg & has_bg
        if not straddle.any():
            continue
        region = straddle[ids]
        d = signed_edt(plane)
        out[c][region] = dist_to_prob(d[region])
    if normalize:
        out = out / out.sum(axis=0, keepdims=True)
    return SoftLabelStack(out, normalized=normalize, spacing=getattr(hard, "spacing", None))


def gaussian_kernel(sigma, truncate=3.0):
    radius = int(math.floor(truncate * sigma + 0.5)) if sigma > 0 else 0
    if radius == 0:
        return np.ones(1)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _blur_axis(arr, kernel, axis):
    radius = len(kernel) // 2
    if radius == 0:
        return arr
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="symmetric")
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    for j, w in enumerate(kernel):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(j, j + n)
        out += w * padded[tuple(sl)]
    return out


def gaussian_soften(hard, sigma=1.0, spacing=None, truncate=3.0):
    """Blur each one-hot plane with a truncated Gaussian, then renormalize.

    ``sigma`` is in pixels, or in mm when ``spacing`` is given. Edges are
    handled by symmetric reflection so constant planes stay constant.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    planes = np.asarray(hard.planes, dtype=float)
    ndim = planes.ndim - 1
    sigmas = [sigma / s for s in spacing] if spacing is not None else [sigma] * ndim
    out = planes.copy()
    for axis, s in enumerate(sigmas):
        out = _blur_axis(out, gaussian_kernel(s, truncate), axis + 1)
    out = out / out.sum(axis=0, keepdims=True)
    return SoftLabelStack(out, normalized=True, spacing=getattr(hard, "spacing", None))
