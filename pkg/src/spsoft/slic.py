"""SLIC superpixels: localized k-means in joint (intensity, position) space.

Works on 2D and 3D grids, grayscale or multichannel (one channel per
sequence). Intensities are rescaled to [0, 1] per channel; spatial distance
is in pixel units and ignores voxel spacing.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import Grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlicParams:
    target_count: int = 100
    compactness: float = 10.0
    max_iters: int = 10
    conn_min_fraction: float = 0.25

    def __post_init__(self):
        if self.target_count < 1:
            raise ValueError(f"target_count must be >= 1, got {self.target_count}")
        if not self.compactness > 0:
            raise ValueError(f"compactness must be > 0, got {self.compactness}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0 < self.conn_min_fraction <= 1:
            raise ValueError(f"conn_min_fraction must be in (0, 1], got {self.conn_min_fraction}")


@dataclass(frozen=True)
class SuperpixelMap:
    block_ids: np.ndarray
    spacing: tuple = None

    def __post_init__(self):
        ids = np.asarray(self.block_ids)
        if self.spacing is None:
            object.__setattr__(self, "spacing", (1.0,) * ids.ndim)
        object.__setattr__(self, "block_ids", ids)

    @property
    def dims(self):
        return self.block_ids.shape

    @property
    def num_blocks(self):
        return int(self.block_ids.max()) + 1 if self.block_ids.size else 0


def _features(image):
    """Stack channels as (K, *dims) scaled to [0, 1] per channel."""
    if isinstance(image, Grid):
        arr, spacing = np.asarray(image.values, dtype=float)[None], image.spacing
    elif isinstance(image, (list, tuple)) and image and isinstance(image[0], Grid):
        arr = np.stack([np.asarray(g.values, dtype=float) for g in image])
        spacing = image[0].spacing
    elif isinstance(image, (list, tuple)):
        arr = np.stack([np.asarray(c, dtype=float) for c in image])
        spacing = None
    else:
        arr = np.asarray(image, dtype=float)
        spacing = None
        if arr.ndim in (2, 3):
            arr = arr[None]
        elif arr.ndim != 4:
            raise ValueError("image must be a 2D/3D array or a (K, *dims) channel stack")
    if arr.size == 0:
        raise ValueError("empty image")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    lo = arr.reshape(arr.shape[0], -1).min(axis=1)
    hi = arr.reshape(arr.shape[0], -1).max(axis=1)
    span = np.where(hi > lo, hi - lo, 1.0)
    shape = (-1,) + (1,) * (arr.ndim - 1)
    arr = (arr - lo.reshape(shape)) / span.reshape(shape)
    return arr, spacing


def grid_layout(dims, target_count):
    """Number of seeds per axis.

    Picks the per-axis counts whose product is close to ``target_count``
    while keeping the seed spacing close to isotropic. Count error weighs
    twice as much as anisotropy; remaining ties put more seeds on later axes.
    """
    if target_count == 1:
        return (1,) * len(dims)
    best = None
    leading = [range(1, d + 1) for d in dims[:-1]]
    for head in itertools.product(*leading):
        prod = math.prod(head)
        if prod > target_count:
            continue
        want = target_count / prod
        for last in {max(1, math.floor(want)), max(1, math.ceil(want))}:
            if last > dims[-1]:
                continue
            counts = head + (last,)
            steps = [d / n for d, n in zip(dims, counts)]
            count_err = abs(math.log(math.prod(counts) / target_count))
            aniso = math.log(max(steps) / min(steps))
            key = (round(2 * count_err + aniso, 12), counts)
            if best is None or key < best:
                best = key
    return best[1]


def _gradient_magnitude(feat):
    """Sum over channels and axes of absolute central differences."""
    grad = np.zeros(feat.shape[1:])
    for axis in range(1, feat.ndim):
        if feat.shape[axis] < 3:
            continue
        d = np.zeros(feat.shape)
        lo = [slice(None)] * feat.ndim
        hi = [slice(None)] * feat.ndim
        mid = [slice(None)] * feat.ndim
        lo[axis], hi[axis], mid[axis] = slice(0, -2), slice(2, None), slice(1, -1)
        d[tuple(mid)] = feat[tuple(hi)] - feat[tuple(lo)]
        grad += np.abs(d).sum(axis=0)
    return grad


def _init_centers(feat, counts):
    """Regular seed grid, each seed nudged to the lowest gradient in its 3^ndim box.

    Seeds sit at cell centers, which may be fractional. A seed only moves if
    some pixel in its neighborhood has strictly lower gradient than the pixel
    nearest to it, so uniform regions keep the symmetric layout.
    """
    dims = feat.shape[1:]
    grad = _gradient_magnitude(feat)
    axes = [((np.arange(n) + 0.5) * d / n) - 0.5 for d, n in zip(dims, counts)]
    offsets = list(itertools.product((-1, 0, 1), repeat=len(dims)))
    centers = []
    for pos in itertools.product(*axes):
        near = tuple(min(max(int(math.floor(p + 0.5)), 0), d - 1) for p, d in zip(pos, dims))
        best_pix, best_g = near, grad[near]
        for off in offsets:
            cand = tuple(c + o for c, o in zip(near, off))
            if any(c < 0 or c >= d for c, d in zip(cand, dims)):
                continue
            if grad[cand] < best_g:
                best_pix, best_g = cand, grad[cand]
        if best_pix != near:
            pos = tuple(float(c) for c in best_pix)
        color = feat[(slice(None),) + best_pix]
        centers.append(np.concatenate([color, np.asarray(pos, dtype=float)]))
    return np.array(centers)


def _assign(feat, centers, windows, spatial_scale):
    dims = feat.shape[1:]
    ndim = len(dims)
    nch = feat.shape[0]
    best = np.full(dims, np.inf)
    labels = np.full(dims, -1, dtype=np.int64)
    for k, center in enumerate(centers):
        color, pos = center[:nch], center[nch:]
        box = tuple(
            slice(max(int(math.floor(p - w)), 0), min(int(math.ceil(p + w)) + 1, d))
            for p, w, d in zip(pos, windows, dims)
        )
        sub = feat[(slice(None),) + box]
        df2 = ((sub - color.reshape((-1,) + (1,) * ndim)) ** 2).sum(axis=0)
        ds2 = np.zeros(df2.shape)
        for axis, sl in enumerate(box):
            coord = np.arange(sl.start, sl.stop) - pos[axis]
            shape = [1] * ndim
            shape[axis] = -1
            ds2 = ds2 + (coord**2).reshape(shape)
        dist = df2 + ds2 * spatial_scale
        region = best[box]
        closer = dist < region
        region[closer] = dist[closer]
        labels[box][closer] = k
    return labels, best


def _update(feat, labels, centers):
    nch = feat.shape[0]
    ndim = feat.ndim - 1
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=len(centers)).astype(float)
    coords = np.indices(labels.shape).reshape(ndim, -1).astype(float)
    joint = np.concatenate([feat.reshape(nch, -1), coords])
    new = centers.copy()
    live = counts > 0
    for j in range(joint.shape[0]):
        sums = np.bincount(flat, weights=joint[j], minlength=len(centers))
        new[live, j] = sums[live] / counts[live]
    return new


def slic_segment(image, params=None):
    """Superpixel partition of ``image``; deterministic for fixed inputs.

    ``image`` is a ``Grid``, a list of ``Grid`` channels, or an array of
    shape ``dims`` / ``(K, *dims)``.
    """
    params = params or SlicParams()
    feat, spacing = _features(image)
    return _segment(feat, spacing, params)


def slic_segment_slices(image, params=None):
    """Run SLIC independently on each axis-0 slice of a volume.

    ``params.target_count`` is per slice. Ids are offset so the result is
    one partition of the volume (blocks never cross slices). Channels are
    scaled over the whole volume, not per slice.
    """
    params = params or SlicParams()
    feat, spacing = _features(image)
    if feat.ndim != 4:
        raise ValueError("per-slice SLIC needs a 3D volume")
    out = np.empty(feat.shape[1:], dtype=np.int64)
    offset = 0
    for z in range(feat.shape[1]):
        sp = _segment(feat[:, z], spacing[1:] if spacing else None, params)
        out[z] = sp.block_ids + offset
        offset += sp.num_blocks
    return SuperpixelMap(out, spacing)


def _segment(feat, spacing, params):
    dims = feat.shape[1:]
    n = math.prod(dims)
    if params.target_count > n:
        raise ValueError(f"target_count {params.target_count} exceeds pixel count {n}")
    if params.target_count == 1:
        return SuperpixelMap(np.zeros(dims, dtype=np.int64), spacing)

    ndim = len(dims)
    step = (n / params.target_count) ** (1.0 / ndim)
    counts = grid_layout(dims, params.target_count)
    # one pixel of slack so every pixel is reachable from its own seed
    windows = [d / c + 1.0 for d, c in zip(dims, counts)]
    spatial_scale = (params.compactness / step) ** 2

    centers = _init_centers(feat, counts)
    labels = None
    for _ in range(params.max_iters):
        new_labels, _ = _assign(feat, centers, windows, spatial_scale)
        missing = new_labels < 0
        if missing.any():
            if labels is None:
                new_labels[missing] = _nearest_center(feat, centers, missing, spatial_scale)
            else:
                new_labels[missing] = labels[missing]
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = _update(feat, labels, centers)
    result = enforce_connectivity(labels, params, spacing=spacing)
    m = result.num_blocks
    if not 0.5 * params.target_count <= m <= 2 * params.target_count:
        log.info("SLIC produced %d blocks for a target of %d", m, params.target_count)
    return result


def _nearest_center(feat, centers, where, spatial_scale):
    nch = feat.shape[0]
    pts = np.argwhere(where).astype(float)
    colors = feat[:, where].T
    df2 = ((colors[:, None, :] - centers[None, :, :nch]) ** 2).sum(-1)
    ds2 = ((pts[:, None, :] - centers[None, :, nch:]) ** 2).sum(-1)
    return np.argmin(df2 + ds2 * spatial_scale, axis=1)


def _components(ids):
    """Face-connected components of each id, numbered in raster order."""
    comp = np.zeros(ids.shape, dtype=np.int64)
    structure = ndimage.generate_binary_structure(ids.ndim, 1)
    total = 0
    for value in np.unique(ids):
        lab, k = ndimage.label(ids == value, structure=structure)
        comp[lab > 0] = lab[lab > 0] + total
        total += k
    return _compact(comp - 1)


def _compact(ids):
    """Relabel to 0..M-1 in order of first appearance in raster order."""
    _, first, inverse = np.unique(ids.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].reshape(ids.shape)


def _adjacency(comp):
    pairs = set()
    for axis in range(comp.ndim):
        a = np.moveaxis(comp, axis, 0)[:-1].ravel()
        b = np.moveaxis(comp, axis, 0)[1:].ravel()
        diff = a != b
        for u, v in zip(a[diff].tolist(), b[diff].tolist()):
            pairs.add((u, v))
            pairs.add((v, u))
    neighbors = {}
    for u, v in pairs:
        neighbors.setdefault(u, set()).add(v)
    return neighbors


def enforce_connectivity(raw_ids, params=None, spacing=None):
    """Split disconnected ids and absorb small fragments into a neighbor.

    Components smaller than ``conn_min_fraction * N / target_count`` are
    merged into their largest adjacent block, smallest fragments first.
    """
    params = params or SlicParams()
    ids = np.asarray(raw_ids)
    if ids.size == 0:
        raise ValueError("empty id map")
    comp = _components(ids)
    threshold = params.conn_min_fraction * ids.size / params.target_count
    sizes = np.bincount(comp.ravel()).astype(np.int64)
    m = len(sizes)
    parent = list(range(m))
    size = sizes.tolist()
    neighbors = _adjacency(comp)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in sorted(range(m), key=lambda c: (sizes[c], c)):
        root = find(c)
        if size[root] >= threshold:
            continue
        adj = {find(v) for v in neighbors.get(root, ())} - {root}
        if not adj:
            continue
        target = max(adj, key=lambda r: (size[r], -r))
        parent[root] = target
        size[target] += size[root]
        neighbors.setdefault(target, set()).update(neighbors.pop(root, set()))
    roots = np.array([find(c) for c in range(m)])
    merged = _compact(roots[comp])
    return SuperpixelMap(merged, spacing)
