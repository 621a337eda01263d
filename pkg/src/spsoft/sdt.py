"""Boundary extraction and exact signed Euclidean distance transforms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


class NoBoundaryError(ValueError):
    """Raised when a mask has no boundary pixels to measure distances from."""


@dataclass(frozen=True)
class BoundarySet:
    coords: np.ndarray  # (K, ndim) integer pixel coordinates, raster order
    spacing: tuple

    def __len__(self):
        return len(self.coords)


def _as_mask(mask):
    if isinstance(mask, Grid):
        return np.asarray(mask.values) != 0, mask.spacing
    arr = np.asarray(mask)
    return arr != 0, (1.0,) * arr.ndim


def boundary_mask(mask, border_is_background=False):
    """Foreground pixels with at least one background face-neighbor.

    Neighbors outside the array count as background only when
    ``border_is_background`` is set.
    """
    fg = np.asarray(mask) != 0
    padded = np.pad(fg, 1, mode="constant", constant_values=not border_is_background)
    inner = tuple(slice(1, -1) for _ in range(fg.ndim))
    has_bg = np.zeros_like(fg)
    for axis in range(fg.ndim):
        for shift in (0, 2):
            sl = list(inner)
            sl[axis] = slice(shift, shift + fg.shape[axis])
            has_bg |= ~padded[tuple(sl)]
    return fg & has_bg


def extract_boundary(mask, border_is_background=False):
    fg, spacing = _as_mask(mask)
    bnd = boundary_mask(fg, border_is_background)
    return BoundarySet(np.argwhere(bnd), spacing)


def _lower_envelope_1d(f, w2):
    """Squared distance transform of a sampled function along one line.

    Computes ``min_q f[q] + w2 * (p - q)**2`` for every ``p`` with the
    lower envelope of parabolas (Felzenszwalb & Huttenlocher). ``inf``
    entries of ``f`` are sites that do not exist.
    """
    f = f.tolist()
    n = len(f)
    inf = float("inf")
    sites = [q for q in range(n) if f[q] != inf]
    if not sites:
        return np.full(n, inf)
    v = [sites[0]]
    z = [-inf]
    for q in sites[1:]:
        fq = f[q] + w2 * q * q
        # z[0] is -inf, so the stack never empties
        while True:
            r = v[-1]
            s = (fq - (f[r] + w2 * r * r)) / (2.0 * w2 * (q - r))
            if s > z[-1]:
                break
            v.pop()
            z.pop()
        v.append(q)
        z.append(s)
    z.append(inf)
    out = [0.0] * n
    k = 0
    for p in range(n):
        while z[k + 1] < p:
            k += 1
        d = p - v[k]
        out[p] = w2 * d * d + f[v[k]]
    return np.array(out)


def squared_edt(sites, spacing=None):
    """Squared Euclidean distance from every pixel to the nearest ``True`` site.

    Separable exact transform; with ``spacing`` the distances are physical.
    All-``inf`` output when there are no sites.
    """
    sites = np.asarray(sites, dtype=bool)
    if spacing is None:
        spacing = (1.0,) * sites.ndim
    dist = np.where(sites, 0.0, np.inf)
    for axis in range(sites.ndim):
        w2 = float(spacing[axis]) ** 2
        moved = np.moveaxis(dist, axis, -1)
        lines = moved.reshape(-1, moved.shape[-1])
        result = np.empty_like(lines)
        for i, line in enumerate(lines):
            if np.all(line == np.inf):
                result[i] = line
            else:
                result[i] = _lower_envelope_1d(line, w2)
        dist = np.moveaxis(result.reshape(moved.shape), -1, axis)
    return np.ascontiguousarray(dist)


def signed_edt(mask, spacing=None, border_is_background=False):
    """Signed distance to the mask boundary: >0 inside, 0 on it, <0 outside.

    Pixel units unless ``spacing`` is given (the mm variant used by metrics).
    Returns a ``Grid`` when given a ``Grid``, otherwise an ndarray.
    """
    fg, grid_spacing = _as_mask(mask)
    bnd = boundary_mask(fg, border_is_background)
    if not bnd.any():
        raise NoBoundaryError("mask has no boundary pixels")
    d = np.sqrt(squared_edt(bnd, spacing))
    d = np.where(fg, d, -d)
    if isinstance(mask, Grid):
        return Grid(d, spacing=grid_spacing)
    return d
