"""Lattice containers shared by the rest of the package.

Arrays are stored row-major with the last axis fastest, which is what numpy
does by default, so ``values.ravel()`` is the serialized buffer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check_spacing(spacing, ndim):
    if spacing is None:
        return (1.0,) * ndim
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != ndim:
        raise ValueError(f"spacing has {len(spacing)} entries for {ndim} axes")
    if any(s <= 0 for s in spacing):
        raise ValueError(f"spacing must be positive, got {spacing}")
    return spacing


@dataclass(frozen=True)
class Grid:
    """Dense scalar field over a 2D or 3D lattice."""

    values: np.ndarray
    spacing: tuple = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim not in (2, 3):
            raise ValueError(f"Grid needs 2 or 3 axes, got {values.ndim}")
        if values.size == 0:
            raise ValueError("empty grid")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, values.ndim))

    @property
    def dims(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    @property
    def size(self):
        return self.values.size


@dataclass(frozen=True)
class LabelMap:
    """Integer category per pixel with ``num_classes`` categories."""

    labels: np.ndarray
    num_classes: int
    spacing: tuple = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim not in (2, 3):
            raise ValueError(f"LabelMap needs 2 or 3 axes, got {labels.ndim}")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ValueError("labels must be integers")
            labels = labels.astype(np.int64)
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(
                f"label values must lie in [0, {self.num_classes - 1}], "
                f"found range [{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, labels.ndim))

    @property
    def dims(self):
        return self.labels.shape

    @property
    def ndim(self):
        return self.labels.ndim


@dataclass(frozen=True)
class OneHotStack:
    """``C`` binary planes, exactly one of which is set at each pixel."""

    planes: np.ndarray
    spacing: tuple = None
    num_classes: int = field(init=False)

    def __post_init__(self):
        planes = np.asarray(self.planes)
        if planes.ndim not in (3, 4):
            raise ValueError("planes must have shape (C, *dims) with 2 or 3 spatial axes")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "num_classes", planes.shape[0])
        object.__setattr__(self, "spacing", _check_spacing(self.spacing, planes.ndim - 1))

    @property
    def dims(self):
        return self.planes.shape[1:]

    def argmax(self):
        return np.argmax(self.planes, axis=0)


def one_hot_encode(labels):
    """One binary plane per class; plane ``c`` is 1 exactly where ``labels == c``."""
    if not isinstance(labels, LabelMap):
        raise TypeError("one_hot_encode expects a LabelMap")
    lab = labels.labels
    if lab.min() < 0 or lab.max() >= labels.num_classes:
        raise ValueError(f"label out of range for C={labels.num_classes}")
    classes = np.arange(labels.num_classes).reshape((-1,) + (1,) * lab.ndim)
    planes = (lab[None] == classes).astype(np.float64)
    return OneHotStack(planes, spacing=labels.spacing)


def class_frequencies(stack):
    """Fraction of pixels belonging to each class."""
    planes = stack.planes if isinstance(stack, OneHotStack) else np.asarray(stack)
    n = planes[0].size
    counts = planes.reshape(planes.shape[0], -1).sum(axis=1)
    return counts / n
