"""Desk-scale experiments: synthetic images with noisy annotations.

A per-pixel linear softmax model is trained on boundary-corrupted labels
with CE/WCE + Dice (+ KL against soft labels) and evaluated against the
clean shapes. Everything is a pure function of (config, seed).
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from scipy import ndimage

from .grid import Grid, LabelMap, class_frequencies, one_hot_encode
from .losses import LossWeights, class_weights_enet, combined_loss
from .metrics import METRIC_NAMES, average_reports, evaluate_labels
from .sdt import signed_edt
from .slic import SlicParams, slic_segment
from .soften import gaussian_soften, soften

log = logging.getLogger(__name__)

MODES = ("hard", "gaussian", "superpixel")
DEFAULT_BETAS = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
# area-scaled from 500..3500 blocks on full MRI volumes: block side ~13 down to ~3 px on 64x64
DEFAULT_COUNTS = (25, 50, 100, 200, 400)


class TrainingDivergence(RuntimeError):
    def __init__(self, message, sweep_value=None, seed=None):
        super().__init__(message)
        self.sweep_value = sweep_value
        self.seed = seed


@dataclass(frozen=True)
class ExperimentConfig:
    num_train: int = 4
    num_eval: int = 4
    size: int = 64
    num_classes: int = 2
    shapes_per_class: int = 2
    corruption: float = 2.0
    noise: float = 0.08
    bias: float = 0.05
    blur: float = 1.0
    target_count: int = 100
    # intensities are scaled to [0, 1], so SLIC compactness is ~100x smaller than in Lab space
    compactness: float = 0.2
    beta: float = 1.0
    alpha: float = 1.0
    weighting: str = "enet"
    sigma: float = 1.0
    learning_rate: float = 1.0
    epochs: int = 150
    seeds: tuple = tuple(range(10))

    def __post_init__(self):
        for name in ("num_train", "num_eval", "size", "shapes_per_class", "target_count", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.weighting not in ("uniform", "enet"):
            raise ValueError(f"weighting must be 'uniform' or 'enet', got {self.weighting!r}")
        if self.corruption < 0 or self.noise < 0 or self.bias < 0 or self.blur < 0:
            raise ValueError("corruption, noise, bias and blur must be non-negative")
        if not self.seeds:
            raise ValueError("seed list is empty")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def from_mapping(cls, values):
        """Build from ``{key: (string value, lineno)}`` as returned by ``parse_config``."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, (raw, lineno) in values.items():
            if key not in known:
                where = f"line {lineno}: " if lineno else ""
                raise KeyError(f"{where}unknown key {key!r}")
            kwargs[key] = _coerce(key, raw, lineno)
        return cls(**kwargs)


def _coerce(key, raw, lineno=None):
    default = getattr(ExperimentConfig, key, None)
    where = f"line {lineno}: " if lineno else ""
    try:
        if key == "seeds":
            return _parse_seeds(raw)
        if isinstance(default, str):
            return raw
        if isinstance(default, int):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ValueError(f"{where}bad value {raw!r} for {key}") from None


def _parse_seeds(raw):
    raw = str(raw).strip()
    if ".." in raw:
        lo, hi = raw.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in raw.replace(",", " ").split())


@dataclass
class SyntheticSample:
    image: Grid
    clean_gt: LabelMap
    noisy_gt: LabelMap
    seed: int


@dataclass
class LinearSegmenter:
    """Softmax regression on whitened per-pixel features."""

    weights: np.ndarray  # (F, C)
    bias: np.ndarray  # (C,)
    center: np.ndarray  # (F,)
    whiten: np.ndarray  # (F, F)
    history: list = field(default_factory=list)

    def logits(self, features):
        return ((features - self.center) @ self.whiten) @ self.weights + self.bias

    def predict(self, image):
        feats = featurize(image)
        flat = feats.reshape(-1, feats.shape[-1])
        return np.argmax(self.logits(flat), axis=1).reshape(feats.shape[:-1])


def _smooth_field(rng, shape, sigma):
    """Unit-std smooth random field."""
    g = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    std = g.std()
    return g / std if std > 0 else g


def _paint_shapes(rng, config):
    size, ndim = config.size, 2
    labels = np.zeros((size,) * ndim, dtype=np.int64)
    yy, xx = np.indices(labels.shape, dtype=float)
    for c in range(1, config.num_classes):
        for _ in range(config.shapes_per_class):
            cy, cx = rng.uniform(0.2 * size, 0.8 * size, 2)
            ry, rx = rng.uniform(0.08 * size, 0.2 * size, 2)
            theta = rng.uniform(0, math.pi)
            dy, dx = yy - cy, xx - cx
            u = dy * math.cos(theta) + dx * math.sin(theta)
            v = -dy * math.sin(theta) + dx * math.cos(theta)
            labels[(u / ry) ** 2 + (v / rx) ** 2 <= 1.0] = c
    return labels


def corrupt_boundaries(labels, num_classes, magnitude, rng, correlation=4.0):
    """Move each class boundary in or out by a spatially varying amount.

    A smooth field ``r`` in ``[-magnitude, magnitude]`` is drawn per class;
    class ``c`` becomes ``{d_c >= -r}`` where ``d_c`` is the signed distance
    to its clean boundary, so positive ``r`` dilates and negative ``r``
    erodes, segment by segment. Eroded pixels take the nearest other label.
    """
    noisy = labels.copy()
    if magnitude == 0:
        return noisy
    for c in range(1, num_classes):
        mask = labels == c
        r = magnitude * np.tanh(1.5 * _smooth_field(rng, labels.shape, correlation))
        if not mask.any() or mask.all():
            continue
        d = signed_edt(mask)
        grown = (d >= -r) & ~mask
        shrunk = mask & (d < -r)
        noisy[grown] = c
        if shrunk.any():
            _, idx = ndimage.distance_transform_edt(mask, return_indices=True)
            noisy[shrunk] = labels[tuple(i[shrunk] for i in idx)]
    return noisy


def gen_synthetic(seed, config=None):
    """Noisy multi-blob image plus clean and boundary-corrupted annotations."""
    config = config or ExperimentConfig()
    rng = np.random.default_rng(seed)
    clean = _paint_shapes(rng, config)
    levels = np.linspace(0.15, 0.85, config.num_classes)
    image = levels[clean]
    if config.blur > 0:
        image = ndimage.gaussian_filter(image, config.blur, mode="nearest")
    image = image + config.bias * _smooth_field(rng, clean.shape, config.size / 4)
    image = image + config.noise * rng.standard_normal(clean.shape)
    noisy = corrupt_boundaries(clean, config.num_classes, config.corruption, rng)
    return SyntheticSample(
        image=Grid(image),
        clean_gt=LabelMap(clean, config.num_classes),
        noisy_gt=LabelMap(noisy, config.num_classes),
        seed=seed,
    )


def _box_smooth(values, width):
    return ndimage.uniform_filter(values, size=width, mode="nearest")


def featurize(image):
    """Per-pixel features: intensity, 3- and 7-wide box means, normalized coordinates.

    Returns an array of shape ``(*dims, ndim + 3)``.
    """
    values = np.asarray(image.values if isinstance(image, Grid) else image, dtype=float)
    coords = [
        (idx / max(n - 1, 1)) for idx, n in zip(np.indices(values.shape, dtype=float), values.shape)
    ]
    return np.stack([values, _box_smooth(values, 3), _box_smooth(values, 7), *coords], axis=-1)


def make_soft_labels(sample, mode, config):
    hard = one_hot_encode(sample.noisy_gt)
    if mode == "gaussian":
        return gaussian_soften(hard, config.sigma)
    if mode == "superpixel":
        sp = slic_segment(
            sample.image, SlicParams(config.target_count, config.compactness)
        )
        return soften(hard, sp, normalize=True)
    return None


def _stack_training(samples, mode, config):
    feats, hard, soft = [], [], []
    for s in samples:
        f = featurize(s.image)
        feats.append(f.reshape(-1, f.shape[-1]))
        hard.append(one_hot_encode(s.noisy_gt).planes.reshape(config.num_classes, -1))
        if mode != "hard":
            q = make_soft_labels(s, mode, config)
            soft.append(q.planes.reshape(config.num_classes, -1))
    x = np.concatenate(feats)
    y = np.concatenate(hard, axis=1)
    q = np.concatenate(soft, axis=1) if soft else None
    return x, y, q


def _whitening(x):
    """Centering and PCA whitening; keeps plain gradient descent well conditioned."""
    center = x.mean(axis=0)
    cov = np.cov(x - center, rowvar=False)
    evals, evecs = np.linalg.eigh(cov)
    return center, evecs / np.sqrt(np.maximum(evals, 0) + 1e-8)


def train(samples, mode="hard", config=None):
    """Full-batch gradient descent on the combined loss.

    The step is halved whenever it would raise the loss by more than 1e-6,
    so the recorded loss history is non-increasing.
    """
    config = config or ExperimentConfig()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not samples:
        raise ValueError("need at least one training sample")
    beta = 0.0 if mode == "hard" else config.beta
    x, y, q = _stack_training(samples, mode, config)
    if config.weighting == "enet":
        class_weights = class_weights_enet(class_frequencies(y))
    else:
        class_weights = None
    weights = LossWeights(alpha=config.alpha, beta=beta, class_weights=class_weights)
    center, whiten = _whitening(x)
    x = (x - center) @ whiten
    f, c = x.shape[1], config.num_classes
    w = np.zeros((f, c))
    b = np.zeros(c)

    def objective(w, b):
        z = (x @ w + b).T
        value, gz = combined_loss(y, q, z, weights)
        return value, x.T @ gz.T, gz.sum(axis=1)

    lr = config.learning_rate
    loss, gw, gb = objective(w, b)
    history = [loss]
    for epoch in range(config.epochs):
        while True:
            w_new, b_new = w - lr * gw, b - lr * gb
            new_loss, new_gw, new_gb = objective(w_new, b_new)
            if not math.isfinite(new_loss):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}")
            if new_loss <= loss + 1e-6:
                break
            lr *= 0.5
            log.debug("epoch %d: loss rose to %.6g, step halved to %g", epoch, new_loss, lr)
            if lr < 1e-12:
                raise TrainingDivergence(f"step size collapsed at epoch {epoch}")
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        history.append(loss)
    return LinearSegmenter(w, b, center, whiten, history)


def evaluate(model, samples, num_classes=None):
    """Argmax predictions scored against the clean annotations."""
    reports = []
    for s in samples:
        pred = model.predict(s.image)
        c = num_classes or s.clean_gt.num_classes
        reports.append(evaluate_labels(pred, s.clean_gt.labels, c, spacing=s.image.spacing))
    return average_reports(reports)


def split_samples(seed, config):
    train_set = [gen_synthetic(seed * 1000 + i, config) for i in range(config.num_train)]
    eval_set = [gen_synthetic(seed * 1000 + 500 + i, config) for i in range(config.num_eval)]
    return train_set, eval_set


def run_one(config, mode, seed, sweep_value=None):
    """Train and evaluate one arm; returns the mean metrics dict."""
    train_set, eval_set = split_samples(seed, config)
    try:
        model = train(train_set, mode, config)
    except TrainingDivergence as exc:
        raise TrainingDivergence(str(exc), sweep_value, seed) from None
    return evaluate(model, eval_set, config.num_classes).mean


def _run_job(job):
    key, config, mode, seed = job
    return key, seed, run_one(config, mode, seed, sweep_value=key)


def _run_jobs(jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    order = {(j[0], j[3]): i for i, j in enumerate(jobs)}
    results.sort(key=lambda r: order[(r[0], r[1])])
    return [ResultRow(key, seed, metrics) for key, seed, metrics in results]


@dataclass
class ResultRow:
    sweep_value: object
    seed: int
    metrics: dict


def run_methods(config, modes=MODES, workers=1):
    jobs = [(m, config, m, s) for m in modes for s in config.seeds]
    return _run_jobs(jobs, workers)


def sweep_beta(config, betas=DEFAULT_BETAS, workers=1):
    jobs = [
        (b, replace(config, beta=float(b)), "superpixel", s) for b in betas for s in config.seeds
    ]
    return _run_jobs(jobs, workers)


def sweep_superpixels(config, counts=DEFAULT_COUNTS, workers=1):
    jobs = [
        (n, replace(config, target_count=int(n)), "superpixel", s)
        for n in counts
        for s in config.seeds
    ]
    return _run_jobs(jobs, workers)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def raw_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sweep_value", "seed", *METRIC_NAMES])
    for r in rows:
        writer.writerow([_fmt(r.sweep_value), r.seed, *(_fmt(r.metrics[m]) for m in METRIC_NAMES)])
    return buf.getvalue()


def summarize(rows):
    """Mean and sample stddev of each metric per sweep value, in first-seen order."""
    groups = {}
    for r in rows:
        groups.setdefault(r.sweep_value, []).append(r.metrics)
    out = []
    for value, ms in groups.items():
        entry = {"sweep_value": value, "n": len(ms)}
        for name in METRIC_NAMES:
            vals = np.array([m[name] for m in ms if m[name] is not None], dtype=float)
            entry[f"{name}_mean"] = float(vals.mean()) if len(vals) else None
            entry[f"{name}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else (0.0 if len(vals) else None)
        out.append(entry)
    return out


def summary_csv(rows):
    summary = summarize(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["sweep_value", "n"] + [f"{m}_{s}" for m in METRIC_NAMES for s in ("mean", "std")]
    writer.writerow(header)
    for entry in summary:
        writer.writerow([_fmt(entry[h]) for h in header])
    return buf.getvalue()


def config_header(config):
    """Comment lines recording the config; prepended to result files."""
    lines = [f"# {k} = {v}" for k, v in asdict(config).items()]
    lines.append(
        "# metrics: surfaces = foreground pixels with a background face-neighbor; "
        "hd95 = max of directed 95th percentiles (linear interpolation)"
    )
    return "\n".join(lines) + "\n"
