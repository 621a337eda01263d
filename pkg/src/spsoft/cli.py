"""Command-line front end.

Exit codes: 0 success, 2 usage or unreadable input, 3 inconsistent data,
4 numerical failure during training.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import replace

import numpy as np

from . import toylab
from .grid import LabelMap, one_hot_encode
from .io import ConfigError, FormatError, parse_config, read_image, read_vox, write_vox
from .metrics import METRIC_NAMES, evaluate_labels
from .slic import SlicParams, slic_segment, slic_segment_slices
from .soften import gaussian_soften, soften


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def usage_error(message):
    return CliError(message, 2)


def data_error(message):
    return CliError(message, 3)


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _load_image(path, channels=False):
    """Image as a ``dims`` array or a list of channel arrays, plus spacing."""
    try:
        data, spacing = read_image(path)
    except FileNotFoundError:
        raise usage_error(f"cannot read input: {path}: no such file") from None
    except (OSError, FormatError) as exc:
        raise usage_error(f"cannot read input: {path}: {exc}") from None
    if data.ndim == 4:
        # (channels, Z, H, W); a singleton Z means a 2D multichannel image
        if data.shape[1] == 1:
            data, spacing = data[:, 0], spacing[1:]
        return list(data), tuple(spacing)
    if channels:
        if data.ndim != 3:
            raise usage_error("--channels needs a 3-axis (channels, H, W) input")
        return list(data), tuple(spacing[1:])
    return data, tuple(spacing)


def _load_vox(path, what):
    try:
        return read_vox(path)
    except FileNotFoundError:
        raise usage_error(f"cannot read {what}: {path}: no such file") from None
    except (OSError, FormatError) as exc:
        raise usage_error(f"cannot read {what}: {path}: {exc}") from None


def _load_labels(path, num_classes, what="labels"):
    vox = _load_vox(path, what)
    data = vox.data
    if data.ndim == 4:
        raise data_error(f"{path}: expected a label map, got a 4-axis stack")
    if data.dtype.kind == "f":
        if not np.all(np.mod(data, 1) == 0):
            raise data_error(f"{path}: label values must be integers")
    labels = data.astype(np.int64)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise data_error(
            f"{path}: label values span [{labels.min()}, {labels.max()}], "
            f"inconsistent with --classes {num_classes}"
        )
    return labels, vox.spacing


def _as_stack_file(planes, spacing):
    """(C, *dims) -> 4-axis (C, Z, H, W) with 3 spacing entries."""
    if planes.ndim == 3:
        return planes[:, None], (1.0,) + tuple(spacing)
    return planes, tuple(spacing)


def cmd_slic(args):
    if args.count < 1:
        raise usage_error("--count must be >= 1")
    if not args.compactness > 0:
        raise usage_error("--compactness must be > 0")
    if args.iters < 1:
        raise usage_error("--iters must be >= 1")
    image, spacing = _load_image(args.input, args.channels)
    n = image[0].size if isinstance(image, list) else image.size
    if args.count > n:
        raise usage_error(f"--count {args.count} exceeds the pixel count {n}")
    params = SlicParams(args.count, args.compactness, args.iters, args.min_fraction)
    if args.per_slice:
        ndim = image[0].ndim if isinstance(image, list) else image.ndim
        if ndim != 3:
            raise usage_error("--per-slice needs a 3D volume")
        per = n // (image[0].shape[0] if isinstance(image, list) else image.shape[0])
        if args.count > per:
            raise usage_error(f"--count {args.count} exceeds the per-slice pixel count {per}")
        sp = slic_segment_slices(image, params)
    else:
        sp = slic_segment(image, params)
    m = sp.num_blocks
    dtype = np.uint16 if m <= np.iinfo(np.uint16).max else np.float32
    write_vox(args.output, sp.block_ids.astype(dtype), spacing[-sp.block_ids.ndim :])
    print(m)
    return 0


def cmd_soften(args):
    if args.classes < 2:
        raise usage_error("--classes must be >= 2")
    labels, spacing = _load_labels(args.gt, args.classes, "ground truth")
    hard = one_hot_encode(LabelMap(labels, args.classes, spacing))
    if args.method == "sp":
        if not args.superpixels:
            raise usage_error("--superpixels is required for --method sp")
        ids = _load_vox(args.superpixels, "superpixels").data
        if ids.shape != labels.shape:
            raise data_error(f"dimension mismatch: ground truth {labels.shape} vs superpixels {ids.shape}")
        stack = soften(hard, ids.astype(np.int64), normalize=args.normalize)
    else:
        if not args.sigma > 0:
            raise usage_error("--sigma must be > 0")
        stack = gaussian_soften(hard, args.sigma)
    planes, sp4 = _as_stack_file(stack.planes.astype(np.float32), spacing)
    write_vox(args.output, planes, sp4)
    print(f"wrote {stack.num_classes} soft planes of shape {labels.shape} ({args.method})")
    return 0


def metrics_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", *METRIC_NAMES])
    for name, values in report.rows():
        writer.writerow([name, *("" if values[m] is None else repr(float(values[m])) for m in METRIC_NAMES)])
    return buf.getvalue()


def cmd_metrics(args):
    if args.classes < 2:
        raise usage_error("--classes must be >= 2")
    pred, _ = _load_labels(args.pred, args.classes, "prediction")
    gt, spacing = _load_labels(args.gt, args.classes, "ground truth")
    if pred.shape != gt.shape:
        raise data_error(f"dimension mismatch: prediction {pred.shape} vs ground truth {gt.shape}")
    report = evaluate_labels(pred, gt, args.classes, spacing=spacing)
    with open(args.csv_out, "w", newline="") as fh:
        fh.write(metrics_csv(report))
    mean = report.mean
    print(" ".join(f"{k}={'n/a' if v is None else f'{v:.4f}'}" for k, v in mean.items()))
    return 0


def _seed_list(text):
    text = text.strip()
    if "," in text or ".." in text:
        return toylab._parse_seeds(text)
    count = int(text)
    if count < 1:
        raise ValueError
    return tuple(range(count))


def _toy_config(args):
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values = parse_config(fh.read())
        except FileNotFoundError:
            raise usage_error(f"cannot read config: {args.config}: no such file") from None
        except ConfigError as exc:
            raise usage_error(f"{args.config}: {exc}") from None
    for item in args.set or []:
        if "=" not in item:
            raise usage_error(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        values[key] = (value, None)
    try:
        config = toylab.ExperimentConfig.from_mapping(values)
    except KeyError as exc:
        raise usage_error(f"{args.config or '--set'}: {exc.args[0]}") from None
    except ValueError as exc:
        raise usage_error(str(exc)) from None
    overrides = {}
    if args.seeds is not None:
        try:
            overrides["seeds"] = _seed_list(args.seeds)
        except ValueError:
            raise usage_error(f"--seeds: bad value {args.seeds!r}") from None
    if args.beta is not None:
        overrides["beta"] = args.beta
    try:
        return replace(config, **overrides)
    except ValueError as exc:
        raise usage_error(str(exc)) from None


def _float_list(text, flag):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise usage_error(f"{flag}: bad value {text!r}") from None


def cmd_toy(args):
    config = _toy_config(args)
    try:
        if args.action == "run":
            rows = toylab.run_methods(config, workers=args.workers)
        elif args.action == "sweep-beta":
            betas = _float_list(args.betas, "--betas") if args.betas else toylab.DEFAULT_BETAS
            rows = toylab.sweep_beta(config, betas, workers=args.workers)
        else:
            if args.counts:
                counts = tuple(int(c) for c in _float_list(args.counts, "--counts"))
            else:
                counts = toylab.DEFAULT_COUNTS
            if any(c < 1 or c > config.size**2 for c in counts):
                raise usage_error("--counts must lie in [1, size*size]")
            rows = toylab.sweep_superpixels(config, counts, workers=args.workers)
    except toylab.TrainingDivergence as exc:
        raise CliError(
            f"training diverged at sweep value {exc.sweep_value}, seed {exc.seed}: {exc}", 4
        ) from None
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "raw.csv"), "w", newline="") as fh:
        fh.write(toylab.raw_csv(rows))
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        fh.write(toylab.summary_csv(rows))
    with open(os.path.join(args.out, "config.txt"), "w") as fh:
        fh.write(toylab.config_header(config))
    for entry in toylab.summarize(rows):
        parts = [f"{m}={entry[m + '_mean']:.4f}" for m in METRIC_NAMES if entry[m + "_mean"] is not None]
        print(f"{entry['sweep_value']}: " + " ".join(parts))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spsoft", description="Superpixel-guided label softening toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("slic", help="compute SLIC superpixels")
    p.add_argument("--input", required=True, help="PGM (P5) or SVXB image")
    p.add_argument("--count", type=int, required=True, help="target number of superpixels")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--min-fraction", type=float, default=0.25, help="smallest kept block, as a fraction of N/count")
    p.add_argument("--channels", action="store_true", help="treat a 3-axis SVXB input as (channels, H, W)")
    p.add_argument("--per-slice", action="store_true", help="segment each Z slice of a volume separately")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_slic)

    p = sub.add_parser("soften", help="turn a label map into soft labels")
    p.add_argument("--gt", required=True, help="SVXB label map")
    p.add_argument("--superpixels", help="SVXB superpixel map (for --method sp)")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--normalize", type=_bool, default=True)
    p.add_argument("--method", choices=("sp", "gaussian"), default="sp")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian sigma in pixels")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_soften)

    p = sub.add_parser("metrics", help="Dice, VS, HD95, ASD and ASSD per class")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--csv-out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("toy", help="synthetic experiments")
    p.add_argument("action", choices=("run", "sweep-beta", "sweep-superpixels"))
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--seeds", help="seed count N (seeds 0..N-1), 'a..b', or a comma list")
    p.add_argument("--beta", type=float)
    p.add_argument("--betas", help="comma list of beta values for sweep-beta")
    p.add_argument("--counts", help="comma list of superpixel counts for sweep-superpixels")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory for raw.csv and summary.csv")
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"spsoft {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
