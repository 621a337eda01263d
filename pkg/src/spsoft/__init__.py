"""Superpixel-guided label softening for segmentation."""

from .grid import Grid, LabelMap, OneHotStack, class_frequencies, one_hot_encode
from .losses import (
    LossWeights,
    ce_loss,
    class_weights_enet,
    combined_loss,
    dice_loss,
    kl_loss,
    softmax,
)
from .metrics import MetricReport, asd, assd, dice_score, hd95, surface_distances, volumetric_similarity
from .sdt import BoundarySet, NoBoundaryError, extract_boundary, signed_edt
from .slic import SlicParams, SuperpixelMap, enforce_connectivity, slic_segment, slic_segment_slices
from .soften import Relation, SoftLabelStack, classify_relation, dist_to_prob, gaussian_soften, soften

__version__ = "0.1.0"
