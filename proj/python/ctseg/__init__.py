"""Volumetric segmentation benchmark engine.

Surface distance metrics (Hausdorff, ASSD, surface overlap/dice), overlap
metrics, the weighted dice loss with its analytic gradient, CLAHE
preprocessing, synthetic jaw phantoms and a seeded forward pass of the
attention encoder-decoder. Volumes are 3D float32 numpy arrays in (D, H, W)
order plus a (dz, dy, dx) spacing in millimeters.
"""

from ._core import (
    Volume,
    assd,
    attention_variants,
    clahe_slice,
    clahe_volume,
    confusion_counts,
    evaluate_case,
    extract_surface,
    generate_phantom,
    hausdorff,
    loss_gradient,
    model_forward,
    normalize_volume,
    perturb_prediction,
    read_nifti,
    read_volume,
    resize_axial,
    surface_dice,
    surface_overlap,
    threshold_prob,
    weighted_dice_loss,
    write_volume,
)

__all__ = [
    "Volume",
    "assd",
    "attention_variants",
    "clahe_slice",
    "clahe_volume",
    "confusion_counts",
    "evaluate_case",
    "extract_surface",
    "generate_phantom",
    "hausdorff",
    "loss_gradient",
    "model_forward",
    "normalize_volume",
    "perturb_prediction",
    "read_nifti",
    "read_volume",
    "resize_axial",
    "surface_dice",
    "surface_overlap",
    "threshold_prob",
    "weighted_dice_loss",
    "write_volume",
]

__version__ = "0.1.0"
