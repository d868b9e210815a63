"""Mask-guided matting toolkit with background-line pseudo labels."""

from ._auxmat import (
    IoError,
    background_line_gt,
    composite,
    conn_error,
    distance_field,
    edge_from_mask,
    grad_error,
    gradcheck,
    homography_adaptation,
    line_activation,
    loss_region_mask,
    lsd_detect,
    make_guidance,
    mse,
    read_field,
    read_png,
    sad,
    synth_sample,
    write_field,
    write_png,
)

__version__ = "0.1.0"
