"""Sparse-view CT reconstruction: Joseph projector, FBP, SART, SART+TV and
deep generative reconstruction with a SkipNet prior."""

from ._core import (
    ConfigError,
    DegenerateRoiError,
    Geometry,
    add_awgn,
    back_project,
    cnr,
    dgr_reconstruct,
    fbp,
    forward_project,
    load_hu_slice,
    psnr,
    random_ellipses,
    sart,
    sart_tv,
    shepp_logan,
    ssim,
)

__all__ = [
    "ConfigError",
    "DegenerateRoiError",
    "Geometry",
    "add_awgn",
    "back_project",
    "cnr",
    "dgr_reconstruct",
    "fbp",
    "forward_project",
    "load_hu_slice",
    "psnr",
    "random_ellipses",
    "sart",
    "sart_tv",
    "shepp_logan",
    "ssim",
]
