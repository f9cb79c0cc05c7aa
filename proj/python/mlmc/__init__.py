"""Blind single-image super-resolution via Monte Carlo kernel sampling.

Images are float64 numpy arrays in [0, 1], shaped (H, W) or (H, W, C);
kernels are square 2D arrays summing to 1.
"""

from ._mlmc import (
    bicubic_upsample,
    blur,
    degrade,
    gaussian_kernel,
    grad_check,
    kernel_psnr,
    motion_kernel,
    psnr,
    sample_kernels,
    solve,
    ssim,
)

__all__ = [
    "bicubic_upsample",
    "blur",
    "degrade",
    "gaussian_kernel",
    "grad_check",
    "kernel_psnr",
    "motion_kernel",
    "psnr",
    "sample_kernels",
    "solve",
    "ssim",
]
