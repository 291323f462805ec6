"""Image metrics, field rendering, the voxel baseline and evaluation reports."""

from texfield.evaluation.metrics import C1, C2, PSNR_CAP, SSIM_WINDOW, mean_l1, psnr, ssim
from texfield.evaluation.render import colorize_mesh, query_field, render_field, shape_embedding
from texfield.evaluation.report import MetricsReport, evaluate, evaluate_images, view_metrics
from texfield.evaluation.voxels import (
    ColorVoxelGrid,
    build_color_voxel_grid,
    default_sample_count,
    render_voxel_grid,
    voxel_mesh,
)

__all__ = [
    "C1", "C2", "ColorVoxelGrid", "MetricsReport", "PSNR_CAP", "SSIM_WINDOW", "build_color_voxel_grid",
    "colorize_mesh", "default_sample_count", "evaluate", "evaluate_images", "mean_l1", "psnr",
    "query_field", "render_field", "render_voxel_grid", "shape_embedding", "ssim", "view_metrics",
    "voxel_mesh",
]
