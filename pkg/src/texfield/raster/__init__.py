"""Software rasterizer and synthetic view datasets."""

from texfield.raster.dataset import (
    EVAL_RESOLUTION,
    TRAIN_RESOLUTION,
    ObjectViews,
    generate_collection,
    generate_dataset,
    load_dataset,
    load_depth,
    load_png,
    load_view,
    quantize_image,
    render_views,
    sample_views,
    save_depth,
    save_png,
)
from texfield.raster.rasterizer import BACKGROUND, ViewSample, rasterize

__all__ = [
    "BACKGROUND", "EVAL_RESOLUTION", "ObjectViews", "TRAIN_RESOLUTION", "ViewSample",
    "generate_collection", "generate_dataset", "load_dataset", "load_depth", "load_png",
    "load_view", "quantize_image", "rasterize", "render_views", "sample_views", "save_depth", "save_png",
]
