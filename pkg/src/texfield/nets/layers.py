"""Fully connected residual block shared by the field and the shape encoder."""

from __future__ import annotations

import numpy as np

from texfield.autodiff import Linear, Module, Tensor


class ResnetBlockFC(Module):
    """Pre-activation residual block: ``shortcut(x) + fc_1(relu(fc_0(relu(x))))``.

    The shortcut is the identity when ``size_in == size_out`` and a bias-free
    linear map otherwise. The hidden width defaults to ``min(size_in, size_out)``.
    """

    def __init__(self, size_in: int, rng: np.random.Generator, size_out: int | None = None,
                 size_h: int | None = None):
        size_out = size_in if size_out is None else size_out
        size_h = min(size_in, size_out) if size_h is None else size_h
        self.fc_0 = Linear(size_in, size_h, rng)
        self.fc_1 = Linear(size_h, size_out, rng)
        self.shortcut = None if size_in == size_out else Linear(size_in, size_out, rng, bias=False)

    def forward(self, x: Tensor) -> Tensor:
        dx = self.fc_1(self.fc_0(x.relu()).relu())
        xs = x if self.shortcut is None else self.shortcut(x)
        return xs + dx


def area_downsample(image: np.ndarray, resolution: int) -> np.ndarray:
    """Average (..., H, W, C) images over square blocks down to ``resolution``²."""
    h, w = image.shape[-3], image.shape[-2]
    if h % resolution or w % resolution or h != w:
        raise ValueError(f"cannot area-downsample {h}x{w} to {resolution}x{resolution}")
    f = h // resolution
    if f == 1:
        return np.asarray(image)
    lead = image.shape[:-3]
    blocks = image.reshape(lead + (resolution, f, resolution, f, image.shape[-1]))
    return blocks.mean(axis=(-4, -2)).astype(image.dtype)
