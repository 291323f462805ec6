"""Per-view and aggregate evaluation reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from texfield.errors import ContractError
from texfield.evaluation.metrics import mean_l1, psnr, ssim
from texfield.evaluation.render import render_field, shape_embedding
from texfield.geometry import Camera, Mesh
from texfield.raster import BACKGROUND

METRIC_KEYS = ("ssim", "psnr", "l1", "l1_fg")


@dataclass
class MetricsReport:
    """Metrics for each view plus their means.

    ``l1`` covers the whole image; ``l1_fg`` only the target's foreground.
    """

    per_view: list[dict] = field(default_factory=list)
    model_id: str = ""
    config: dict = field(default_factory=dict)

    @property
    def view_count(self) -> int:
        return len(self.per_view)

    def mean(self, key: str) -> float:
        if not self.per_view:
            return float("nan")
        return float(np.mean([v[key] for v in self.per_view]))

    @property
    def ssim_mean(self) -> float:
        return self.mean("ssim")

    @property
    def psnr_mean(self) -> float:
        return self.mean("psnr")

    @property
    def l1_mean(self) -> float:
        return self.mean("l1")

    @property
    def l1_fg_mean(self) -> float:
        return self.mean("l1_fg")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "config": self.config,
            "view_count": self.view_count,
            "ssim_mean": self.ssim_mean,
            "psnr_mean": self.psnr_mean,
            "l1_mean": self.l1_mean,
            "l1_fg_mean": self.l1_fg_mean,
            "per_view": self.per_view,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "MetricsReport":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(per_view=d["per_view"], model_id=d.get("model_id", ""), config=d.get("config", {}))


def view_metrics(pred, target, mask=None) -> dict:
    return {
        "ssim": ssim(pred, target),
        "psnr": psnr(pred, target),
        "l1": mean_l1(pred, target),
        "l1_fg": mean_l1(pred, target, mask) if mask is not None else mean_l1(pred, target),
    }


def evaluate_images(preds, targets, masks=None, model_id: str = "", config: dict | None = None) -> MetricsReport:
    """Compare rendered images to targets view by view, in the given order."""
    preds, targets = list(preds), list(targets)
    if len(preds) != len(targets):
        raise ContractError(f"{len(preds)} predictions for {len(targets)} targets")
    if masks is not None:
        masks = list(masks)
        if len(masks) != len(targets):
            raise ContractError(f"{len(masks)} masks for {len(targets)} targets")
    report = MetricsReport(model_id=model_id, config=dict(config or {}))
    for i, (p, t) in enumerate(zip(preds, targets)):
        rec = {"view": i}
        rec.update(view_metrics(p, t, None if masks is None else masks[i]))
        report.per_view.append(rec)
    return report


def evaluate(model, mesh: Mesh, cameras: list[Camera], targets, z=None, masks=None,
             background=BACKGROUND, model_id: str = "") -> MetricsReport:
    """Render ``mesh`` with the field from each camera and score against ``targets``."""
    cameras, targets = list(cameras), list(targets)
    if len(cameras) != len(targets):
        raise ContractError(f"{len(cameras)} cameras for {len(targets)} targets")
    s = shape_embedding(model, mesh)
    preds = [render_field(model, mesh, cam, z=z, s=s, background=background) for cam in cameras]
    return evaluate_images(preds, targets, masks, model_id=model_id, config=model.config.to_dict())
