"""Evaluation metrics: Chamfer distance, F-score, PSNR, per-property MAE.

Conventions (stated because they differ across the literature):
  - Chamfer is the SQUARED-distance form: mean over a of min squared distance
    to b, plus the symmetric term. Reports scale it by 1e3.
  - F-score threshold defaults to 0.05 normalized units; returned on a 0-100
    scale.
  - PSNR uses MAX=255 and caps a zero-MSE view at 100 dB.
  - Property MAE runs over pixels where EITHER render is foreground; sentinel
    values inside that union become the channel's neutral 0 after per-channel
    normalization (scale/1000, density/10, affordance (rank-1)/9, type one-hot
    L1 distance/2, direction 1-|cos|, ranges /pi, pivot identity).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .asset import ObjectAsset
from .errors import ShapeMismatch
from .geometry import PointCloud, nearest_distances
from .render import PROPERTY_CHANNELS, ViewSpec, default_property_views, rasterize

PSNR_CAP_DB = 100.0
FSCORE_DEFAULT_THR = 0.05


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    cd_e3: float
    fscore_e2: float
    property_mae: dict = field(default_factory=dict)      # normalized
    property_mae_raw: dict = field(default_factory=dict)  # unnormalized

    def to_dict(self) -> dict:
        return {
            "psnr_db": self.psnr_db,
            "cd_e3": self.cd_e3,
            "fscore_e2": self.fscore_e2,
            "property_mae": dict(self.property_mae),
            "property_mae_raw": dict(self.property_mae_raw),
        }


def chamfer(a: PointCloud, b: PointCloud) -> float:
    """Squared-distance Chamfer (unscaled; reports multiply by 1e3)."""
    d_ab = nearest_distances(a, b)
    d_ba = nearest_distances(b, a)
    return float((d_ab ** 2).mean() + (d_ba ** 2).mean())


def fscore(a: PointCloud, b: PointCloud, thr: float = FSCORE_DEFAULT_THR) -> float:
    """F-score on the 0-100 scale at distance threshold thr."""
    if thr <= 0:
        raise ValueError(f"thr must be > 0, got {thr}")
    precision = float((nearest_distances(a, b) <= thr).mean())
    recall = float((nearest_distances(b, a) <= thr).mean())
    if precision + recall == 0.0:
        return 0.0
    return 100.0 * (2.0 * precision * recall) / (precision + recall)


def psnr(pred_views, gt_views) -> float:
    """Mean PSNR over paired 8-bit RGB views; zero-MSE views count as 100 dB."""
    pred = [np.asarray(v, dtype=np.float64) for v in pred_views]
    gt = [np.asarray(v, dtype=np.float64) for v in gt_views]
    if len(pred) != len(gt):
        raise ShapeMismatch(f"view counts differ: {len(pred)} vs {len(gt)}")
    vals = []
    for p, g in zip(pred, gt):
        if p.shape != g.shape:
            raise ShapeMismatch(f"resolutions differ: {p.shape} vs {g.shape}")
        mse = float(((p - g) ** 2).mean())
        if mse == 0.0:
            vals.append(PSNR_CAP_DB)
        else:
            vals.append(min(PSNR_CAP_DB, 10.0 * np.log10(255.0 ** 2 / mse)))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Property MAE


def _affine_normalizer(channel: str):
    if channel == "scale":
        return lambda v: v / 1000.0
    if channel == "density":
        return lambda v: v / 10.0
    if channel == "affordance":
        return lambda v: (v - 1.0) / 9.0
    if channel == "kin_range":
        return lambda v: v / np.pi
    if channel == "kin_pivot":
        return lambda v: v  # already normalized coordinates
    return None


def _pixel_errors(channel: str, pv: np.ndarray, gv: np.ndarray,
                  p_missing: np.ndarray, g_missing: np.ndarray,
                  normalized: bool) -> np.ndarray:
    """Per-pixel error over union-foreground pixel rows (N, c)."""
    if channel == "kin_type":
        # One-hot L1 distance / 2: 0 when codes agree, else 1; a missing side
        # is the neutral zero vector, at distance 1/2 from any one-hot.
        agree = (pv[:, 0] == gv[:, 0])
        err = np.where(agree, 0.0, 1.0)
        err = np.where(p_missing & g_missing, 0.0, err)
        err = np.where(p_missing ^ g_missing, 0.5, err)
        return err
    if channel == "kin_direction":
        # Axis-style angular error, sign-insensitive. Missing side = neutral
        # zero vector: error 1 against any real direction, 0 against missing.
        dot = np.abs((pv * gv).sum(axis=1))
        np_ = np.linalg.norm(pv, axis=1)
        ng = np.linalg.norm(gv, axis=1)
        denom = np_ * ng
        cos = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)
        err = 1.0 - np.clip(cos, 0.0, 1.0)
        err = np.where(p_missing & g_missing, 0.0, err)
        err = np.where(p_missing ^ g_missing, 1.0, err)
        return err
    norm = _affine_normalizer(channel)
    p = norm(pv) if normalized else pv
    g = norm(gv) if normalized else gv
    p = np.where(p_missing[:, None], 0.0, p)
    g = np.where(g_missing[:, None], 0.0, g)
    return np.abs(p - g).mean(axis=1)


def _view_mae(pred: ObjectAsset, gt: ObjectAsset, channel: str, view: ViewSpec,
              normalized: bool) -> float | None:
    """MAE over the union-foreground of one view; None when nothing renders."""
    pi = rasterize(pred, view, channel).pixels
    gi = rasterize(gt, view, channel).pixels
    p_mask = rasterize(pred, view, "mask").pixels[..., 0] > 0
    g_mask = rasterize(gt, view, "mask").pixels[..., 0] > 0
    union = p_mask | g_mask
    if not union.any():
        return None
    pv = pi[union]
    gv = gi[union]
    # A sentinel appears either on a background side of the union or on a
    # foreground part that lacks the property; both count as missing.
    p_missing = (pv == -1.0).all(axis=1)
    g_missing = (gv == -1.0).all(axis=1)
    if channel in ("scale", "density", "affordance", "kin_type"):
        p_missing = ~p_mask[union]
        g_missing = ~g_mask[union]
    err = _pixel_errors(channel, pv, gv, p_missing, g_missing, normalized)
    return float(err.mean())


def property_mae(pred: ObjectAsset, gt: ObjectAsset, channel: str,
                 views=None, normalized: bool = True) -> float:
    """Mean over views of union-foreground per-pixel property error."""
    if channel not in PROPERTY_CHANNELS:
        raise ValueError(f"{channel!r} is not a property channel")
    if views is None:
        views = default_property_views()
    per_view = [_view_mae(pred, gt, channel, v, normalized) for v in views]
    per_view = [v for v in per_view if v is not None]
    return float(np.mean(per_view)) if per_view else 0.0


def evaluate_assets(pred: ObjectAsset, gt: ObjectAsset, n_points: int = 10000,
                    seed: int = 0, psnr_views: int = 30, views=None) -> MetricReport:
    """Full report: shape metrics on sampled clouds, PSNR on random views,
    property MAE (normalized and raw) on the fixed views."""
    from .geometry import surface_sample
    from .meshio import merge_meshes
    from .render import random_sphere_views

    pred_mesh = merge_meshes([p.mesh for p in pred.parts])
    gt_mesh = merge_meshes([p.mesh for p in gt.parts])
    a = surface_sample(pred_mesh, n_points, seed)
    b = surface_sample(gt_mesh, n_points, seed + 1)
    sphere = random_sphere_views(psnr_views, seed)
    pred_rgb = [rasterize(pred, v, "color").pixels.clip(0, 255) for v in sphere]
    gt_rgb = [rasterize(gt, v, "color").pixels.clip(0, 255) for v in sphere]
    mae = {c: property_mae(pred, gt, c, views) for c in PROPERTY_CHANNELS}
    mae_raw = {c: property_mae(pred, gt, c, views, normalized=False)
               for c in PROPERTY_CHANNELS}
    return MetricReport(
        psnr_db=psnr(pred_rgb, gt_rgb),
        cd_e3=chamfer(a, b) * 1e3,
        fscore_e2=fscore(a, b),
        property_mae=mae,
        property_mae_raw=mae_raw,
    )
