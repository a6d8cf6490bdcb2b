"""KITTI depth-completion error metrics.

MAE/RMSE in mm, iMAE/iRMSE in 1/km (inverse depths computed in 1/m, scaled
once by 1000).  Pooling over frames sums the per-pixel terms, so a pooled
RMSE is the RMSE of all pixels together, not a mean of frame RMSEs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import MM_PER_M, DepthMap
from .errors import DimensionMismatch, EmptyGroundTruth, MissingPrediction

METRIC_KEYS = ("mae", "rmse", "imae", "irmse")


@dataclass(frozen=True)
class ErrorReport:
    n: int                    # evaluated ground-truth pixels
    sum_abs: float            # mm
    sum_sq: float             # mm^2
    sum_iabs: float           # 1/m
    sum_isq: float            # 1/m^2
    gt_points: int = 0        # ground-truth pixels incl. skipped ones
    per_frame: dict = field(default_factory=dict, compare=False)

    @property
    def evaluated_points(self) -> int:
        return self.n

    @property
    def mae(self) -> float:
        return self.sum_abs / self.n

    @property
    def rmse(self) -> float:
        return math.sqrt(self.sum_sq / self.n)

    @property
    def imae(self) -> float:
        return self.sum_iabs / self.n * 1000.0

    @property
    def irmse(self) -> float:
        return math.sqrt(self.sum_isq / self.n) * 1000.0

    @property
    def coverage(self) -> float:
        return self.n / self.gt_points if self.gt_points else 1.0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_KEYS}

    @classmethod
    def pooled(cls, reports, names=None) -> ErrorReport:
        reports = list(reports)
        if not reports:
            raise EmptyGroundTruth("no reports to pool")
        per_frame = dict(zip(names, reports)) if names is not None else {}
        return cls(sum(r.n for r in reports), math.fsum(r.sum_abs for r in reports),
                   math.fsum(r.sum_sq for r in reports), math.fsum(r.sum_iabs for r in reports),
                   math.fsum(r.sum_isq for r in reports), sum(r.gt_points for r in reports),
                   per_frame)


def evaluate(pred: DepthMap, gt: DepthMap, strict: bool = True) -> ErrorReport:
    """Errors of ``pred`` on the pixels where ``gt`` has a value.

    In strict mode a missing prediction on a ground-truth pixel raises
    :class:`MissingPrediction`; otherwise such pixels are skipped and show up
    in :attr:`ErrorReport.coverage`.
    """
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    mask = gt.valid
    total = int(mask.sum())
    if total == 0:
        raise EmptyGroundTruth("ground truth has no valid pixels")
    g = gt.values[mask]
    p = pred.values[mask]
    missing = p <= 0
    if missing.any():
        if strict:
            raise MissingPrediction(int(missing.sum()))
        g, p = g[~missing], p[~missing]
    if len(g) == 0:
        raise MissingPrediction(total)
    err = g - p
    ierr = MM_PER_M / g - MM_PER_M / p      # 1/m
    return ErrorReport(len(g), math.fsum(np.abs(err)), math.fsum(err * err),
                       math.fsum(np.abs(ierr)), math.fsum(ierr * ierr), total)


def format_kv(report: ErrorReport, extra: dict | None = None) -> str:
    """Machine-readable report, one ``key=value`` per line."""
    lines = [
        f"mae_mm={report.mae:.6f}",
        f"rmse_mm={report.rmse:.6f}",
        f"imae_per_km={report.imae:.6f}",
        f"irmse_per_km={report.irmse:.6f}",
        f"evaluated_points={report.n}",
        f"ground_truth_points={report.gt_points}",
        f"coverage={report.coverage:.6f}",
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def format_table(report: ErrorReport, title: str = "pooled") -> str:
    head = f"{'':<24}{'MAE [mm]':>12}{'RMSE [mm]':>12}{'iMAE [1/km]':>13}{'iRMSE [1/km]':>14}"
    rows = [head]
    items = list(report.per_frame.items()) + [(title, report)]
    for name, r in items:
        rows.append(f"{name[:24]:<24}{r.mae:>12.3f}{r.rmse:>12.3f}{r.imae:>13.3f}{r.irmse:>14.3f}")
    return "\n".join(rows) + "\n"
