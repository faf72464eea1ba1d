"""ROI-restricted PSNR and SSIM.

Both metrics use a declared data range (1.0 for normalized images), never
the per-image maximum, and only pixels inside the circular ROI (radius
S/2, centre ((S-1)/2, (S-1)/2), boundary included) contribute. For
rectangular grids such as sinograms pass roi=False.

SSIM uses a Gaussian window (sigma 1.5, truncated to 11 x 11), population
statistics and C1 = (0.01 R)^2, C2 = (0.03 R)^2; the local SSIM map is
averaged over the ROI.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Union

import numpy as np
import scipy.ndimage

from svct.errors import GeometryMismatchError
from svct.geometry import roi_mask
from svct.models import Image, MetricReport, MetricSummary

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 99.0
SSIM_SIGMA = 1.5
# truncate * sigma = 5 pixels each side: an 11 x 11 window
SSIM_TRUNCATE = 3.5

Grid = Union[Image, np.ndarray]


def _pixels(value: Grid) -> np.ndarray:
    return value.pixels if isinstance(value, Image) else np.asarray(value, dtype=np.float64)


def _pair(pred: Grid, target: Grid, roi: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, b = _pixels(pred), _pixels(target)
    if a.shape != b.shape:
        raise GeometryMismatchError(f"metric inputs differ in size: {a.shape} vs {b.shape}")
    if roi:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GeometryMismatchError(f"circular ROI needs a square image, got {a.shape}; use roi=False")
        mask = roi_mask(a.shape[0])
    else:
        mask = np.ones(a.shape, dtype=bool)
    return a, b, mask


def psnr_roi(pred: Grid, target: Grid, data_range: float = 1.0, roi: bool = True) -> float:
    """10 log10(R^2 / MSE) over the ROI; identical inputs give the 99 dB cap."""
    a, b, mask = _pair(pred, target, roi)
    mse = float(np.mean((a[mask] - b[mask]) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(data_range**2 / mse), PSNR_CAP_DB)


def ssim_map(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> np.ndarray:
    """Local SSIM at every pixel, Gaussian-weighted statistics with reflected borders."""

    def blur(x: np.ndarray) -> np.ndarray:
        return scipy.ndimage.gaussian_filter(x, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return numerator / denominator


def ssim_roi(pred: Grid, target: Grid, data_range: float = 1.0, roi: bool = True) -> float:
    """Mean local SSIM over ROI pixels."""
    a, b, mask = _pair(pred, target, roi)
    return float(ssim_map(a, b, data_range)[mask].mean())


def evaluate_pair(case_id: str, method: str, pred: Grid, target: Grid, data_range: float = 1.0) -> MetricReport:
    size = _pixels(target).shape[0]
    return MetricReport(
        case_id=case_id,
        method=method,
        psnr_db=psnr_roi(pred, target, data_range),
        ssim=float(np.clip(ssim_roi(pred, target, data_range), -1.0, 1.0)),
        roi_radius=size / 2.0,
        data_range=data_range,
    )


def aggregate_reports(reports: Iterable[MetricReport]) -> list[MetricSummary]:
    """Mean and population standard deviation per method, in first-seen order."""
    grouped: dict[str, list[MetricReport]] = {}
    for report in reports:
        grouped.setdefault(report.method, []).append(report)
    summaries = []
    for method, rows in grouped.items():
        psnr = np.array([r.psnr_db for r in rows])
        ssim = np.array([r.ssim for r in rows])
        summaries.append(
            MetricSummary(
                method=method,
                count=len(rows),
                psnr_mean=float(psnr.mean()),
                psnr_std=float(psnr.std()),
                ssim_mean=float(ssim.mean()),
                ssim_std=float(ssim.std()),
            )
        )
    return summaries


def write_report_csv(rows: Iterable[MetricReport], path: Union[Path, str, None] = None, handle=None) -> None:
    """CSV rows case_id, method, psnr_db, ssim with a header line."""
    if handle is None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as out:
            write_report_csv(rows, handle=out)
        return
    writer = csv.writer(handle)
    writer.writerow(["case_id", "method", "psnr_db", "ssim"])
    for row in rows:
        writer.writerow([row.case_id, row.method, f"{row.psnr_db:.6f}", f"{row.ssim:.6f}"])


def write_summary_csv(summaries: Iterable[MetricSummary], handle) -> None:
    writer = csv.writer(handle)
    writer.writerow(["method", "count", "psnr_mean", "psnr_std", "ssim_mean", "ssim_std"])
    for s in summaries:
        writer.writerow([
            s.method, s.count, f"{s.psnr_mean:.4f}", f"{s.psnr_std:.4f}",
            f"{s.ssim_mean:.4f}", f"{s.ssim_std:.4f}",
        ])
