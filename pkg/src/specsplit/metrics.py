"""Picture quality indices for hyperspectral reconstructions.

All functions take ``(x, ref)`` where ``x`` is the reconstruction and
``ref`` the ground truth; both may be :class:`HyperCube` objects or raw
``(bands, height, width)`` arrays. Values are assumed to lie in [0, 1].
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError, UndefinedMetricError

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(x, ref):
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    b = np.asarray(getattr(ref, "data", ref), dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if b.ndim == 2:
        b = b[None]
    if a.shape != b.shape or a.ndim != 3:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def rmse(x, ref) -> float:
    a, b = _pair(x, ref)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def band_psnr(x, ref) -> np.ndarray:
    """PSNR of every band with peak 1; ``inf`` where the band is exact."""
    a, b = _pair(x, ref)
    mse = np.mean((a - b) ** 2, axis=(1, 2))
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(1.0 / mse)


def psnr(x, ref) -> float:
    return float(np.mean(band_psnr(x, ref)))


def cc(x, ref) -> float:
    """Mean over bands of the Pearson correlation.

    Bands whose reference is constant are skipped. A constant
    reconstruction band against a varying reference scores 0.
    """
    a, b = _pair(x, ref)
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    da = a - a.mean(axis=1, keepdims=True)
    db = b - b.mean(axis=1, keepdims=True)
    sa = np.sqrt(np.sum(da * da, axis=1))
    sb = np.sqrt(np.sum(db * db, axis=1))
    keep = sb > 0
    if not np.any(keep):
        raise UndefinedMetricError("CC undefined: every reference band is constant")
    if not np.all(keep):
        log.warning("CC: skipping %d constant reference band(s)", int(np.sum(~keep)))
    num = np.sum(da * db, axis=1)[keep]
    den = (sa * sb)[keep]
    r = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(np.mean(r))


def sam(x, ref) -> float:
    """Mean spectral angle in degrees, skipping zero-norm pixels."""
    a, b = _pair(x, ref)
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    keep = (na > 0) & (nb > 0)
    if not np.any(keep):
        raise UndefinedMetricError("SAM undefined: every pixel has a zero spectrum")
    ua = a[:, keep] / na[keep]
    ub = b[:, keep] / nb[keep]
    # half-angle form stays accurate near 0 where arccos(cos) does not
    angle = 2.0 * np.arctan2(np.linalg.norm(ua - ub, axis=0), np.linalg.norm(ua + ub, axis=0))
    return float(np.degrees(np.mean(angle)))


def ergas(x, ref, r) -> float:
    a, b = _pair(x, ref)
    mu = b.mean(axis=(1, 2))
    if np.any(mu == 0):
        raise UndefinedMetricError("ERGAS undefined: a reference band has zero mean")
    rmse_b = np.sqrt(np.mean((a - b) ** 2, axis=(1, 2)))
    return float(100.0 / r * np.sqrt(np.mean((rmse_b / mu) ** 2)))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA) -> np.ndarray:
    t = np.arange(size) - (size - 1) / 2
    g = np.exp(-(t ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def band_ssim(x, ref, data_range=1.0) -> np.ndarray:
    """Single-scale SSIM per band (Gaussian 11x11 window, valid region)."""
    a, b = _pair(x, ref)
    if min(a.shape[1:]) < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape[1:]}")
    w = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(img):
        win = sliding_window_view(img, w.shape, axis=(1, 2))
        return np.einsum("bijkl,kl->bij", win, w)

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    smap = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))
    return smap.mean(axis=(1, 2))


def ssim(x, ref) -> float:
    return float(np.mean(band_ssim(x, ref)))


@dataclass
class MetricReport:
    cc: float
    sam_deg: float
    rmse: float
    ergas: float
    psnr_db: float
    ssim: float
    per_band: Optional[dict] = field(default=None)

    FIELDS = ("cc", "sam_deg", "rmse", "ergas", "psnr_db", "ssim")

    def values(self) -> tuple:
        return tuple(getattr(self, k) for k in self.FIELDS)

    def to_dict(self) -> dict:
        d = asdict(self)
        d = {k: _jsonable(v) for k, v in d.items()}
        if d["per_band"] is None:
            del d["per_band"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, d) -> "MetricReport":
        kw = {k: float(d[k]) for k in cls.FIELDS}
        per_band = d.get("per_band")
        if per_band is not None:
            per_band = {k: [float(v) for v in vals] for k, vals in per_band.items()}
        return cls(per_band=per_band, **kw)

    def row(self) -> str:
        """Fixed-point table row, four decimals."""
        return "\t".join(_fmt(v) for v in self.values())

    @staticmethod
    def header() -> str:
        return "\t".join(["CC", "SAM", "RMSE", "ERGAS", "PSNR", "SSIM"])


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def _fmt(v) -> str:
    return "inf" if math.isinf(v) else f"{v:.4f}"


def evaluate_all(x, ref, r) -> MetricReport:
    """All six indices for one reconstruction, with per-band PSNR/SSIM."""
    bp = band_psnr(x, ref)
    bs = band_ssim(x, ref)
    return MetricReport(
        cc=cc(x, ref),
        sam_deg=sam(x, ref),
        rmse=rmse(x, ref),
        ergas=ergas(x, ref, r),
        psnr_db=float(np.mean(bp)),
        ssim=float(np.mean(bs)),
        per_band={"psnr_db": [float(v) for v in bp], "ssim": [float(v) for v in bs]},
    )


def mean_report(reports) -> MetricReport:
    """Arithmetic mean of each index; non-finite PSNR entries are excluded
    unless every entry is non-finite."""
    if not reports:
        raise ValueError("no reports to average")
    out = {}
    for k in MetricReport.FIELDS:
        vals = np.array([getattr(r, k) for r in reports], dtype=np.float64)
        finite = vals[np.isfinite(vals)]
        out[k] = float(finite.mean()) if finite.size else float(vals[0])
    return MetricReport(**out)
