"""Hyperspectral cube data model, HSC1 container I/O and spatial operations.

Cubes are stored band-major: ``data[band, row, col]``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, DataError, FormatError, ShapeError, TruncationError

MAGIC = b"HSC1"
HEADER_TERMINATOR = b"\n"

__all__ = [
    "HyperCube",
    "PatchGrid",
    "read_cube",
    "write_cube",
    "import_band_stack",
    "bicubic_resample",
    "bicubic_matrix",
    "keys_kernel",
    "patch_grid",
    "axis_origins",
    "extract_patches",
    "hflip",
    "normalize",
]


@dataclass(eq=False)
class HyperCube:
    """An H x W x B reflectance cube.

    Parameters
    ----------
    data : array_like, shape (bands, height, width)
        Real values, converted to float64.
    wavelengths_nm : sequence of float, optional
        Band centre wavelengths; must be strictly increasing.
    """

    data: np.ndarray
    wavelengths_nm: Optional[list] = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ShapeError(f"cube data must be a non-empty (bands, height, width) array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("cube contains non-finite values")
        self.data = data
        if self.wavelengths_nm is not None:
            wl = [float(w) for w in self.wavelengths_nm]
            if len(wl) != data.shape[0]:
                raise ShapeError(f"{len(wl)} wavelengths given for {data.shape[0]} bands")
            if any(b <= a for a, b in zip(wl, wl[1:])):
                raise DataError("wavelengths must be strictly increasing")
            self.wavelengths_nm = wl

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        """(height, width, bands)"""
        return (self.height, self.width, self.bands)

    def with_data(self, data) -> "HyperCube":
        """New cube sharing this cube's wavelengths."""
        return HyperCube(data, self.wavelengths_nm)

    def __repr__(self):
        return f"HyperCube(height={self.height}, width={self.width}, bands={self.bands})"


@dataclass(frozen=True)
class PatchGrid:
    patch_size: int
    stride: int
    origins: tuple


# ---------------------------------------------------------------------------
# HSC1 container

def write_cube(cube: HyperCube, path) -> None:
    """Write ``cube`` as an HSC1 container.

    Values are stored as little-endian float32, so the round trip is exact
    for any cube whose values are float32-representable (every cube that
    came from :func:`read_cube` or :func:`import_band_stack`).
    """
    if not np.all(np.isfinite(cube.data)):
        raise DataError("refusing to write a cube with non-finite values")
    header = {"height": cube.height, "width": cube.width, "bands": cube.bands, "dtype": "f32le"}
    if cube.wavelengths_nm is not None:
        header["wavelengths_nm"] = list(cube.wavelengths_nm)
    line = json.dumps(header, separators=(",", ":")).encode("utf-8")
    payload = np.ascontiguousarray(cube.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n" + line + HEADER_TERMINATOR + payload)


def read_cube(path) -> HyperCube:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC or raw[4:5] != b"\n":
        raise FormatError(f"{path}: not an HSC1 container")
    end = raw.find(HEADER_TERMINATOR, 5)
    if end < 0:
        raise FormatError(f"{path}: unterminated header")
    try:
        header = json.loads(raw[5:end].decode("utf-8"))
        h, w, b = int(header["height"]), int(header["width"]), int(header["bands"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from exc
    if header.get("dtype", "f32le") != "f32le":
        raise FormatError(f"{path}: unsupported dtype {header['dtype']!r}")
    if min(h, w, b) < 1:
        raise FormatError(f"{path}: non-positive dimensions in header")
    payload = raw[end + 1:]
    expected = 4 * h * w * b
    if len(payload) != expected:
        raise TruncationError(f"{path}: payload has {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(b, h, w)
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: payload contains non-finite values")
    return HyperCube(data.astype(np.float64), header.get("wavelengths_nm"))


def import_band_stack(paths: Sequence, wavelengths_nm=None) -> HyperCube:
    """Stack single-band grayscale images (8- or 16-bit) into a cube.

    Each band is scaled to [0, 1] by its bit depth.
    """
    from PIL import Image

    if len(paths) == 0:
        raise ArgumentError("at least one band image is required")
    planes = []
    for p in paths:
        with Image.open(p) as im:
            mode = im.mode
            if mode == "L":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            else:
                raise FormatError(f"{p}: expected 8/16-bit grayscale, got mode {mode}")
        if planes and arr.shape != planes[0].shape:
            raise ShapeError(f"{p}: size {arr.shape} differs from {planes[0].shape}")
        planes.append(arr)
    return HyperCube(np.stack(planes), wavelengths_nm)


# ---------------------------------------------------------------------------
# bicubic resampling

def keys_kernel(x, a=-0.5):
    """Keys cubic convolution kernel."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def bicubic_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Resampling matrix ``M`` (n_out x n_in) such that ``out = M @ signal``.

    Pixel centres are aligned, indices beyond the border are clamped and
    the kernel is widened by the reduction factor when shrinking.
    """
    scale = n_out / n_in
    stretch = min(scale, 1.0)
    width = 4.0 / stretch
    taps = int(math.ceil(width)) + 2
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        u = (i + 0.5) / scale - 0.5
        left = int(math.floor(u - width / 2))
        j = left + np.arange(taps)
        w = stretch * keys_kernel(stretch * (u - j))
        w /= w.sum()
        np.add.at(m[i], np.clip(j, 0, n_in - 1), w)
    return m


def bicubic_resample(cube: HyperCube, factor, direction: str = "down") -> HyperCube:
    """Resample every band with the Keys (a=-0.5) kernel and clip to [0, 1]."""
    if direction not in ("up", "down"):
        raise ArgumentError(f"direction must be 'up' or 'down', got {direction!r}")
    f = Fraction(factor).limit_denominator(1000)
    if f <= 0:
        raise ArgumentError("factor must be positive")
    if direction == "down":
        if f not in (2, 4, 8):
            raise ArgumentError(f"downsampling factor must be 2, 4 or 8, got {factor}")
        if cube.height % f or cube.width % f:
            raise ShapeError(f"{cube.height}x{cube.width} is not divisible by {factor}")
        f = 1 / f
    h_out, w_out = cube.height * f, cube.width * f
    if h_out.denominator != 1 or w_out.denominator != 1:
        raise ShapeError(f"factor {factor} does not give integral dimensions")
    mh = bicubic_matrix(cube.height, int(h_out))
    mw = bicubic_matrix(cube.width, int(w_out))
    out = np.einsum("ih,bhw,jw->bij", mh, cube.data, mw, optimize=True)
    return cube.with_data(np.clip(out, 0.0, 1.0))


# ---------------------------------------------------------------------------
# patches and simple transforms

def axis_origins(extent: int, patch_size: int, stride: int) -> list:
    """Origins 0, s, 2s, ... plus a final origin clamped to ``extent - patch_size``."""
    if patch_size > extent:
        raise ShapeError(f"patch size {patch_size} exceeds extent {extent}")
    origins = list(range(0, extent - patch_size + 1, stride))
    if origins[-1] + patch_size < extent:
        origins.append(extent - patch_size)
    return origins


def patch_grid(height: int, width: int, patch_size: int, overlap: int) -> PatchGrid:
    if patch_size < 1 or not 0 <= overlap < patch_size:
        raise ArgumentError(f"need 0 <= overlap < patch_size, got overlap={overlap}, size={patch_size}")
    stride = patch_size - overlap
    rows = axis_origins(height, patch_size, stride)
    cols = axis_origins(width, patch_size, stride)
    return PatchGrid(patch_size, stride, tuple((r, c) for r in rows for c in cols))


def extract_patches(cube: HyperCube, patch_size: int, overlap: int) -> list:
    grid = patch_grid(cube.height, cube.width, patch_size, overlap)
    p = patch_size
    return [cube.with_data(cube.data[:, r:r + p, c:c + p].copy()) for r, c in grid.origins]


def hflip(cube: HyperCube) -> HyperCube:
    return cube.with_data(cube.data[:, :, ::-1].copy())


def normalize(cube: HyperCube) -> HyperCube:
    """Scale so the maximum is 1 and clamp negatives to 0.

    An all-zero (or all-nonpositive) cube is returned unchanged.
    """
    peak = cube.data.max()
    if peak <= 0:
        return cube
    return cube.with_data(np.clip(cube.data / peak, 0.0, None))


def list_cubes(directory) -> list:
    """Sorted ``.hsc`` paths inside ``directory``."""
    return sorted(os.path.join(directory, f) for f in os.listdir(directory) if f.endswith(".hsc"))
