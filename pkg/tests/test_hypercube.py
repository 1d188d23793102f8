import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from specsplit.errors import DataError, FormatError, ShapeError, TruncationError
from specsplit.hypercube import (
    HyperCube, axis_origins, bicubic_resample, extract_patches, hflip, import_band_stack,
    normalize, patch_grid, read_cube, write_cube,
)


def _keys(x, a=-0.5):
    x = abs(x)
    if x <= 1:
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1
    if x < 2:
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a
    return 0.0


def _resample_1d_oracle(signal, n_out):
    # direct kernel sum per output pixel; widened kernel when shrinking
    n_in = len(signal)
    scale = n_out / n_in
    s = min(scale, 1.0)
    out = []
    for i in range(n_out):
        u = (i + 0.5) / scale - 0.5
        lo, hi = math.floor(u - 2 / s) - 1, math.ceil(u + 2 / s) + 1
        acc = wsum = 0.0
        for j in range(lo, hi + 1):
            w = _keys(s * (u - j))
            acc += w * signal[min(max(j, 0), n_in - 1)]
            wsum += w
        out.append(acc / wsum)
    return np.array(out)


def _resample_oracle(band, h_out, w_out):
    rows = np.array([_resample_1d_oracle(r, w_out) for r in band])
    return np.array([_resample_1d_oracle(c, h_out) for c in rows.T]).T


# --- container -------------------------------------------------------------

f32_cubes = st.tuples(st.integers(1, 4), st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float32, s, elements=st.floats(0, 1, width=32)))


@settings(max_examples=60, deadline=None)
@given(f32_cubes, st.booleans())
def test_round_trip_is_bit_exact(tmp_path_factory, data, with_wl):
    path = tmp_path_factory.mktemp("rt") / "c.hsc"
    wl = [400.0 + 10 * k for k in range(data.shape[0])] if with_wl else None
    cube = HyperCube(data.astype(np.float64), wl)
    write_cube(cube, path)
    back = read_cube(path)
    assert back.data.tobytes() == cube.data.tobytes()
    assert back.wavelengths_nm == cube.wavelengths_nm


def test_container_layout(tmp_path):
    data = np.arange(12, dtype=np.float64).reshape(2, 2, 3) / 16
    write_cube(HyperCube(data), tmp_path / "c.hsc")
    raw = (tmp_path / "c.hsc").read_bytes()
    assert raw[:5] == b"HSC1\n"
    header, payload = raw[5:].split(b"\n", 1)
    assert header == b'{"height":2,"width":3,"bands":2,"dtype":"f32le"}'
    assert np.array_equal(np.frombuffer(payload, "<f4"), data.ravel().astype(np.float32))


def test_truncated_payload(tmp_path):
    cube = HyperCube(np.full((33, 4, 4), 0.5))
    path = tmp_path / "c.hsc"
    write_cube(cube, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4 * 16])          # drop one plane
    with pytest.raises(TruncationError):
        read_cube(path)


def test_bad_magic_and_header(tmp_path):
    p = tmp_path / "x.hsc"
    p.write_bytes(b"HSC2\n{}\n")
    with pytest.raises(FormatError):
        read_cube(p)
    p.write_bytes(b"HSC1\nnot json\n")
    with pytest.raises(FormatError):
        read_cube(p)


def test_nan_refused_before_writing(tmp_path):
    data = np.zeros((1, 2, 2))
    data[0, 0, 0] = np.nan
    with pytest.raises(DataError):
        HyperCube(data)
    # bypass construction checks to exercise the writer guard
    cube = HyperCube(np.zeros((1, 2, 2)))
    cube.data[0, 1, 1] = np.inf
    path = tmp_path / "bad.hsc"
    with pytest.raises(DataError):
        write_cube(cube, path)
    assert not path.exists()


def test_non_finite_payload(tmp_path):
    p = tmp_path / "nan.hsc"
    p.write_bytes(b'HSC1\n{"height":1,"width":1,"bands":1,"dtype":"f32le"}\n' + np.float32(np.nan).tobytes())
    with pytest.raises(DataError):
        read_cube(p)


def test_wavelengths_must_increase():
    with pytest.raises(ValueError):
        HyperCube(np.zeros((2, 1, 1)), [500.0, 400.0])
    with pytest.raises(ValueError):
        HyperCube(np.zeros((2, 1, 1)), [400.0])


# --- band stack import ------------------------------------------------------

def _png16(path, arr):
    Image.fromarray(arr.astype(np.uint16)).save(path)


def test_import_16bit_stack(tmp_path):
    paths = []
    for k in range(33):
        arr = np.full((10, 10), 1000 * k, dtype=np.uint16)
        arr[0, 0] = 65535
        paths.append(tmp_path / f"b{k:02d}.png")
        _png16(paths[-1], arr)
    cube = import_band_stack(paths)
    assert cube.shape == (10, 10, 33)
    assert cube.data[5, 0, 0] == 1.0
    assert cube.data[5, 1, 1] == pytest.approx(5000 / 65535, abs=1e-12)


def test_import_8bit(tmp_path):
    Image.fromarray(np.full((3, 4), 255, np.uint8)).save(tmp_path / "a.png")
    cube = import_band_stack([tmp_path / "a.png"])
    assert cube.shape == (3, 4, 1) and np.all(cube.data == 1.0)


def test_import_mixed_sizes(tmp_path):
    _png16(tmp_path / "a.png", np.zeros((4, 4)))
    _png16(tmp_path / "b.png", np.zeros((4, 5)))
    with pytest.raises(ShapeError):
        import_band_stack([tmp_path / "a.png", tmp_path / "b.png"])


def test_import_color_rejected(tmp_path):
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "rgb.png")
    with pytest.raises(FormatError):
        import_band_stack([tmp_path / "rgb.png"])


# --- bicubic ---------------------------------------------------------------

def test_constant_preserved_down4():
    cube = HyperCube(np.full((3, 16, 16), 0.37))
    out = bicubic_resample(cube, 4, "down")
    assert out.shape == (4, 4, 3)
    assert np.max(np.abs(out.data - 0.37)) < 1e-9


@pytest.mark.parametrize("factor", [2, 4, 8])
@pytest.mark.parametrize("direction", ["up", "down"])
def test_constant_preserved(factor, direction):
    cube = HyperCube(np.full((1, 16, 16), 0.6))
    assert np.max(np.abs(bicubic_resample(cube, factor, direction).data - 0.6)) < 1e-9


def test_ramp_matches_scalar_oracle():
    yy, xx = np.mgrid[0:8, 0:8]
    data = np.stack([(yy + xx) / 14.0, (2 * yy + xx) / 21.0])
    out = bicubic_resample(HyperCube(data), 2, "down")
    for b in range(2):
        expect = np.clip(_resample_oracle(data[b], 4, 4), 0, 1)
        assert np.max(np.abs(out.data[b] - expect)) < 1e-6


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("direction", ["up", "down"])
def test_random_band_matches_oracle(seed, direction):
    data = np.random.default_rng(seed).random((1, 8, 8))
    out = bicubic_resample(HyperCube(data), 2, direction)
    n = 4 if direction == "down" else 16
    assert np.max(np.abs(out.data[0] - np.clip(_resample_oracle(data[0], n, n), 0, 1))) < 1e-6


def test_downsample_rejects_indivisible():
    with pytest.raises(ShapeError):
        bicubic_resample(HyperCube(np.zeros((1, 10, 10))), 4, "down")


# --- patches and transforms ------------------------------------------------

def test_patch_count_512():
    grid = patch_grid(512, 512, 64, 32)
    assert grid.stride == 32
    assert len(grid.origins) == 225
    assert axis_origins(512, 64, 32) == list(range(0, 449, 32))


def test_patch_clamp_70():
    grid = patch_grid(70, 70, 64, 32)
    assert axis_origins(70, 64, 32) == [0, 6]
    assert len(grid.origins) == 4


def test_single_patch_is_cube():
    cube = HyperCube(np.random.default_rng(0).random((2, 8, 8)))
    (p,) = extract_patches(cube, 8, 4)
    assert np.array_equal(p.data, cube.data)


def test_patch_too_large():
    with pytest.raises(ShapeError):
        extract_patches(HyperCube(np.zeros((1, 4, 4))), 5, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(2, 30), st.data())
def test_patches_cover_every_pixel(h, w, data):
    size = data.draw(st.integers(1, min(h, w)))
    overlap = data.draw(st.integers(0, size - 1))
    grid = patch_grid(h, w, size, overlap)
    cover = np.zeros((h, w), int)
    for r, c in grid.origins:
        assert r + size <= h and c + size <= w
        cover[r:r + size, c:c + size] += 1
    assert cover.min() >= 1


def test_hflip():
    cube = HyperCube(np.array([[[0.1, 0.2]]]))
    assert np.array_equal(hflip(cube).data, [[[0.2, 0.1]]])
    sym = HyperCube(np.array([[[0.3, 0.5, 0.3]]]))
    assert np.array_equal(hflip(sym).data, sym.data)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 3, 5), elements=st.floats(0, 1)))
def test_hflip_involution(data):
    cube = HyperCube(data)
    assert np.array_equal(hflip(hflip(cube)).data, data)


def test_normalize():
    cube = HyperCube(np.array([[[0.25, 0.5]]]))
    assert np.array_equal(normalize(cube).data, [[[0.5, 1.0]]])
    zero = HyperCube(np.zeros((1, 2, 2)))
    assert np.array_equal(normalize(zero).data, zero.data)
