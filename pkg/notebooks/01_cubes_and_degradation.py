"""
Hyperspectral cubes, the HSC1 container and bicubic degradation
================================================================

A cube is stored band-major, ``data[band, row, col]``, with values in [0, 1].
Low-resolution inputs are made by bicubic downsampling only.
"""

import os
import tempfile

import numpy as np

from specsplit.hypercube import (
    HyperCube, bicubic_resample, extract_patches, hflip, read_cube, write_cube,
)
from specsplit.synthetic import random_subject, render_face

# a synthetic face: 32x32 pixels, 8 bands from 400 nm in 10 nm steps
face = render_face(random_subject(np.random.default_rng(0)), 32, 32, bands=8)
print(face)
print("wavelengths:", face.wavelengths_nm)

# the container stores float32, so a cube read back from disk survives
# another write/read cycle bit for bit
tmp = tempfile.mkdtemp()
path = os.path.join(tmp, "face.hsc")
write_cube(face, path)
again = read_cube(path)
write_cube(again, path)
assert np.array_equal(read_cube(path).data, again.data)
with open(path, "rb") as fh:
    print(fh.read(5), fh.readline().decode().strip())

# x2, x4 and x8 degradations; constants stay constant
for f in (2, 4, 8):
    lr = bicubic_resample(face, f, "down")
    back = bicubic_resample(lr, f, "up")
    err = np.sqrt(np.mean((back.data - face.data) ** 2))
    print(f"x{f}: LR {lr.height}x{lr.width}, bicubic round trip RMSE {err:.4f}")

flat = HyperCube(np.full((2, 16, 16), 0.37))
print("constant after x4 down:", np.ptp(bicubic_resample(flat, 4, "down").data))

# training patches: 64x64 with 32 pixels overlap on a 512x512 image gives
# 15 x 15 patches; here a small version of the same rule
patches = extract_patches(face, 16, 8)
print(len(patches), "patches of", patches[0].height, "x", patches[0].width)

# mirroring is its own inverse
assert np.array_equal(hflip(hflip(face)).data, face.data)
