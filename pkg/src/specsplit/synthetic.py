"""Seeded synthetic hyperspectral "faces" for demos and tests.

Each cube is a bright oval on a dark background with two eye blobs and a
mouth bar. Feature positions and sizes are drawn per subject; every subject
is imaged in several sessions that differ only in the illumination of the
subject, mimicking multi-session face databases. Every material has its
own smooth reflectance ramp over wavelength, and a faint sinusoidal texture
common to all cubes is added.
"""

import numpy as np

from .hypercube import HyperCube


def _blob(yy, xx, cy, cx, ry, rx):
    return np.exp(-(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2))


def random_subject(rng) -> dict:
    return {
        "skin_slope": rng.uniform(0.7, 1.3),
        "face_c": (0.5 + rng.normal(0, 0.03), 0.5 + rng.normal(0, 0.03)),
        "face_r": (0.42 + rng.normal(0, 0.02), 0.34 + rng.normal(0, 0.02)),
        "eye_d": tuple(rng.normal(0, 0.04, size=2)),
        "eye_spread": rng.uniform(0.15, 0.21),
        "mouth_c": (0.70 + rng.normal(0, 0.03), 0.5 + rng.normal(0, 0.03)),
        "mouth_w": rng.uniform(0.10, 0.16),
    }


def render_face(subject, height=32, width=32, bands=8, shift=(0.0, 0.0), gain=1.0,
                wl_start=400.0, wl_step=10.0) -> HyperCube:
    gy, gx = np.mgrid[0:height, 0:width].astype(np.float64)
    gy /= height - 1
    gx /= width - 1
    yy, xx = gy - shift[0], gx - shift[1]
    t = np.linspace(0.0, 1.0, bands)[:, None, None]

    skin_spec = 0.35 + 0.35 * t * subject["skin_slope"]
    eye_spec = 0.10 + 0.10 * t
    lip_spec = 0.25 + 0.40 * t ** 2
    bg_spec = 0.06 + 0.04 * (1 - t)

    face = _blob(yy, xx, *subject["face_c"], *subject["face_r"]) ** 2
    dy, dx = subject["eye_d"]
    s = subject["eye_spread"]
    eyes = _blob(yy, xx, 0.40 + dy, 0.5 - s + dx, 0.05, 0.07) + _blob(yy, xx, 0.40 + dy, 0.5 + s + dx, 0.05, 0.07)
    mouth = _blob(yy, xx, *subject["mouth_c"], 0.04, subject["mouth_w"])
    eyes = np.clip(eyes, 0, 1) * face
    mouth = np.clip(mouth, 0, 1) * face
    skin = face * (1 - eyes - mouth)

    cube = gain * (skin * skin_spec + eyes * eye_spec + mouth * lip_spec) + (1 - face) * bg_spec
    # texture is fixed to the sensor grid, not to the subject
    texture = 0.02 * np.sin(2 * np.pi * (3 * gx + 2 * gy))
    cube = np.clip(cube * (1 + texture), 0.0, 1.0)
    wl = [wl_start + wl_step * k for k in range(bands)]
    return HyperCube(cube, wl)


def synthetic_dataset(n_subjects, seed=0, sessions=2, height=32, width=32, bands=8) -> list:
    """``n_subjects * sessions`` cubes, grouped by subject."""
    rng = np.random.default_rng(seed)
    cubes = []
    for _ in range(n_subjects):
        subject = random_subject(rng)
        for _ in range(sessions):
            gain = 1.0 + rng.normal(0, 0.01)
            cubes.append(render_face(subject, height, width, bands, gain=gain))
    return cubes
