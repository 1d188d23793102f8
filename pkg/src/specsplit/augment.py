"""Training-set expansion by patch-wise self-representation and flipping.

A synthetic sample for cube ``i`` is built patch by patch: each patch is
replaced by a convex combination of the co-located patches of every other
cube, weighted by a Gaussian similarity whose bandwidth is ``sigma**2 * G``
(``G`` being the mean squared distance to the others). Small ``sigma``
copies the nearest neighbours, large ``sigma`` tends to the mean sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ShapeError
from .hypercube import HyperCube, hflip, patch_grid

DEFAULT_SIGMAS = (0.3, 1.0, 3.0)


@dataclass
class SynthesisConfig:
    sigma: float = 1.0
    patch_size: int = 8
    patch_overlap: int = 4
    sigmas: tuple = field(default=DEFAULT_SIGMAS)

    def __post_init__(self):
        if self.sigma <= 0 or any(s <= 0 for s in self.sigmas):
            raise ArgumentError("sigma values must be positive")
        if not 0 <= self.patch_overlap < self.patch_size:
            raise ArgumentError("need 0 <= patch_overlap < patch_size")
        self.sigmas = tuple(float(s) for s in self.sigmas)


def _sq_distances(target, others):
    target = np.asarray(target, dtype=np.float64).ravel()
    others = np.asarray([np.asarray(o, dtype=np.float64).ravel() for o in others])
    if others.size == 0 or others.shape[0] == 0:
        raise ArgumentError("at least one other patch is required")
    if others.shape[1] != target.size:
        raise ShapeError("patches differ in size")
    return np.sum((others - target) ** 2, axis=1)


def mean_sq_distance_G(target, others) -> float:
    """Mean squared Euclidean distance from ``target`` to each of ``others``."""
    return float(np.mean(_sq_distances(target, others)))


def _weights_from_d2(d2, sigma):
    g = d2.mean()
    if g == 0:
        return np.full(d2.shape, 1.0 / d2.size)
    logits = -d2 / (sigma * sigma * g)
    # shift by the max logit so tiny sigma does not underflow every term
    e = np.exp(logits - logits.max())
    return e / e.sum()


def similarity_weights(target, others, sigma: float) -> np.ndarray:
    """Normalised similarity weights, one per entry of ``others``."""
    if sigma <= 0:
        raise ArgumentError("sigma must be positive")
    return _weights_from_d2(_sq_distances(target, others), sigma)


def _stack(dataset):
    if len(dataset) < 2:
        raise ArgumentError("self-representation needs at least two samples")
    shapes = {c.data.shape for c in dataset}
    if len(shapes) != 1:
        raise ShapeError(f"samples differ in shape: {sorted(shapes)}")
    return np.stack([c.data for c in dataset])


def synthesize_sample(index: int, dataset, config: SynthesisConfig, sigma=None) -> HyperCube:
    """Synthesize a replacement for ``dataset[index]`` from the other samples.

    Overlapping reconstructed patches are averaged pixel-wise.
    """
    stack = _stack(dataset)
    n, bands, h, w = stack.shape
    if not 0 <= index < n:
        raise ArgumentError(f"index {index} out of range for {n} samples")
    sigma = config.sigma if sigma is None else sigma
    if sigma <= 0:
        raise ArgumentError("sigma must be positive")
    others = np.delete(stack, index, axis=0)
    target = stack[index]
    grid = patch_grid(h, w, config.patch_size, config.patch_overlap)
    p = config.patch_size

    acc = np.zeros((bands, h, w))
    count = np.zeros((h, w))
    for r, c in grid.origins:
        tp = target[:, r:r + p, c:c + p]
        op = others[:, :, r:r + p, c:c + p]
        d2 = np.sum((op - tp) ** 2, axis=(1, 2, 3))
        wts = _weights_from_d2(d2, sigma)
        acc[:, r:r + p, c:c + p] += np.tensordot(wts, op, axes=1)
        count[r:r + p, c:c + p] += 1
    out = np.clip(acc / count, 0.0, 1.0)
    return dataset[index].with_data(out)


@dataclass(frozen=True)
class ProvenanceEntry:
    kind: str           # "original", "self" or "flip"
    source: int         # dataset index for original/self, output index for flip
    sigma: float = None

    def to_dict(self):
        d = {"kind": self.kind, "source": self.source}
        if self.kind == "self":
            d["sigma"] = self.sigma
        return d


def expand_dataset(dataset, config: SynthesisConfig, include_symmetry: bool = False):
    """Originals, then one synthetic sample per (index, sigma), then (optionally)
    the horizontal flip of everything so far.

    Returns ``(cubes, manifest)`` where ``manifest[k]`` describes ``cubes[k]``.
    """
    cubes = list(dataset)
    manifest = [ProvenanceEntry("original", i) for i in range(len(cubes))]
    if config.sigmas:
        if len(dataset) < 2:
            raise ArgumentError("self-representation needs at least two samples")
        for i in range(len(dataset)):
            for s in config.sigmas:
                cubes.append(synthesize_sample(i, dataset, config, sigma=s))
                manifest.append(ProvenanceEntry("self", i, s))
    if include_symmetry:
        n = len(cubes)
        for k in range(n):
            cubes.append(hflip(cubes[k]))
            manifest.append(ProvenanceEntry("flip", k))
    return cubes, manifest
