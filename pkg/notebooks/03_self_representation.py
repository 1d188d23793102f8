"""
Expanding a small training set
==============================

Each sample is rebuilt patch by patch from the other samples, weighted by a
Gaussian similarity with bandwidth sigma^2 * G. Small sigma copies the
nearest neighbour, large sigma drifts towards the mean face. Mirroring
doubles whatever set it is given.
"""

import numpy as np

from specsplit.augment import SynthesisConfig, expand_dataset, similarity_weights, synthesize_sample
from specsplit.demo import CURVE_SIGMAS
from specsplit.metrics import rmse
from specsplit.synthetic import synthetic_dataset

# the weights for a scalar toy problem: distances 1 and 4, G = 2.5
print("weights:", similarity_weights([0.0], [[1.0], [2.0]], 1.0))

faces = synthetic_dataset(4, seed=0)          # 4 subjects x 2 sessions
cfg = SynthesisConfig(patch_size=8, patch_overlap=4)

# distance to the source grows with sigma
print("sigma   RMSE to source   RMSE to mean of others")
mean_others = np.mean([f.data for f in faces[1:]], axis=0)
for s in CURVE_SIGMAS:
    syn = synthesize_sample(0, faces, cfg, sigma=s)
    print(f"{s:7g}   {rmse(syn, faces[0]):.5f}          {rmse(syn.data, mean_others):.5f}")

# originals + one sample per sigma + mirrors of everything
cfg = SynthesisConfig(patch_size=8, patch_overlap=4, sigmas=(0.3, 1.0, 3.0))
cubes, manifest = expand_dataset(faces, cfg, include_symmetry=True)
print(len(faces), "->", len(cubes), "cubes")
print([m.to_dict() for m in manifest[7:10]])
