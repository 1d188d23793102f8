"""
The band-group network and where to put the upsamplers
======================================================

Four stages with groups of 1, 4, 8 and all bands. Each stage runs one
shared branch over every group and averages the outputs back by band.
Upsampling can happen in any stage; earlier upsampling costs FLOPs,
later upsampling costs parameters because the deeper stages are wider.
"""

import numpy as np
import torch

from specsplit.archsearch import cost_report, report_markdown, search_report
from specsplit.hypercube import HyperCube
from specsplit.ssanet import default_config, forward, init_params, split_bands

for g, o in [(1, 0), (4, 1), (8, 2), (33, 0)]:
    starts = [r.start for r in split_bands(33, g, o)]
    print(f"group {g:2d}, overlap {o}: {len(starts):2d} groups starting at {starts}")

# cost table for every x4 placement, 64x64 LR input
print(report_markdown(search_report(4)))

cfg = default_config(33, 4)
for row in cost_report(cfg, 64, 64).per_stage:
    print(row)

# a narrow version of the same layout runs quickly on a CPU
small = default_config(33, 2, n_ssrb=(1, 1, 1, 1), channels=(8, 8, 8, 8))
params = init_params(small, seed=0)
lr = HyperCube(np.random.default_rng(0).random((33, 12, 12)))
with torch.no_grad():
    sr = forward(lr, small, params)
print("in", lr.shape, "-> out", sr.shape)
