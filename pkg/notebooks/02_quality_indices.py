"""
Six quality indices
===================

CC, SAM, RMSE, ERGAS, PSNR and SSIM of a reconstruction against its
reference. The best possible values are 1, 0, 0, 0, +inf and 1.
"""

import numpy as np

from specsplit.hypercube import bicubic_resample
from specsplit.metrics import MetricReport, evaluate_all
from specsplit.synthetic import synthetic_dataset

hr = synthetic_dataset(1, seed=3, sessions=1)[0]

print(MetricReport.header())
print(evaluate_all(hr, hr, 2).row())

# bicubic reconstructions get worse as the factor grows
for f in (2, 4, 8):
    sr = bicubic_resample(bicubic_resample(hr, f, "down"), f, "up")
    print(evaluate_all(sr, hr, f).row(), f"  (bicubic x{f})")

# additive noise degrades every index
rng = np.random.default_rng(0)
for sigma in (0.005, 0.02, 0.05):
    noisy = np.clip(hr.data + rng.normal(0, sigma, hr.data.shape), 0, 1)
    print(evaluate_all(noisy, hr.data, 2).row(), f"  (noise {sigma})")

# reports serialize to JSON; infinite PSNR becomes the string "inf"
print(evaluate_all(hr, hr, 2).to_json()[:120], "...")
