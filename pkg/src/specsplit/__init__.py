"""Hyperspectral super-resolution by spectral splitting and aggregation.

Subpackages
-----------
hypercube : cube container, HSC1 I/O, bicubic degradation, patches
metrics : CC, SAM, RMSE, ERGAS, PSNR, SSIM
augment : self-representation synthesis and flip expansion
ssanet : the band-group network (torch)
archsearch : upsampler placement enumeration and cost model
trainer : Adam training loop and evaluation
"""

__version__ = "0.1.0"

from .hypercube import HyperCube, read_cube, write_cube, bicubic_resample  # noqa: E402
from .metrics import MetricReport, evaluate_all  # noqa: E402
