"""
Training on synthetic faces
===========================

The end-to-end path: synthesize a data set, expand it, train on bicubic
pairs with Adam and a step learning-rate schedule, then score against plain
bicubic upsampling on held-out subjects.
"""

import json
import os
import tempfile

import torch

from specsplit.demo import run_demo

torch.set_num_threads(1)

out = os.path.join(tempfile.mkdtemp(), "demo")
files = run_demo(out, seed=0, epochs=4, quiet=False)
for name, path in sorted(files.items()):
    print(f"{name:18s} {os.path.basename(path)}")

with open(files["sigma_rmse"]) as fh:
    print(fh.read())

with open(files["metrics"]) as fh:
    m = json.load(fh)
print("trained PSNR", m["ssanet"]["mean"]["psnr_db"], "bicubic PSNR", m["bicubic"]["mean"]["psnr_db"])
