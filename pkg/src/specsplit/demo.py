"""End-to-end run over a seeded synthetic mini-dataset.

Generates cubes, records the sigma-vs-RMSE curve of self-representation,
expands the training set, trains a small network on bicubic-downsampled
pairs and scores it (and plain bicubic upsampling) on held-out subjects.
Every file written is a pure function of the seed.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np
import torch

from .augment import SynthesisConfig, expand_dataset, synthesize_sample
from .metrics import rmse
from .ssanet import default_config, save_params
from .synthetic import synthetic_dataset
from .trainer import TrainConfig, evaluate_bicubic, evaluate_model, format_reports, make_pairs, train

CURVE_SIGMAS = (0.1, 0.3, 1.0, 3.0, 10.0, 1e3)


def demo_config(bands=8, scale=2):
    return default_config(bands=bands, scale=scale, n_ssrb=(2, 2, 1, 1), channels=(8, 16, 16, 16))


def sigma_rmse_curve(cubes, config: SynthesisConfig, sigmas=CURVE_SIGMAS):
    """Mean over source cubes of RMSE(synthesized, source) for each sigma."""
    return [
        (s, float(np.mean([rmse(synthesize_sample(i, cubes, config, sigma=s), cubes[i]) for i in range(len(cubes))])))
        for s in sigmas
    ]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def run_demo(out_dir, seed=0, epochs=6, n_subjects=6, scale=2, quiet=True) -> dict:
    """Write the demo reports into ``out_dir``; returns ``{name: path}``."""
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(seed)
    cubes = synthetic_dataset(n_subjects, seed=seed)
    # one held-out subject (two sessions) for testing
    train_cubes, test_cubes = cubes[:-2], cubes[-2:]
    syn = SynthesisConfig(patch_size=8, patch_overlap=4)
    outputs = {}

    curve = sigma_rmse_curve(train_cubes, syn)
    outputs["sigma_rmse"] = os.path.join(out_dir, "sigma_rmse.csv")
    _write_csv(outputs["sigma_rmse"], ["sigma", "rmse"], [(repr(s), f"{r:.10f}") for s, r in curve])

    expanded, provenance = expand_dataset(train_cubes, syn, include_symmetry=True)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(expanded))
    n_val = max(1, len(expanded) // 10)
    val_idx, train_idx = sorted(order[:n_val]), sorted(order[n_val:])
    pairs = make_pairs(expanded, scale)
    test_pairs = make_pairs(test_cubes, scale)

    config = demo_config(train_cubes[0].bands, scale)
    tconfig = TrainConfig(epochs=epochs, batch_size=4, seed=seed)
    params, log = train(config, tconfig, [pairs[i] for i in train_idx], [pairs[i] for i in val_idx])

    outputs["loss_curve"] = os.path.join(out_dir, "loss_curve.csv")
    _write_csv(outputs["loss_curve"], ["epoch", "step", "loss"], [(e, s, f"{l:.10f}") for e, s, l in log.step_losses])
    outputs["train_log"] = os.path.join(out_dir, "train_log.jsonl")
    with open(outputs["train_log"], "w") as fh:
        fh.write(log.to_jsonl())

    mean_rep, per_image = evaluate_model(params, config, test_pairs)
    base_rep, base_images = evaluate_bicubic(test_pairs, scale)
    outputs["metrics"] = os.path.join(out_dir, "metrics.json")
    with open(outputs["metrics"], "w") as fh:
        json.dump({
            "scale": scale,
            "ssanet": {"mean": mean_rep.to_dict(), "per_image": [r.to_dict() for r in per_image]},
            "bicubic": {"mean": base_rep.to_dict(), "per_image": [r.to_dict() for r in base_images]},
        }, fh, indent=2)
    table = format_reports([("SSANet", mean_rep), ("Bicubic", base_rep)])
    outputs["table"] = os.path.join(out_dir, "report.txt")
    with open(outputs["table"], "w") as fh:
        fh.write(table)

    outputs["augment_manifest"] = os.path.join(out_dir, "augment_manifest.json")
    with open(outputs["augment_manifest"], "w") as fh:
        json.dump([p.to_dict() for p in provenance], fh, indent=1)
    outputs["config"] = os.path.join(out_dir, "model.json")
    with open(outputs["config"], "w") as fh:
        fh.write(config.to_json(indent=2))
    outputs["checkpoint"] = os.path.join(out_dir, "model.ssap")
    save_params(params, outputs["checkpoint"], config)
    if not quiet:
        print(table, end="")
    return outputs
