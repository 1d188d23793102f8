"""Training loop, learning-rate schedule and model evaluation."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ArgumentError, DivergenceError, ShapeError
from .hypercube import HyperCube, bicubic_resample
from .metrics import MetricReport, evaluate_all, mean_report
from .ssanet import SSANetConfig, forward, forward_tensor, init_params


@dataclass
class TrainConfig:
    lr0: float = 1e-4
    decay_factor: float = 0.1
    decay_every: int = 30
    epochs: int = 60
    batch_size: int = 4
    loss: str = "L1"
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    val_every: int = 1

    def __post_init__(self):
        if self.lr0 <= 0 or self.decay_factor <= 0 or self.decay_every < 1:
            raise ArgumentError("learning-rate settings must be positive")
        if self.batch_size < 1 or self.epochs < 0 or self.val_every < 1:
            raise ArgumentError("batch_size and val_every must be positive, epochs non-negative")
        if self.loss not in ("L1", "L2"):
            raise ArgumentError(f"loss must be 'L1' or 'L2', got {self.loss!r}")


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Step decay: ``lr0 * decay_factor ** (epoch // decay_every)``."""
    return config.lr0 * config.decay_factor ** (epoch // config.decay_every)


@dataclass
class TrainLog:
    step_losses: list = field(default_factory=list)      # (epoch, step, loss)
    epoch_reports: list = field(default_factory=list)    # (epoch, MetricReport)
    lr_trace: list = field(default_factory=list)
    best_epoch: int = -1
    wall_clock: float = 0.0

    def to_jsonl(self) -> str:
        """One JSON object per line; wall-clock time is left out so logs of
        seeded runs compare equal."""
        lines = [json.dumps({"epoch": e, "step": s, "loss": l}) for e, s, l in self.step_losses]
        for (epoch, rep), lr in zip(self.epoch_reports, self._lr_for_reports()):
            lines.append(json.dumps({"epoch": epoch, "lr": lr, "val": rep.to_dict()}))
        return "\n".join(lines) + ("\n" if lines else "")

    def _lr_for_reports(self):
        return [self.lr_trace[e] for e, _ in self.epoch_reports]


def loss_fn(kind: str):
    return F.l1_loss if kind == "L1" else F.mse_loss


def _check_pairs(pairs, scale, bands):
    for lr, hr in pairs:
        if lr.bands != bands or hr.bands != bands:
            raise ShapeError(f"pair has {lr.bands}/{hr.bands} bands, model expects {bands}")
        if (lr.height * scale, lr.width * scale) != (hr.height, hr.width):
            raise ShapeError(f"LR {lr.height}x{lr.width} times {scale} does not match HR {hr.height}x{hr.width}")


def _as_batch(cubes, dtype):
    shapes = {c.data.shape for c in cubes}
    if len(shapes) != 1:
        raise ShapeError(f"cubes in one batch differ in shape: {sorted(shapes)}")
    return torch.from_numpy(np.stack([c.data for c in cubes])).to(dtype)


def make_pairs(hr_cubes, scale) -> list:
    """(LR, HR) pairs by bicubic downsampling."""
    return [(bicubic_resample(hr, scale, "down"), hr) for hr in hr_cubes]


def clone_params(params) -> dict:
    return {k: v.detach().clone() for k, v in params.items()}


def train(config: SSANetConfig, tconfig: TrainConfig, train_pairs, val_pairs=None, params=None):
    """Fit ``params`` (fresh from ``init_params`` if omitted) with Adam.

    Returns ``(best_params, log)`` where ``best_params`` had the highest mean
    validation PSNR seen (the final parameters if there is no validation set).
    """
    if not train_pairs:
        raise ArgumentError("at least one training pair is required")
    _check_pairs(train_pairs, config.scale, config.bands)
    if val_pairs:
        _check_pairs(val_pairs, config.scale, config.bands)
    if params is None:
        params = init_params(config, tconfig.seed)
    params = {k: v.detach().clone().requires_grad_(True) for k, v in params.items()}
    dtype = next(iter(params.values())).dtype
    criterion = loss_fn(tconfig.loss)

    lrs = [_as_batch([lr], dtype) for lr, _ in train_pairs]
    hrs = [_as_batch([hr], dtype) for _, hr in train_pairs]
    skips = [_as_batch([bicubic_resample(lr, config.scale, "up")], dtype) if config.global_skip else None
             for lr, _ in train_pairs]

    opt = torch.optim.Adam(list(params.values()), lr=tconfig.lr0, betas=tuple(tconfig.betas), eps=tconfig.eps)
    log = TrainLog()
    best = clone_params(params)
    best_psnr = -math.inf
    last_good = clone_params(params)
    t0 = time.perf_counter()
    n = len(train_pairs)
    step = 0
    for epoch in range(tconfig.epochs):
        lr_now = lr_schedule(epoch, tconfig)
        for group in opt.param_groups:
            group["lr"] = lr_now
        log.lr_trace.append(lr_now)
        order = np.random.default_rng([tconfig.seed, epoch]).permutation(n)
        for start in range(0, n, tconfig.batch_size):
            idx = order[start:start + tconfig.batch_size]
            x = torch.cat([lrs[i] for i in idx])
            y = torch.cat([hrs[i] for i in idx])
            skip = torch.cat([skips[i] for i in idx]) if config.global_skip else None
            opt.zero_grad()
            loss = criterion(forward_tensor(x, config, params, skip=skip), y)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, step {step}", checkpoint=last_good)
            loss.backward()
            opt.step()
            log.step_losses.append((epoch, step, value))
            last_good = clone_params(params)
            step += 1
        if val_pairs and ((epoch + 1) % tconfig.val_every == 0 or epoch == tconfig.epochs - 1):
            rep, _ = evaluate_model(params, config, val_pairs)
            log.epoch_reports.append((epoch, rep))
            if rep.psnr_db > best_psnr:
                best_psnr = rep.psnr_db
                best = clone_params(params)
                log.best_epoch = epoch
    if not val_pairs or log.best_epoch < 0:
        best = clone_params(params)
    log.wall_clock = time.perf_counter() - t0
    return best, log


def batch_loss(params, config: SSANetConfig, pairs, kind="L1") -> float:
    """Loss of ``params`` over ``pairs`` taken as one batch."""
    dtype = next(iter(params.values())).dtype
    x = _as_batch([lr for lr, _ in pairs], dtype)
    y = _as_batch([hr for _, hr in pairs], dtype)
    with torch.no_grad():
        return float(loss_fn(kind)(forward_tensor(x, config, params), y))


def evaluate_model(params, config: SSANetConfig, test_pairs):
    """Forward each LR cube (clipped output) and score it against its HR.

    Returns ``(mean_report, per_image_reports)``.
    """
    if not test_pairs:
        raise ArgumentError("at least one test pair is required")
    reports = [evaluate_all(forward(lr, config, params), hr, config.scale) for lr, hr in test_pairs]
    return mean_report(reports), reports


def evaluate_bicubic(test_pairs, scale):
    """Baseline: bicubic upsampling of each LR cube."""
    reports = [evaluate_all(bicubic_resample(lr, scale, "up"), hr, scale) for lr, hr in test_pairs]
    return mean_report(reports), reports


def format_reports(rows) -> str:
    """Tab-separated table; ``rows`` is a list of ``(label, MetricReport)``."""
    out = ["name\t" + MetricReport.header()]
    out += [f"{label}\t{rep.row()}" for label, rep in rows]
    return "\n".join(out) + "\n"
