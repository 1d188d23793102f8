import math

import numpy as np
import pytest
import torch

from specsplit.errors import ArgumentError, DivergenceError, ShapeError
from specsplit.hypercube import HyperCube
from specsplit.metrics import MetricReport
from specsplit.ssanet import init_params, miniature_config
from specsplit.synthetic import synthetic_dataset
from specsplit.trainer import (
    TrainConfig, batch_loss, evaluate_bicubic, evaluate_model, format_reports, lr_schedule,
    make_pairs, train,
)


@pytest.fixture(scope="module")
def pairs():
    return make_pairs(synthetic_dataset(4, seed=1, height=16, width=16, bands=4), 2)


def test_schedule_examples():
    cfg = TrainConfig()
    assert lr_schedule(0, cfg) == 1e-4
    assert lr_schedule(29, cfg) == 1e-4
    assert lr_schedule(30, cfg) == 1e-4 * 0.1
    assert lr_schedule(59, cfg) == 1e-4 * 0.1


@pytest.mark.parametrize("epochs", [1, 29, 30, 31, 60, 61, 95])
def test_schedule_plateaus(epochs):
    cfg = TrainConfig(epochs=epochs)
    trace = [lr_schedule(e, cfg) for e in range(epochs)]
    plateaus = 1 + sum(a != b for a, b in zip(trace, trace[1:]))
    assert plateaus == math.ceil(epochs / cfg.decay_every)


def test_config_validation():
    with pytest.raises(ArgumentError):
        TrainConfig(lr0=0)
    with pytest.raises(ArgumentError):
        TrainConfig(batch_size=0)
    with pytest.raises(ArgumentError):
        TrainConfig(loss="huber")


def test_zero_epochs_returns_initial(pairs):
    cfg = miniature_config(2)
    init = init_params(cfg, 3)
    out, log = train(cfg, TrainConfig(epochs=0, seed=3), pairs, pairs[:1])
    assert all(torch.equal(init[k], out[k]) for k in init)
    assert log.step_losses == [] and log.to_jsonl() == ""


def test_same_seed_same_trace(pairs):
    cfg = miniature_config(2)
    tc = TrainConfig(epochs=3, batch_size=3, seed=11, lr0=1e-3)
    p1, l1 = train(cfg, tc, pairs[:6], pairs[6:])
    p2, l2 = train(cfg, tc, pairs[:6], pairs[6:])
    assert l1.step_losses == l2.step_losses
    assert l1.to_jsonl() == l2.to_jsonl()
    assert all(torch.equal(p1[k], p2[k]) for k in p1)
    assert l1.lr_trace == [1e-3] * 3
    assert len(l1.step_losses) == 3 * 2


def test_zero_gradient_adam_step():
    p = init_params(miniature_config(2), 0)
    before = {k: v.clone() for k, v in p.items()}
    leaves = [v.requires_grad_(True) for v in p.values()]
    opt = torch.optim.Adam(leaves, lr=1e-4, eps=1e-8)
    for v in leaves:
        v.grad = torch.zeros_like(v)
    opt.step()
    assert all(torch.equal(before[k], p[k].detach()) for k in p)


@pytest.mark.parametrize("seed", range(10))
def test_small_step_decreases_loss(pairs, seed):
    cfg = miniature_config(2)
    init = init_params(cfg, seed)
    batch = pairs[:4]
    before = batch_loss(init, cfg, batch)
    after_params, log = train(cfg, TrainConfig(epochs=1, batch_size=4, lr0=1e-6, seed=seed), batch, params=init)
    assert log.step_losses[0][2] == pytest.approx(before, rel=1e-6)
    assert batch_loss(after_params, cfg, batch) < before


def test_shape_errors(pairs):
    cfg = miniature_config(2)
    bad = [(HyperCube(np.zeros((4, 8, 8))), HyperCube(np.zeros((4, 8, 8))))]
    with pytest.raises(ShapeError):
        train(cfg, TrainConfig(epochs=1), bad)
    with pytest.raises(ShapeError):
        train(cfg, TrainConfig(epochs=1), make_pairs([HyperCube(np.zeros((3, 8, 8)))], 2))
    with pytest.raises(ArgumentError):
        train(cfg, TrainConfig(epochs=1), [])


def test_divergence_keeps_checkpoint(pairs):
    cfg = miniature_config(2)
    with pytest.raises(DivergenceError) as info:
        train(cfg, TrainConfig(lr0=1e30, epochs=3, batch_size=2), pairs)
    ckpt = info.value.checkpoint
    assert ckpt is not None and set(ckpt) == set(init_params(cfg, 0))
    assert all(torch.isfinite(v).all() for v in ckpt.values())


def test_best_checkpoint_tracks_validation(pairs):
    cfg = miniature_config(2)
    params, log = train(cfg, TrainConfig(epochs=4, batch_size=2, lr0=1e-3), pairs[:6], pairs[6:])
    psnrs = [rep.psnr_db for _, rep in log.epoch_reports]
    assert log.best_epoch == int(np.argmax(psnrs))
    assert evaluate_model(params, cfg, pairs[6:])[0].psnr_db == pytest.approx(max(psnrs), abs=1e-9)


def test_identity_reconstruction_best_values(pairs):
    hr = pairs[0][1]
    rep, _ = evaluate_bicubic([(hr, hr)], 1)
    assert rep.values()[:5] == (1.0, 0.0, 0.0, 0.0, math.inf)


def test_mean_of_per_image(pairs):
    cfg = miniature_config(2)
    mean, per = evaluate_model(init_params(cfg, 0), cfg, pairs[:3])
    for k in MetricReport.FIELDS:
        assert getattr(mean, k) == pytest.approx(np.mean([getattr(r, k) for r in per]), abs=1e-12)
    text = format_reports([("a", mean)])
    assert text.splitlines()[1].startswith("a\t") and len(text.splitlines()[1].split("\t")) == 7


def test_trained_beats_bicubic(pairs):
    cfg = miniature_config(2)
    params, _ = train(cfg, TrainConfig(epochs=20, batch_size=2, lr0=1e-3), pairs[:6])
    trained = evaluate_model(params, cfg, pairs[6:])[0].psnr_db
    assert trained > evaluate_bicubic(pairs[6:], 2)[0].psnr_db
