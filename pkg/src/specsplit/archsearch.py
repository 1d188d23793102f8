"""Exhaustive search over upsampler placements with an analytic cost model.

FLOPs are ``2 * MACs`` over convolutions only; activations, additions and
the bicubic skip are ignored.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

from .errors import ArgumentError
from .ssanet import SSANetConfig, default_config, split_bands

SCALES = (2, 4, 8)


@dataclass(frozen=True)
class Placement:
    up: tuple

    def __post_init__(self):
        if len(self.up) != 4 or any(u < 1 or u & (u - 1) for u in self.up):
            raise ArgumentError(f"placement must be four powers of two, got {self.up}")

    @property
    def scale(self) -> int:
        return math.prod(self.up)


@dataclass
class CostReport:
    params: int
    flops: int
    per_stage: list = field(default_factory=list)   # dicts with name, params, flops


def enumerate_placements(scale: int) -> list:
    """Every 4-tuple of powers of two whose product is ``scale``, sorted."""
    if scale not in SCALES:
        raise ArgumentError(f"scale must be one of {SCALES}, got {scale}")
    exps = int(math.log2(scale))
    out = []
    for combo in itertools.product(range(exps + 1), repeat=4):
        if sum(combo) == exps:
            out.append(Placement(tuple(2 ** e for e in combo)))
    return sorted(out, key=lambda p: p.up)


def _conv_params(cin, cout, k):
    return k * k * cin * cout + cout


def _conv_flops(h, w, cin, cout, k):
    return 2 * h * w * cin * cout * k * k


def cost_report(config: SSANetConfig, lr_h: int, lr_w: int) -> CostReport:
    """Parameter and FLOP counts, with a per-stage breakdown."""
    rows = []
    h, w = lr_h, lr_w
    for k, st in enumerate(config.stages, start=1):
        g, c, u, n = st.group_size, st.channels, st.up_factor, st.n_ssrb
        groups = len(split_bands(config.bands, g, st.overlap))
        params = _conv_params(g, c, 3) + n * (_conv_params(c, c, 3) + _conv_params(c, c, 1))
        flops = _conv_flops(h, w, g, c, 3) + n * (_conv_flops(h, w, c, c, 3) + _conv_flops(h, w, c, c, 1))
        if u > 1:
            params += _conv_params(c, c * u * u, 3)
            flops += _conv_flops(h, w, c, c * u * u, 3)
            h, w = h * u, w * u
        params += _conv_params(c, g, 1)
        flops += _conv_flops(h, w, c, g, 1)
        rows.append({"name": f"stage{k}", "groups": groups, "params": params, "flops": groups * flops})
    b = config.bands
    rows.append({"name": "final", "groups": 1, "params": _conv_params(b, b, 3), "flops": _conv_flops(h, w, b, b, 3)})
    return CostReport(
        params=sum(r["params"] for r in rows),
        flops=sum(r["flops"] for r in rows),
        per_stage=rows,
    )


def count_params(config: SSANetConfig) -> int:
    """Learnable scalars; each stage holds one copy shared by all its groups."""
    return cost_report(config, 1, 1).params


def count_flops(config: SSANetConfig, lr_h: int, lr_w: int) -> int:
    return cost_report(config, lr_h, lr_w).flops


def search_report(scale: int, base: SSANetConfig = None, lr_size=(64, 64)) -> list:
    """One row per placement: ``(placement, params, flops)``."""
    if base is None:
        base = default_config(33, scale)
    lr_h, lr_w = (lr_size, lr_size) if isinstance(lr_size, int) else lr_size
    rows = []
    for pl in enumerate_placements(scale):
        rep = cost_report(base.with_placement(pl.up), lr_h, lr_w)
        rows.append((pl, rep.params, rep.flops))
    return rows


def report_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["up1", "up2", "up3", "up4", "Paras", "FLOPs"])
    for pl, params, flops in rows:
        wr.writerow([*pl.up, params, flops])
    return buf.getvalue()


def report_markdown(rows) -> str:
    lines = ["| up1 | up2 | up3 | up4 | Paras (M) | FLOPs (G) |", "|---|---|---|---|---|---|"]
    for pl, params, flops in rows:
        lines.append("| " + " | ".join(str(u) for u in pl.up) + f" | {params / 1e6:.3f} | {flops / 1e9:.2f} |")
    return "\n".join(lines) + "\n"


def train_placements(scale: int, base: SSANetConfig, train_pairs, val_pairs, epochs=1, batch_size=4, lr0=1e-4,
                     seed=0) -> list:
    """Briefly train every placement; rows of ``(placement, params, val_psnr)``.

    Meant for comparing placements on real data; the costs alone do not
    say which placement reconstructs best.
    """
    from .trainer import TrainConfig, evaluate_model, train

    rows = []
    for pl in enumerate_placements(scale):
        config = base.with_placement(pl.up)
        tconfig = TrainConfig(lr0=lr0, epochs=epochs, batch_size=batch_size, seed=seed)
        params, _ = train(config, tconfig, train_pairs)
        rows.append((pl, count_params(config), evaluate_model(params, config, val_pairs)[0].psnr_db))
    return rows
