"""Spectral splitting and aggregation network.

The network is four stages. Each stage cuts the current cube into
(possibly overlapping) contiguous band groups, runs every group through one
shared branch network (head conv, residual blocks, optional sub-pixel
upsampler, 1x1 tail back to the group's band count) and averages the group
outputs back together by band index. A final 3x3 conv follows the last
stage, optionally plus a bicubic upsampling of the input.

Parameters live in a plain ``dict`` of tensors (a *ParamSet*) so they can
be handed directly to an optimizer or to ``torch.autograd``.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ArgumentError, FormatError, ShapeError, TruncationError
from .hypercube import HyperCube, bicubic_matrix, bicubic_resample

DEFAULT_PLACEMENTS = {2: (1, 2, 1, 1), 4: (1, 2, 1, 2), 8: (2, 1, 2, 2)}
DEFAULT_N_SSRB = (12, 8, 4, 2)
DEFAULT_CHANNELS = (64, 128, 128, 192)
UP_FACTORS = (1, 2, 4, 8)
CHECKPOINT_MAGIC = b"SSAP"


@dataclass(frozen=True)
class StageConfig:
    group_size: int
    overlap: int
    n_ssrb: int
    channels: int
    up_factor: int = 1

    def __post_init__(self):
        if self.group_size < 1 or self.n_ssrb < 1 or self.channels < 1:
            raise ArgumentError(f"stage sizes must be positive: {self}")
        if not 0 <= self.overlap < self.group_size:
            raise ArgumentError(f"need 0 <= overlap < group_size: {self}")
        if self.up_factor not in UP_FACTORS:
            raise ArgumentError(f"up_factor must be one of {UP_FACTORS}: {self}")


@dataclass(frozen=True)
class SSANetConfig:
    bands: int
    stages: tuple
    scale: int
    global_skip: bool = True

    def __post_init__(self):
        stages = tuple(s if isinstance(s, StageConfig) else StageConfig(**s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        if len(stages) != 4:
            raise ArgumentError(f"exactly 4 stages required, got {len(stages)}")
        if self.scale not in (2, 4, 8):
            raise ArgumentError(f"scale must be 2, 4 or 8, got {self.scale}")
        if math.prod(s.up_factor for s in stages) != self.scale:
            raise ArgumentError(f"stage up factors {self.placement} do not multiply to {self.scale}")
        if any(s.group_size > self.bands for s in stages):
            raise ArgumentError("a group is wider than the cube")
        if stages[-1].group_size != self.bands:
            raise ArgumentError("the last stage must take all bands as one group")

    @property
    def placement(self) -> tuple:
        return tuple(s.up_factor for s in self.stages)

    def with_placement(self, up) -> "SSANetConfig":
        up = tuple(up)
        stages = tuple(replace(s, up_factor=u) for s, u in zip(self.stages, up))
        return replace(self, stages=stages, scale=math.prod(up))

    def to_dict(self) -> dict:
        return {
            "bands": self.bands,
            "scale": self.scale,
            "global_skip": self.global_skip,
            "stages": [asdict(s) for s in self.stages],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d) -> "SSANetConfig":
        return cls(
            bands=int(d["bands"]),
            stages=tuple(StageConfig(**s) for s in d["stages"]),
            scale=int(d["scale"]),
            global_skip=bool(d.get("global_skip", True)),
        )


def default_overlap(group_size: int, bands: int) -> int:
    if group_size >= bands or group_size == 1:
        return 0
    return {4: 1, 8: 2}.get(group_size, group_size // 4)


def default_config(bands=33, scale=2, placement=None, group_sizes=(1, 4, 8, None),
                   n_ssrb=DEFAULT_N_SSRB, channels=DEFAULT_CHANNELS, global_skip=True) -> SSANetConfig:
    """The published layout: groups of 1, 4, 8 and all bands."""
    placement = DEFAULT_PLACEMENTS[scale] if placement is None else tuple(placement)
    sizes = [min(g, bands) if g is not None else bands for g in group_sizes]
    stages = tuple(
        StageConfig(g, default_overlap(g, bands), n, c, u)
        for g, n, c, u in zip(sizes, n_ssrb, channels, placement)
    )
    return SSANetConfig(bands, stages, math.prod(placement), global_skip)


def miniature_config(scale=2, placement=None) -> SSANetConfig:
    """Four bands, groups (1, 2, 4, 4), one block and four channels per stage."""
    placement = {2: (1, 2, 1, 1), 4: (1, 2, 1, 2), 8: (2, 1, 2, 2)}[scale] if placement is None else placement
    stages = (
        StageConfig(1, 0, 1, 4, placement[0]),
        StageConfig(2, 1, 1, 4, placement[1]),
        StageConfig(4, 0, 1, 4, placement[2]),
        StageConfig(4, 0, 1, 4, placement[3]),
    )
    return SSANetConfig(4, stages, math.prod(placement))


# ---------------------------------------------------------------------------
# band splitting and aggregation

def split_bands(bands: int, group_size: int, overlap: int) -> list:
    """Contiguous ``range`` objects covering ``0..bands-1``.

    Groups start every ``group_size - overlap`` bands; if that leaves the top
    bands uncovered a final group ending at the last band is appended.
    """
    if not 0 <= overlap < group_size <= bands:
        raise ArgumentError(f"need 0 <= overlap < group_size <= bands, got {overlap}, {group_size}, {bands}")
    stride = group_size - overlap
    starts = list(range(0, bands - group_size + 1, stride))
    if starts[-1] + group_size < bands:
        starts.append(bands - group_size)
    return [range(s, s + group_size) for s in starts]


def aggregate(group_outputs, ranges, bands: int):
    """Per-band mean over every group output covering that band.

    Contributions are summed in ascending range order whatever order they
    arrive in, so the result does not depend on processing order.
    """
    if len(group_outputs) != len(ranges):
        raise ShapeError("one output per band range is required")
    pairs = sorted(zip(ranges, group_outputs), key=lambda p: (p[0].start, p[0].stop))
    first = pairs[0][1]
    band_axis = first.dim() - 3
    shape = list(first.shape)
    shape[band_axis] = bands
    total = first.new_zeros(shape)
    count = [0] * bands
    for rng, out in pairs:
        if out.shape[band_axis] != len(rng):
            raise ShapeError(f"group output has {out.shape[band_axis]} bands for range {rng}")
        idx = [slice(None)] * len(shape)
        idx[band_axis] = slice(rng.start, rng.stop)
        total[tuple(idx)] = total[tuple(idx)] + out
        for b in rng:
            count[b] += 1
    if min(count) == 0:
        raise RuntimeError(f"bands {[b for b, c in enumerate(count) if c == 0]} not covered by any group")
    view = [1] * len(shape)
    view[band_axis] = bands
    return total / torch.tensor(count, dtype=total.dtype).reshape(view)


# ---------------------------------------------------------------------------
# parameters

def _stage_tensor_shapes(stage: StageConfig):
    g, c, u = stage.group_size, stage.channels, stage.up_factor
    shapes = [("head.weight", (c, g, 3, 3)), ("head.bias", (c,))]
    for j in range(stage.n_ssrb):
        shapes += [
            (f"ssrb{j}.conv3.weight", (c, c, 3, 3)), (f"ssrb{j}.conv3.bias", (c,)),
            (f"ssrb{j}.conv1.weight", (c, c, 1, 1)), (f"ssrb{j}.conv1.bias", (c,)),
        ]
    if u > 1:
        shapes += [("up.weight", (c * u * u, c, 3, 3)), ("up.bias", (c * u * u,))]
    shapes += [("tail.weight", (g, c, 1, 1)), ("tail.bias", (g,))]
    return shapes


def param_shapes(config: SSANetConfig) -> "OrderedDict[str, tuple]":
    """Name -> shape for every tensor of the network, in checkpoint order."""
    out = OrderedDict()
    for k, stage in enumerate(config.stages, start=1):
        for name, shape in _stage_tensor_shapes(stage):
            out[f"stage{k}.{name}"] = shape
    b = config.bands
    out["final.weight"] = (b, b, 3, 3)
    out["final.bias"] = (b,)
    return out


def init_params(config: SSANetConfig, seed: int = 0, dtype=torch.float32) -> dict:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    gen = torch.Generator().manual_seed(int(seed))
    params = OrderedDict()
    for name, shape in param_shapes(config).items():
        if name.endswith(".bias"):
            params[name] = torch.zeros(shape, dtype=dtype)
        else:
            bound = 1.0 / math.sqrt(shape[1] * shape[2] * shape[3])
            u = torch.rand(shape, generator=gen, dtype=torch.float64)
            params[name] = ((2 * u - 1) * bound).to(dtype)
    return params


def count_tensor_scalars(params) -> int:
    return sum(int(t.numel()) for t in params.values())


def _sub(params, prefix):
    n = len(prefix) + 1
    return {k[n:]: v for k, v in params.items() if k.startswith(prefix + ".")}


# ---------------------------------------------------------------------------
# forward pieces

def _batched(fn):
    def wrapper(x, *args, **kw):
        if x.dim() == 3:
            return fn(x.unsqueeze(0), *args, **kw).squeeze(0)
        return fn(x, *args, **kw)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _conv(x, p, name, padding):
    w = p[name + ".weight"]
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"{name}: input has {x.shape[1]} channels, weights expect {w.shape[1]}")
    return F.conv2d(x, w, p[name + ".bias"], padding=padding)


@_batched
def ssrb_forward(x, block):
    """``x + conv1x1(relu(conv3x3(x)))``; ``block`` holds conv3.* and conv1.* tensors."""
    return x + _conv(F.relu(_conv(x, block, "conv3", 1)), block, "conv1", 0)


@_batched
def upsample(x, factor: int, block):
    """3x3 conv to ``C * factor**2`` channels, then sub-pixel rearrangement."""
    if factor not in (2, 4, 8):
        raise ArgumentError(f"upsampling factor must be 2, 4 or 8, got {factor}")
    w = block["weight"]
    if w.shape[0] != x.shape[1] * factor * factor:
        raise ShapeError(f"upsampler conv gives {w.shape[0]} channels, need {x.shape[1] * factor * factor}")
    return F.pixel_shuffle(F.conv2d(x, w, block["bias"], padding=1), factor)


@_batched
def branch_forward(x, stage: StageConfig, sp):
    """One branch: head, residual blocks, optional upsampler, 1x1 tail."""
    if x.shape[1] != stage.group_size:
        raise ShapeError(f"branch expects {stage.group_size} bands, got {x.shape[1]}")
    y = _conv(x, sp, "head", 1)
    for j in range(stage.n_ssrb):
        y = ssrb_forward(y, _sub(sp, f"ssrb{j}"))
    if stage.up_factor > 1:
        y = upsample(y, stage.up_factor, _sub(sp, "up"))
    return _conv(y, sp, "tail", 0)


def stage_forward(x, stage: StageConfig, sp, order=None):
    """Split ``x`` (N, B, h, w) into groups, run the shared branch, aggregate.

    All groups go through the branch as one batch. ``order`` permutes the
    sequence in which groups are stacked; the result does not depend on it.
    """
    n, bands = x.shape[:2]
    ranges = split_bands(bands, stage.group_size, stage.overlap)
    if order is not None:
        ranges = [ranges[i] for i in order]
    stacked = torch.cat([x[:, r.start:r.stop] for r in ranges], dim=0)
    y = branch_forward(stacked, stage, sp)
    return aggregate(list(torch.split(y, n, dim=0)), ranges, bands)


def bicubic_up_tensor(x, scale: int):
    """Bicubic upsampling of an (N, B, h, w) tensor, clipped to [0, 1]."""
    h, w = x.shape[-2:]
    mh = torch.from_numpy(bicubic_matrix(h, h * scale)).to(x.dtype)
    mw = torch.from_numpy(bicubic_matrix(w, w * scale)).to(x.dtype)
    return torch.clamp(mh @ x @ mw.T, 0.0, 1.0)


def forward_tensor(x, config: SSANetConfig, params, skip=None, orders=None):
    """Network output for a batch ``x`` of shape (N, B, h, w), unclipped.

    ``skip`` may carry a precomputed bicubic upsampling of ``x``.
    """
    if x.dim() != 4 or x.shape[1] != config.bands:
        raise ShapeError(f"expected (N, {config.bands}, h, w) input, got {tuple(x.shape)}")
    y = x
    for k, stage in enumerate(config.stages, start=1):
        order = None if orders is None else orders[k - 1]
        y = stage_forward(y, stage, _sub(params, f"stage{k}"), order=order)
    y = _conv(y, params, "final", 1)
    if config.global_skip:
        y = y + (bicubic_up_tensor(x, config.scale) if skip is None else skip)
    return y


def forward(lr: HyperCube, config: SSANetConfig, params) -> HyperCube:
    """Super-resolve one cube; the output is clipped to [0, 1]."""
    if lr.bands != config.bands:
        raise ShapeError(f"model expects {config.bands} bands, cube has {lr.bands}")
    dtype = next(iter(params.values())).dtype
    x = torch.from_numpy(lr.data).to(dtype).unsqueeze(0)
    skip = None
    if config.global_skip:
        skip = torch.from_numpy(bicubic_resample(lr, config.scale, "up").data).unsqueeze(0)
    with torch.no_grad():
        y = forward_tensor(x, config, params, skip=skip)
    return lr.with_data(torch.clamp(y.double(), 0.0, 1.0).squeeze(0).numpy())


# ---------------------------------------------------------------------------
# checkpoints

def save_params(params, path, config: SSANetConfig = None) -> None:
    """SSAP container: magic, JSON manifest line, float32 LE payloads in manifest order."""
    manifest = {"tensors": [{"name": k, "shape": list(v.shape)} for k, v in params.items()]}
    if config is not None:
        manifest["config"] = config.to_dict()
    line = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n" + line + b"\n")
        for v in params.values():
            fh.write(v.detach().cpu().numpy().astype("<f4").tobytes())


def load_params(path, dtype=torch.float32):
    """Returns ``(params, config_or_None)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != CHECKPOINT_MAGIC + b"\n":
        raise FormatError(f"{path}: not an SSAP checkpoint")
    end = raw.find(b"\n", 5)
    try:
        manifest = json.loads(raw[5:end].decode("utf-8"))
        entries = manifest["tensors"]
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: malformed manifest ({exc})") from exc
    payload = memoryview(raw)[end + 1:]
    need = sum(4 * math.prod(e["shape"]) for e in entries)
    if len(payload) != need:
        raise TruncationError(f"{path}: payload has {len(payload)} bytes, manifest implies {need}")
    params = OrderedDict()
    off = 0
    for e in entries:
        n = math.prod(e["shape"])
        arr = np.frombuffer(payload[off:off + 4 * n], dtype="<f4").reshape(e["shape"])
        params[e["name"]] = torch.from_numpy(arr.copy()).to(dtype)
        off += 4 * n
    config = manifest.get("config")
    return params, (SSANetConfig.from_dict(config) if config else None)
