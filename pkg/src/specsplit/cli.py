"""Command-line entry point.

Exit status: 0 success, 1 usage error, 2 data or format error, 3 numerical
divergence during training.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys

import numpy as np
import torch

from . import __version__
from .errors import ArgumentError, DivergenceError, SpecSplitError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
SUBCOMMANDS = ("import", "downsample", "augment", "train", "eval", "search", "metrics", "demo")

log = logging.getLogger("specsplit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--device", default="cpu", help="only 'cpu' is supported")

    p = _Parser(prog="specsplit", description="Hyperspectral super-resolution toolkit")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")

    s = sub.add_parser("import", parents=[common], help="stack grayscale band images into an .hsc cube")
    s.add_argument("images", nargs="+")
    s.add_argument("--out", required=True)
    s.add_argument("--wavelengths", type=_floats, help="start,step in nm")
    s.add_argument("--normalize", action="store_true")

    s = sub.add_parser("downsample", parents=[common], help="bicubic downsampling of a cube or directory")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--scale", type=int, choices=(2, 4, 8), required=True)

    s = sub.add_parser("augment", parents=[common], help="self-representation and flip expansion")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--sigmas", type=_floats, default=(0.3, 1.0, 3.0))
    s.add_argument("--patch", type=int, default=8)
    s.add_argument("--overlap", type=int, default=4)
    s.add_argument("--symmetry", action="store_true")

    s = sub.add_parser("train", parents=[common], help="train a model on a directory of HR cubes")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--scale", type=int, choices=(2, 4, 8), default=2)
    s.add_argument("--epochs", type=int, default=60)
    s.add_argument("--batch", type=int, default=4)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--loss", choices=("L1", "L2"), default="L1")
    s.add_argument("--patch", type=int, help="train on patches of this size")
    s.add_argument("--patch-overlap", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", parents=[common], help="score a checkpoint on a directory of HR cubes")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--out")

    s = sub.add_parser("search", parents=[common], help="cost table over upsampler placements")
    s.add_argument("--scale", type=int, choices=(2, 4, 8), required=True)
    s.add_argument("--bands", type=int, default=33)
    s.add_argument("--lr-size", type=int, default=64)
    s.add_argument("--out")

    s = sub.add_parser("metrics", parents=[common], help="six quality indices for a cube pair")
    s.add_argument("--a", required=True, help="reconstruction")
    s.add_argument("--b", required=True, help="reference")
    s.add_argument("--scale", type=int, choices=(2, 4, 8), required=True)
    s.add_argument("--json", action="store_true")
    s.add_argument("--out")

    s = sub.add_parser("demo", parents=[common], help="synthetic end-to-end run")
    s.add_argument("--out")
    s.add_argument("--epochs", type=int, default=6)
    return p


# ---------------------------------------------------------------------------
# subcommands; each returns (inputs, outputs, resolved) for the run manifest

def _cmd_import(a):
    from .hypercube import import_band_stack, normalize, write_cube

    wl = None
    if a.wavelengths:
        if len(a.wavelengths) != 2:
            raise ArgumentError("--wavelengths takes start,step")
        wl = [a.wavelengths[0] + k * a.wavelengths[1] for k in range(len(a.images))]
    cube = import_band_stack(a.images, wl)
    if a.normalize:
        cube = normalize(cube)
    write_cube(cube, a.out)
    _say(a, f"wrote {a.out}: {cube.height}x{cube.width}x{cube.bands}")
    return list(a.images), [a.out]


def _cmd_downsample(a):
    from .hypercube import bicubic_resample, list_cubes, read_cube, write_cube

    if os.path.isdir(a.inp):
        os.makedirs(a.out, exist_ok=True)
        srcs = list_cubes(a.inp)
        dsts = [os.path.join(a.out, os.path.basename(p)) for p in srcs]
    else:
        srcs, dsts = [a.inp], [a.out]
    for src, dst in zip(srcs, dsts):
        write_cube(bicubic_resample(read_cube(src), a.scale, "down"), dst)
    _say(a, f"downsampled {len(srcs)} cube(s) by {a.scale}")
    return srcs, dsts


def _cmd_augment(a):
    from .augment import SynthesisConfig, expand_dataset
    from .hypercube import list_cubes, read_cube, write_cube

    srcs = _require_cubes(a.inp)
    cubes = [read_cube(p) for p in srcs]
    cfg = SynthesisConfig(patch_size=a.patch, patch_overlap=a.overlap, sigmas=a.sigmas)
    expanded, provenance = expand_dataset(cubes, cfg, include_symmetry=a.symmetry)
    os.makedirs(a.out, exist_ok=True)
    outs = []
    for k, cube in enumerate(expanded):
        path = os.path.join(a.out, f"cube_{k:05d}.hsc")
        write_cube(cube, path)
        outs.append(path)
    manifest = [dict(p.to_dict(), file=os.path.basename(o)) for p, o in zip(provenance, outs)]
    for m in manifest:
        if m["kind"] != "flip":
            m["source_file"] = os.path.basename(srcs[m["source"]])
    mpath = os.path.join(a.out, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=1)
    _say(a, f"{len(cubes)} -> {len(expanded)} cubes in {a.out}")
    return srcs, outs + [mpath]


def _load_config(path, bands, scale):
    from .ssanet import SSANetConfig, default_config

    if path:
        with open(path) as fh:
            return SSANetConfig.from_dict(json.load(fh))
    return default_config(bands=bands, scale=scale)


def _cmd_train(a):
    from .hypercube import extract_patches, read_cube
    from .ssanet import save_params
    from .trainer import TrainConfig, make_pairs, train

    srcs = _require_cubes(a.data)
    cubes = [read_cube(p) for p in srcs]
    config = _load_config(a.config, cubes[0].bands, a.scale)
    rng = np.random.default_rng(a.seed)
    order = rng.permutation(len(cubes))
    n_val = len(cubes) // 10 if len(cubes) >= 10 else (1 if len(cubes) > 1 else 0)
    val = [cubes[i] for i in sorted(order[:n_val])]
    trn = [cubes[i] for i in sorted(order[n_val:])]
    if a.patch:
        trn = [p for c in trn for p in extract_patches(c, a.patch, a.patch_overlap)]
    tconfig = TrainConfig(lr0=a.lr, epochs=a.epochs, batch_size=a.batch, loss=a.loss, seed=a.seed)
    os.makedirs(a.out, exist_ok=True)
    ckpt = os.path.join(a.out, "best.ssap")
    logpath = os.path.join(a.out, "train_log.jsonl")
    cfgpath = os.path.join(a.out, "model.json")
    with open(cfgpath, "w") as fh:
        fh.write(config.to_json(indent=2))
    try:
        params, tlog = train(config, tconfig, make_pairs(trn, config.scale), make_pairs(val, config.scale) or None)
    except DivergenceError as exc:
        if exc.checkpoint is not None:
            save_params(exc.checkpoint, ckpt, config)
        raise
    save_params(params, ckpt, config)
    with open(logpath, "w") as fh:
        fh.write(tlog.to_jsonl())
    _say(a, f"trained {len(tlog.step_losses)} steps; checkpoint {ckpt}")
    return srcs, [ckpt, logpath, cfgpath]


def _cmd_eval(a):
    from .hypercube import read_cube
    from .ssanet import SSANetConfig, load_params
    from .trainer import evaluate_bicubic, evaluate_model, format_reports, make_pairs

    params, config = load_params(a.ckpt)
    if a.config:
        with open(a.config) as fh:
            config = SSANetConfig.from_dict(json.load(fh))
    if config is None:
        raise ArgumentError("checkpoint carries no config; pass --config")
    srcs = _require_cubes(a.data)
    pairs = make_pairs([read_cube(p) for p in srcs], config.scale)
    mean_rep, per_image = evaluate_model(params, config, pairs)
    base_rep, _ = evaluate_bicubic(pairs, config.scale)
    rows = [(os.path.basename(p), r) for p, r in zip(srcs, per_image)]
    rows += [("mean", mean_rep), ("bicubic-mean", base_rep)]
    _say(a, format_reports(rows), end="")
    outs = []
    if a.out:
        os.makedirs(a.out, exist_ok=True)
        path = os.path.join(a.out, "reports.json")
        with open(path, "w") as fh:
            json.dump({"mean": mean_rep.to_dict(), "bicubic_mean": base_rep.to_dict(),
                       "per_image": {os.path.basename(p): r.to_dict() for p, r in zip(srcs, per_image)}},
                      fh, indent=2)
        outs.append(path)
    return [a.ckpt] + srcs, outs


def _cmd_search(a):
    from .archsearch import report_csv, report_markdown, search_report
    from .ssanet import default_config

    rows = search_report(a.scale, default_config(bands=a.bands, scale=a.scale), (a.lr_size, a.lr_size))
    md = report_markdown(rows)
    _say(a, md, end="")
    outs = []
    if a.out:
        os.makedirs(a.out, exist_ok=True)
        for name, text in (("search.csv", report_csv(rows)), ("search.md", md)):
            path = os.path.join(a.out, name)
            with open(path, "w") as fh:
                fh.write(text)
            outs.append(path)
    return [], outs


def _cmd_metrics(a):
    from .hypercube import read_cube
    from .metrics import MetricReport, evaluate_all

    rep = evaluate_all(read_cube(a.a), read_cube(a.b), a.scale)
    if a.json:
        _say(a, rep.to_json())
    else:
        _say(a, MetricReport.header() + "\n" + rep.row())
    outs = []
    if a.out:
        os.makedirs(a.out, exist_ok=True)
        path = os.path.join(a.out, "metrics.json")
        with open(path, "w") as fh:
            fh.write(rep.to_json() + "\n")
        outs.append(path)
    return [a.a, a.b], outs


def _cmd_demo(a):
    from .demo import run_demo

    out = a.out or os.path.join(os.environ.get("SPECSPLIT_CACHE", "."), "specsplit-demo")
    outputs = run_demo(out, seed=a.seed, epochs=a.epochs, quiet=a.quiet)
    a.out = out
    return [], sorted(outputs.values())


COMMANDS = {
    "import": _cmd_import, "downsample": _cmd_downsample, "augment": _cmd_augment, "train": _cmd_train,
    "eval": _cmd_eval, "search": _cmd_search, "metrics": _cmd_metrics, "demo": _cmd_demo,
}


def _require_cubes(directory):
    from .hypercube import list_cubes

    if not os.path.isdir(directory):
        raise FileNotFoundError(f"no such directory: {directory}")
    paths = list_cubes(directory)
    if not paths:
        raise FileNotFoundError(f"no .hsc cubes in {directory}")
    return paths


def _say(a, text, end="\n"):
    if not a.quiet:
        print(text, end=end)


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _manifest_dir(a):
    out = getattr(a, "out", None)
    if not out:
        return None
    if os.path.isdir(out):
        return out
    return os.path.dirname(os.path.abspath(out))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if a.command is None:
        parser.print_usage(sys.stderr)
        print(f"specsplit: error: a subcommand is required: {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    if a.device != "cpu":
        print(f"specsplit: error: unsupported device {a.device!r}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=logging.ERROR if a.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    torch.set_num_threads(max(1, a.threads))
    torch.manual_seed(a.seed)
    started = _now()
    try:
        inputs, outputs = COMMANDS[a.command](a)
    except DivergenceError as exc:
        print(f"specsplit: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ArgumentError as exc:
        print(f"specsplit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        name = exc.filename or str(exc)
        print(f"specsplit: file not found: {name}", file=sys.stderr)
        return EXIT_DATA
    except (SpecSplitError, OSError, ValueError) as exc:
        print(f"specsplit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    mdir = _manifest_dir(a)
    if mdir:
        resolved = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(a).items()}
        manifest = {
            "subcommand": a.command,
            "argv": argv,
            "config": resolved,
            "inputs": inputs,
            "outputs": outputs,
            "seed": a.seed,
            "version": __version__,
            "started": started,
            "finished": _now(),
        }
        os.makedirs(mdir, exist_ok=True)
        with open(os.path.join(mdir, "run_manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
    return EXIT_OK


def replay(manifest_path) -> int:
    """Re-run the command recorded in a run manifest."""
    with open(manifest_path) as fh:
        return main(json.load(fh)["argv"])


if __name__ == "__main__":
    sys.exit(main())
