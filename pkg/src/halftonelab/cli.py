"""Command-line interface: halftone, train, analyze, bench, genmask, replay.

Every command writes a manifest next to its outputs recording the exact
argument vector, a config snapshot, seeds, package versions, and SHA-256
digests of the produced files.  Re-running the recorded command (the
``replay`` subcommand substitutes output paths) reproduces every artifact
byte for byte; only wall-clock fields (created_utc, *_ms columns) vary.

Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .classic import (
    KERNELS,
    bayer_matrix,
    dbs,
    error_diffusion,
    error_diffusion_variable,
    generate_vac_mask,
    load_mask,
    load_variable_kernel_table,
    ordered_dither,
    save_mask,
    white_noise_threshold,
)
from .errors import HalftoneError, InvalidParam, UnknownMethod
from .hvs import (
    DEFAULT_GAUSSIAN_RADIUS,
    DEFAULT_GAUSSIAN_SIGMA,
    DEFAULT_NASANEN_SCALE,
    DEFAULT_NASANEN_SIZE,
    build_gaussian_hvs,
    build_nasanen_hvs,
)
from .image import GrayImage, load_binary, load_gray, save_binary, save_gray
from .metrics import DEFAULT_OMEGA_S, ErrorMetricConfig, error_metric, hvs_psnr, ssim
from .plotting import Panel, save_plot
from .spectral import anisotropy, bluenoise_report, power_spectrum, rapsd
from .training import (
    DEFAULT_OMEGA_A,
    TrainConfig,
    infer_halftone,
    train_policy,
)
from .policy import AdamState, init_params, load_checkpoint, save_checkpoint


# ---------------------------------------------------------------------------
# Config files: flat "key=value" lines, '#' comments
# ---------------------------------------------------------------------------

def parse_config(path) -> dict[str, str]:
    cfg: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InvalidParam(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                cfg[key.strip()] = value.strip()
    except OSError as exc:
        raise InvalidParam(f"cannot read config {path}: {exc}") from exc
    return cfg


def _cfg_get(cfg: dict, key: str, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except ValueError as exc:
        raise InvalidParam(f"config key {key}={cfg[key]!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, argv: list[str], extra: dict,
                   outputs: list[str]) -> None:
    lines = [
        "manifest.version=1",
        f"command={command}",
        f"created_utc={datetime.now(timezone.utc).isoformat()}",
        f"argv={json.dumps(list(argv))}",
        f"package.version={__version__}",
        f"numpy.version={np.__version__}",
    ]
    for key in sorted(extra):
        lines.append(f"{key}={extra[key]}")
    for out in outputs:
        lines.append(f"output.{os.path.basename(out)}.sha256={_sha256(out)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if "=" in line:
                key, value = line.split("=", 1)
                out[key] = value
    return out


def _fmt(x) -> str:
    """Stable shortest-round-trip float formatting for CSV cells."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Shared flags
# ---------------------------------------------------------------------------

def _add_hvs_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hvs-kind", choices=("gaussian", "nasanen"),
                   default="gaussian")
    p.add_argument("--hvs-sigma", type=float, default=DEFAULT_GAUSSIAN_SIGMA)
    p.add_argument("--hvs-radius", type=int, default=DEFAULT_GAUSSIAN_RADIUS)
    p.add_argument("--hvs-scale", type=float, default=DEFAULT_NASANEN_SCALE)
    p.add_argument("--hvs-size", type=int, default=DEFAULT_NASANEN_SIZE)


def _build_hvs(args):
    if args.hvs_kind == "nasanen":
        return build_nasanen_hvs(args.hvs_scale, args.hvs_size)
    return build_gaussian_hvs(args.hvs_sigma, args.hvs_radius)


def _hvs_extra(args) -> dict:
    extra = {"hvs.kind": args.hvs_kind}
    if args.hvs_kind == "gaussian":
        extra["hvs.sigma"] = args.hvs_sigma
        extra["hvs.radius"] = args.hvs_radius
    else:
        extra["hvs.scale"] = args.hvs_scale
        extra["hvs.size"] = args.hvs_size
    return extra


# ---------------------------------------------------------------------------
# halftone
# ---------------------------------------------------------------------------

def cmd_halftone(args, argv) -> int:
    c = load_gray(args.input)
    hvs = _build_hvs(args)
    if args.method == "ordered":
        mask = load_mask(args.mask) if args.mask else bayer_matrix(8)
        out = ordered_dither(c, mask)
    elif args.method == "ed":
        if args.kernel.startswith("table:"):
            table = load_variable_kernel_table(args.kernel[6:],
                                               serpentine=not args.no_serpentine)
            out = error_diffusion_variable(c, table)
        elif args.kernel in KERNELS:
            k = KERNELS[args.kernel]
            if args.no_serpentine:
                from dataclasses import replace
                k = replace(k, serpentine=False)
            out = error_diffusion(c, k)
        else:
            raise UnknownMethod(f"unknown kernel {args.kernel!r}")
    elif args.method == "dbs":
        init = white_noise_threshold(c, args.seed)
        out = dbs(c, init, hvs, max_sweeps=args.sweeps)
    elif args.method == "marl":
        if not args.ckpt:
            raise InvalidParam("--method marl requires --ckpt")
        params, _, _ = load_checkpoint(args.ckpt)
        out = infer_halftone(params, c, args.seed)
    else:  # argparse choices prevent this
        raise UnknownMethod(f"unknown method {args.method!r}")
    save_binary(out, args.output)
    extra = {"method": args.method, "seed": args.seed, "input": args.input,
             **_hvs_extra(args)}
    write_manifest(str(args.output) + ".manifest", "halftone", argv, extra,
                   [args.output])
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _load_train_images(cfg: dict) -> list[GrayImage]:
    if "data.dir" in cfg:
        directory = cfg["data.dir"]
        names = sorted(
            n for n in os.listdir(directory)
            if n.lower().endswith((".pgm", ".png"))
        )
        if not names:
            raise InvalidParam(f"no .pgm/.png images in {directory}")
        return [load_gray(os.path.join(directory, n)) for n in names]
    count = _cfg_get(cfg, "data.synthetic", int, 8)
    size = _cfg_get(cfg, "data.size", int, 64)
    seed = _cfg_get(cfg, "data.seed", int, 0)
    from .corpus import synthetic_corpus

    return synthetic_corpus(count, size, seed)


def _train_config(cfg: dict) -> TrainConfig:
    hvs_kind = cfg.get("hvs.kind", "gaussian")
    if hvs_kind == "nasanen":
        hvs = build_nasanen_hvs(_cfg_get(cfg, "hvs.scale", float, DEFAULT_NASANEN_SCALE),
                                _cfg_get(cfg, "hvs.size", int, DEFAULT_NASANEN_SIZE))
    else:
        hvs = build_gaussian_hvs(_cfg_get(cfg, "hvs.sigma", float, DEFAULT_GAUSSIAN_SIGMA),
                                 _cfg_get(cfg, "hvs.radius", int, DEFAULT_GAUSSIAN_RADIUS))
    metric = ErrorMetricConfig(
        omega_s=_cfg_get(cfg, "train.omega_s", float, DEFAULT_OMEGA_S),
        hvs=hvs,
        ssim_window=_cfg_get(cfg, "ssim.window", int, 11),
    )
    return TrainConfig(
        omega_a=_cfg_get(cfg, "train.omega_a", float, DEFAULT_OMEGA_A),
        metric=metric,
        batch=_cfg_get(cfg, "train.batch", int, 4),
        crop=_cfg_get(cfg, "train.crop", int, 32),
        iterations=_cfg_get(cfg, "train.iterations", int, 200),
        lr_max=_cfg_get(cfg, "train.lr_max", float, 3e-4),
        lr_min=_cfg_get(cfg, "train.lr_min", float, 1e-5),
        seed=_cfg_get(cfg, "train.seed", int, 0),
        brightness_jitter=_cfg_get(cfg, "train.brightness_jitter", float, 0.9),
        blocks=_cfg_get(cfg, "model.blocks", int, 4),
        channels=_cfg_get(cfg, "model.channels", int, 16),
    )


def cmd_train(args, argv) -> int:
    cfg_raw = parse_config(args.config)
    cfg = _train_config(cfg_raw)
    images = _load_train_images(cfg_raw)
    params = opt = None
    start = 0
    if args.resume:
        params, start, opt = load_checkpoint(args.resume)
        if opt is None:
            opt = AdamState(params)
    rows = []

    def on_step(rep):
        rows.append([rep.step, rep.lr, rep.mean_reward,
                     rep.anisotropy_loss, rep.wall_ms])
        if not args.quiet and (rep.step % 20 == 0 or rep.step == cfg.iterations - 1):
            print(f"step {rep.step:5d}  lr {rep.lr:.3e}  "
                  f"reward {rep.mean_reward:+.6f}  l_as {rep.anisotropy_loss:.3e}",
                  flush=True)

    params, opt, _ = train_policy(cfg, images, params=params, opt=opt,
                                  start_step=start, on_step=on_step)
    save_checkpoint(args.out, params, step=cfg.iterations, adam=opt)
    _write_csv(args.log, ["step", "lr", "mean_reward", "l_as", "wall_ms"], rows)
    extra = {f"config.{k}": v for k, v in sorted(cfg_raw.items())}
    write_manifest(str(args.out) + ".manifest", "train", argv, extra,
                   [args.out, args.log])
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args, argv) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    outputs = []
    extra = _hvs_extra(args)
    if args.ramp:
        width, height = args.ramp
        ramp = GrayImage(np.tile(np.arange(width) / max(width - 1, 1),
                                 (height, 1)))
        ramp_path = os.path.join(args.outdir, "ramp.pgm")
        save_gray(ramp, ramp_path)
        outputs.append(ramp_path)
    if args.halftone:
        if not args.reference:
            raise InvalidParam("analyze needs REFERENCE next to HALFTONE")
        h = load_binary(args.halftone)
        c = load_gray(args.reference)
        hvs = _build_hvs(args)
        cfg = ErrorMetricConfig(omega_s=args.omega_s, hvs=hvs)
        image_id = args.id or os.path.basename(args.halftone)
        row = [image_id, args.method_label,
               hvs_psnr(h, c, hvs), ssim(h, c, cfg), error_metric(h, c, cfg)]
        metrics_path = os.path.join(args.outdir, "metrics.csv")
        _write_csv(metrics_path,
                   ["image-id", "method", "hvs_psnr_db", "ssim", "E"], [row])
        outputs.append(metrics_path)
        if args.spectrum:
            outputs += _spectral_outputs(h, args)
    write_manifest(os.path.join(args.outdir, "manifest.txt"), "analyze",
                   argv, extra, outputs)
    return 0


def _spectral_outputs(h, args) -> list[str]:
    report = bluenoise_report(h, gray=args.gray)
    rapsd_path = os.path.join(args.outdir, "rapsd.csv")
    _write_csv(rapsd_path, ["ring", "frequency", "power"],
               [[int(r), f, p] for r, f, p in
                zip(report.ring_radii, report.ring_freqs, report.rapsd)])
    ani_path = os.path.join(args.outdir, "anisotropy.csv")
    _write_csv(ani_path, ["ring", "db"],
               [[int(r), d] for r, d in
                zip(report.ring_radii, report.anisotropy_db)
                if np.isfinite(d) or d == -np.inf])
    plot_path = os.path.join(args.outdir, "spectrum.png")
    save_plot([
        Panel(curves=[(report.ring_freqs, report.rapsd)],
              vlines=[report.principal_freq]),
        Panel(curves=[(report.ring_freqs, report.anisotropy_db)],
              vlines=[report.principal_freq]),
    ], plot_path)
    return [rapsd_path, ani_path, plot_path]


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_methods(args):
    methods = {}
    if "ordered" in args.methods:
        mask = load_mask(args.mask) if args.mask else bayer_matrix(8)
        methods["ordered"] = lambda c: ordered_dither(c, mask)
    if "ed" in args.methods:
        methods["ed"] = lambda c: error_diffusion(c, KERNELS["fs"])
    if "dbs" in args.methods:
        hvs = _build_hvs(args)
        methods["dbs"] = lambda c: dbs(
            c, white_noise_threshold(c, args.seed), hvs, max_sweeps=args.sweeps)
    if "marl" in args.methods:
        if not args.ckpt:
            raise InvalidParam("bench with marl requires --ckpt")
        params, _, _ = load_checkpoint(args.ckpt)
        methods["marl"] = lambda c: infer_halftone(params, c, args.seed)
    unknown = set(args.methods) - set(methods)
    if unknown:
        raise UnknownMethod(f"unknown bench methods: {sorted(unknown)}")
    return methods


def cmd_bench(args, argv) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    names = sorted(n for n in os.listdir(args.corpus)
                   if n.lower().endswith((".pgm", ".png")))
    if not names:
        raise InvalidParam(f"no images found in {args.corpus}")
    hvs = _build_hvs(args)
    cfg = ErrorMetricConfig(omega_s=args.omega_s, hvs=hvs)
    methods = _bench_methods(args)
    rows = []
    for name in names:
        c = load_gray(os.path.join(args.corpus, name))
        for mname, fn in methods.items():
            times = []
            out = None
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                out = fn(c)
                times.append((time.perf_counter() - t0) * 1e3)
            rows.append([mname, name, float(np.median(times)),
                         hvs_psnr(out, c, hvs), ssim(out, c, cfg),
                         error_metric(out, c, cfg)])
    csv_path = os.path.join(args.outdir, "bench.csv")
    _write_csv(csv_path,
               ["method", "image", "wall_ms_median", "hvs_psnr_db", "ssim", "E"],
               rows)
    write_manifest(os.path.join(args.outdir, "manifest.txt"), "bench", argv,
                   {"corpus": args.corpus, "repeats": args.repeats,
                    **_hvs_extra(args)}, [csv_path])
    return 0


# ---------------------------------------------------------------------------
# genmask / replay
# ---------------------------------------------------------------------------

def cmd_genmask(args, argv) -> int:
    hvs = _build_hvs(args)
    mask = generate_vac_mask(args.side, args.seed, hvs)
    save_mask(mask, args.out)
    write_manifest(str(args.out) + ".manifest", "genmask", argv,
                   {"side": args.side, "seed": args.seed, **_hvs_extra(args)},
                   [args.out])
    return 0


def cmd_replay(args, argv) -> int:
    manifest = read_manifest(args.manifest)
    if "argv" not in manifest:
        raise InvalidParam(f"{args.manifest}: no argv recorded")
    recorded = json.loads(manifest["argv"])
    subs = dict(args.sub or [])
    replayed = [subs.get(tok, tok) for tok in recorded]
    return main(replayed)


# ---------------------------------------------------------------------------
# Parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="halftonelab",
        description="Halftoning engine: policy halftoner, classic baselines, "
                    "blue-noise analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    ph = sub.add_parser("halftone", help="convert a grayscale image to binary")
    ph.add_argument("input")
    ph.add_argument("output")
    ph.add_argument("--method", required=True,
                    choices=("ordered", "ed", "dbs", "marl"))
    ph.add_argument("--mask", help="threshold matrix file (ordered)")
    ph.add_argument("--kernel", default="fs",
                    help="fs | jarvis | table:FILE (ed)")
    ph.add_argument("--no-serpentine", action="store_true")
    ph.add_argument("--sweeps", type=int, default=10)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--ckpt", help="policy checkpoint (marl)")
    _add_hvs_flags(ph)
    ph.set_defaults(fn=cmd_halftone)

    pt = sub.add_parser("train", help="train the policy halftoner")
    pt.add_argument("--config", required=True)
    pt.add_argument("--out", required=True, help="checkpoint output path")
    pt.add_argument("--log", required=True, help="CSV training log path")
    pt.add_argument("--resume", help="checkpoint to continue from")
    pt.add_argument("--quiet", action="store_true")
    pt.set_defaults(fn=cmd_train)

    pa = sub.add_parser("analyze", help="metrics and spectral diagnostics")
    pa.add_argument("halftone", nargs="?")
    pa.add_argument("reference", nargs="?")
    pa.add_argument("--outdir", required=True)
    pa.add_argument("--id", help="image id for the CSV row")
    pa.add_argument("--method-label", default="unknown")
    pa.add_argument("--spectrum", action="store_true")
    pa.add_argument("--gray", type=float,
                    help="gray level of the dithered constant (else estimated)")
    pa.add_argument("--ramp", nargs=2, type=int, metavar=("W", "H"),
                    help="also write a horizontal gray ramp fixture")
    pa.add_argument("--omega-s", dest="omega_s", type=float,
                    default=DEFAULT_OMEGA_S)
    _add_hvs_flags(pa)
    pa.set_defaults(fn=cmd_analyze)

    pb = sub.add_parser("bench", help="timings and metrics over a corpus")
    pb.add_argument("--corpus", required=True)
    pb.add_argument("--outdir", required=True)
    pb.add_argument("--methods", default="ordered,ed,dbs",
                    type=lambda s: s.split(","))
    pb.add_argument("--repeats", type=int, default=5)
    pb.add_argument("--mask")
    pb.add_argument("--ckpt")
    pb.add_argument("--sweeps", type=int, default=10)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--omega-s", dest="omega_s", type=float,
                    default=DEFAULT_OMEGA_S)
    _add_hvs_flags(pb)
    pb.set_defaults(fn=cmd_bench)

    pg = sub.add_parser("genmask", help="generate a void-and-cluster mask")
    pg.add_argument("--side", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", required=True)
    _add_hvs_flags(pg)
    pg.set_defaults(fn=cmd_genmask)

    pr = sub.add_parser("replay", help="re-run a command from its manifest")
    pr.add_argument("manifest")
    pr.add_argument("--sub", nargs=2, action="append", metavar=("OLD", "NEW"),
                    help="substitute a recorded argv token")
    pr.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args, list(argv))
    except HalftoneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
