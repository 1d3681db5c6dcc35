"""Command-line front end: fuse, decompose, gendata, genmask, eval, sweep."""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .datagen import MASK64, MaskSpec, ShapeKind, XorShift64Star, gen_mask_pair_info, simulate_defocus
from .imgcore import (
    ImageReadError,
    ImageWriteError,
    load_image,
    load_raster,
    save_image,
    save_mask,
)
from .metrics import FusionReport, evaluate, mean_report
from .pipeline import Chroma, FusionConfig, Mode, fuse_detailed, fuse_rgb
from .ssf import SolverError, decompose

log = logging.getLogger("focusfuse")

IMAGE_EXTS = (".png", ".pgm")
THREADS_ENV = "FOCUSFUSE_THREADS"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# ------------------------------------------------------------------ helpers


def worker_count(requested: int | None = None) -> int:
    n = requested if requested else 1
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be an integer, got {env!r}")
        if cap < 1:
            raise CliError(f"{THREADS_ENV} must be >= 1")
        n = cap if requested is None else min(n, cap)
    return max(1, n)


def pool_map(fn, items, workers: int):
    """Order-preserving map, optionally over a thread pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def list_images(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise CliError(f"missing directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTS)


def _require_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"missing file: {p}")
    return p


def _config_from_args(args) -> dict:
    file_values = cfgmod.read_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {}
    for key in cfgmod.KEYS:
        val = getattr(args, _dest(key), None)
        if val is not None:
            flags[key] = cfgmod.parse_value(key, val)
    return cfgmod.merge(file_values, flags)


def _dest(key: str) -> str:
    return "cfg_" + key.replace(".", "_")


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat 'key = value' config file")
    for key in cfgmod.KEYS:
        if key == "mode":
            p.add_argument("--mode", dest=_dest(key), choices=[m.value for m in Mode])
        else:
            p.add_argument(f"--{key}", dest=_dest(key), metavar="V")


def write_report(path: Path, reports: list[FusionReport], with_mean: bool = True) -> None:
    rows = sorted(reports, key=lambda r: r.id)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FusionReport.FIELDS)
        if with_mean and rows:
            rows = rows + [mean_report(rows)]
        for r in rows:
            w.writerow([r.id] + [f"{getattr(r, k):.6f}" for k in FusionReport.FIELDS[1:]])


def _dump(artifacts: dict, directory: Path, stem: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, img in artifacts.items():
        arr = np.asarray(img, dtype=np.float64)
        if name.startswith(("SM", "TM")):
            peak = float(arr.max())
            arr = arr / peak if peak > 0 else arr
        elif name.startswith("T") or name == "FT":
            arr = arr + 0.5  # signed layers shown around mid-gray
        save_image(arr, directory / f"{stem}_{name}.png")


# ------------------------------------------------------------------- fusion


def _load_inputs(paths: list[Path], mode: Mode):
    rasters = [load_raster(p) for p in paths]
    shapes = [r.shape[:2] for r in rasters]
    if any(s != shapes[0] for s in shapes[1:]):
        desc = ", ".join(f"{p.name}={s[1]}x{s[0]}" for p, s in zip(paths, shapes))
        raise CliError(f"dimension mismatch: {desc}")
    return rasters


def _to_gray(r):
    from .imgcore import rgb_to_luma

    return rgb_to_luma(r) if r.ndim == 3 else r


def fuse_item(paths: list[Path], cfg: FusionConfig):
    """Fuse one input set; returns (output image, FusionResult)."""
    rasters = _load_inputs(paths, cfg.mode)
    n_vis = 1 if cfg.mode is Mode.MMIF else 2
    vis = rasters[:n_vis]
    if cfg.chroma is Chroma.CARRY_FROM_VISIBLE and any(v.ndim == 3 for v in vis):
        ir = None if cfg.mode is Mode.MFIF else _to_gray(rasters[-1])
        holder = []
        out = fuse_rgb(vis, ir, cfg, result=holder)
        return out, holder[0]
    res = fuse_detailed([_to_gray(r) for r in rasters], cfg)
    return res.fused, res


def _input_paths(args, mode: Mode) -> list[Path]:
    names = {"tri": ["visa", "visb", "ir"], "mmif": ["visa", "ir"], "mfif": ["visa", "visb"]}[mode.value]
    paths = []
    for n in names:
        val = getattr(args, n)
        if val is None:
            raise CliError(f"mode {mode.value} requires --{n}")
        paths.append(_require_file(val))
    return paths


def cmd_fuse(args) -> int:
    values = _config_from_args(args)
    workers = worker_count(args.threads)
    cfg = cfgmod.to_fusion_config(values)
    if args.data_dir:
        return _fuse_batch(args, cfg, workers)
    if not args.out:
        raise CliError("fuse requires --out (or --data-dir/--out-dir for batch mode)")
    paths = _input_paths(args, cfg.mode)
    out, res = fuse_item(paths, cfg)
    save_image(out, args.out)
    if args.debug_dump:
        _dump(res.artifacts(), Path(args.debug_dump), Path(args.out).stem)
    return 0


def dataset_items(data_dir: Path, mode: Mode) -> list[tuple[str, list[Path]]]:
    subdirs = {"tri": ["visa", "visb", "ir"], "mmif": ["visa", "ir"], "mfif": ["visa", "visb"]}[mode.value]
    first = list_images(data_dir / subdirs[0])
    items = []
    for p in first:
        paths = [data_dir / s / p.name for s in subdirs]
        for q in paths:
            if not q.is_file():
                raise CliError(f"missing file: {q}")
        items.append((p.stem, paths))
    if not items:
        raise CliError(f"no images in {data_dir / subdirs[0]}")
    return items


def _fuse_batch(args, cfg: FusionConfig, workers: int) -> int:
    if not args.out_dir:
        raise CliError("batch fuse requires --out-dir")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = dataset_items(Path(args.data_dir), cfg.mode)

    def run(item):
        stem, paths = item
        out, res = fuse_item(paths, cfg)
        save_image(out, out_dir / f"{stem}.png")
        if args.debug_dump:
            _dump(res.artifacts(), Path(args.debug_dump), stem)
        return stem

    pool_map(run, items, workers)
    return 0


def cmd_decompose(args) -> int:
    values = _config_from_args(args)
    cfg = cfgmod.to_fusion_config(values)
    src = _require_file(args.input)
    f = load_image(src)
    s, t = decompose(f, cfg.ssf)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image(s, out / f"{src.stem}_S.png")
    save_image(t + 0.5, out / f"{src.stem}_T.png")
    if args.npy:
        np.save(out / f"{src.stem}_S.npy", s)
        np.save(out / f"{src.stem}_T.npy", t)
    return 0


# ---------------------------------------------------------------- datasets


def derive_seeds(seed: int, count: int) -> list[int]:
    rng = XorShift64Star(seed)
    return [rng.next_u64() for _ in range(count)]


def cmd_gendata(args) -> int:
    src = list_images(Path(args.input))
    if not src:
        raise CliError(f"no images in {args.input}")
    out = Path(args.out)
    for sub in ("clear", "visa", "visb", "mask"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    seeds = derive_seeds(args.seed, len(src))
    shape = ShapeKind(args.shape) if args.shape else None
    workers = worker_count(args.threads)

    def run(job):
        path, seed = job
        f = load_image(path)
        m1, m2, info = gen_mask_pair_info(f.shape[1], f.shape[0], MaskSpec(seed, shape))
        f1, f2 = simulate_defocus(f, m1, m2, args.sigma)
        name = path.stem + ".png"
        save_image(f, out / "clear" / name)
        save_image(f1, out / "visa" / name)
        save_image(f2, out / "visb" / name)
        save_mask(m1, out / "mask" / name)
        return [name, seed, info.shape.value, f"{info.area_frac:.6f}"]

    rows = pool_map(run, list(zip(src, seeds)), workers)
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filename", "seed", "shape", "area_frac"])
        w.writerows(sorted(rows))
    return 0


def cmd_genmask(args) -> int:
    shape = ShapeKind(args.shape) if args.shape else None
    m1, _, info = gen_mask_pair_info(args.width, args.height, MaskSpec(args.seed, shape))
    save_mask(m1, args.out)
    print(f"{info.shape.value} area_frac={info.area_frac:.6f}")
    return 0


# -------------------------------------------------------------- evaluation


def _eval_one(fused_path: Path, src_paths: list[Path], runtime_ms: float = 0.0) -> FusionReport:
    fused = load_image(fused_path)
    a, b = (load_image(p) for p in src_paths)
    if fused.shape != a.shape or a.shape != b.shape:
        raise CliError(
            f"dimension mismatch for {fused_path.name}: fused={fused.shape[1]}x{fused.shape[0]}, "
            f"sources={a.shape[1]}x{a.shape[0]} and {b.shape[1]}x{b.shape[0]}"
        )
    return evaluate(fused, a, b, ident=fused_path.stem, runtime_ms=runtime_ms)


def cmd_eval(args) -> int:
    fused_dir = Path(args.fused_dir)
    src_dir = Path(args.src_dir)
    subs = [s.strip() for s in args.sources.split(",") if s.strip()]
    if len(subs) != 2:
        raise CliError("--sources needs exactly two subdirectory names")
    jobs = []
    for p in list_images(fused_dir):
        srcs = [src_dir / s / p.name for s in subs]
        for q in srcs:
            if not q.is_file():
                raise CliError(f"missing file: {q}")
        jobs.append((p, srcs))
    if not jobs:
        raise CliError(f"no fused images in {fused_dir}")
    reports = pool_map(lambda j: _eval_one(*j), jobs, worker_count(args.threads))
    write_report(Path(args.report), reports)
    return 0


def _reference_dirs(data_dir: Path, mode: Mode) -> list[str]:
    a = "clear" if (data_dir / "clear").is_dir() else "visa"
    b = "visb" if mode is Mode.MFIF else "ir"
    return [a, b]


def cmd_sweep(args) -> int:
    base = _config_from_args(args)
    key = args.param
    if key not in cfgmod.KEYS:
        raise CliError(f"unknown config key: {key}")
    values = [cfgmod.parse_value(key, v.strip()) for v in args.values.split(",") if v.strip()]
    if not values:
        raise CliError("--values is empty")
    data_dir = Path(args.data_dir)
    workers = worker_count(args.threads)
    rows = []
    for val in values:
        settings = dict(base, **{key: val})
        cfg = cfgmod.to_fusion_config(settings)
        items = dataset_items(data_dir, cfg.mode)
        refs = _reference_dirs(data_dir, cfg.mode)

        def run(item, cfg=cfg, refs=refs, val=val):
            stem, paths = item
            t0 = time.perf_counter()
            out, _ = fuse_item(paths, cfg)
            ms = (time.perf_counter() - t0) * 1e3 if args.timings else 0.0
            gray = _to_gray(out)
            if args.work_dir:
                d = Path(args.work_dir) / f"{key}={val}"
                d.mkdir(parents=True, exist_ok=True)
                save_image(out, d / f"{stem}.png")
            a, b = (load_image(data_dir / r / paths[0].name) for r in refs)
            return evaluate(gray, a, b, ident=stem, runtime_ms=ms)

        reports = pool_map(run, items, workers)
        m = mean_report(reports)
        rows.append([key, str(val)] + [f"{getattr(m, k):.6f}" for k in FusionReport.FIELDS[1:]])
        log.info("%s=%s done (%d items)", key, val, len(items))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "value"] + list(FusionReport.FIELDS[1:]))
        w.writerows(rows)
    return 0


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="focusfuse", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fuse", help="fuse one input set or a dataset directory")
    p.add_argument("--visa")
    p.add_argument("--visb")
    p.add_argument("--ir")
    p.add_argument("--out")
    p.add_argument("--data-dir", help="batch mode: directory with visa/ visb/ ir/ subdirectories")
    p.add_argument("--out-dir")
    p.add_argument("--debug-dump", metavar="DIR", help="write intermediate maps here")
    p.add_argument("--threads", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("decompose", help="write structure and texture layers")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--npy", action="store_true", help="also save float layers as .npy")
    _add_config_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("gendata", help="synthesize multi-focus pairs from clear images")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--shape", choices=[s.value for s in ShapeKind])
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("genmask", help="write one random focus mask")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape", choices=[s.value for s in ShapeKind])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_genmask)

    p = sub.add_parser("eval", help="compute the metric table for fused images")
    p.add_argument("--fused-dir", required=True)
    p.add_argument("--src-dir", required=True)
    p.add_argument("--sources", default="vis,ir", help="two source subdirectories (default: vis,ir)")
    p.add_argument("--report", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="re-run fuse + eval over values of one config key")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--work-dir", help="keep fused outputs per value here")
    p.add_argument("--timings", action="store_true", help="record wall-clock runtime (not reproducible)")
    p.add_argument("--threads", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError("missing command (fuse, decompose, gendata, genmask, eval, sweep)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        for key in ("seed",):
            val = getattr(args, key, None)
            if val is not None and not 0 <= val <= MASK64:
                raise CliError("seed must be an unsigned 64-bit integer")
        return args.func(args)
    except (CliError, cfgmod.ConfigError, ImageReadError, ImageWriteError, SolverError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"focusfuse: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
