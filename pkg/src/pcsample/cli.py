"""Command line interface.

Subcommands:

* ``synth``       - generate a corpus of synthetic cloud/label pairs
* ``sample``      - downsample one cloud file
* ``train-bayes`` - train the per-region Bayes model on a labelled corpus
* ``eval``        - score methods over a corpus (optionally gated by an
  expectations file whose violations force a nonzero exit)
* ``bench``       - time methods over a corpus

Every artifact is written together with enough metadata (resolved config,
seed, tool version) to regenerate it bit-exactly, and outputs are written to
a temporary file and renamed into place so a failed run leaves nothing
behind. ``PCSAMPLE_SEED`` and ``PCSAMPLE_JOBS`` override the corresponding
flags' defaults.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .bayes import BucketScheme, GridConfig, load_model_file, save_model, train_bayes
from .benchmark import (
    PROXY_NOTE,
    bench,
    check_expectations,
    emit_csv,
    emit_summary,
    evaluate,
)
from .cloud import load_point_cloud, write_point_cloud
from .errors import ConfigError, PcSampleError
from .labels import load_labels, write_labels
from .peak import PeakConfig
from .sampling import METHOD_NAMES, make_method, result_record
from .synth import SynthConfig, synth_scene
from .seeding import STREAM_CORPUS, derive_seed

log = logging.getLogger("pcsample")

ENV_SEED = "PCSAMPLE_SEED"
ENV_JOBS = "PCSAMPLE_JOBS"

# Rates below these floors are outside the regime the methods were tuned
# for; runs proceed but warn.
RATE_FLOORS = {"kitti4": 0.10, "nuscenes5": 0.07}

_PEAK_FLAGS = (
    "slice_width", "stride", "peak_ratio", "min_count", "z_filter", "z_bin_width"
)


def _tool_meta() -> dict:
    return {"name": "pcsample", "version": __version__}


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got {raw!r}")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = _env_int(ENV_SEED)
    return env if env is not None else 0


def _resolve_jobs(args) -> int:
    jobs = getattr(args, "jobs", None)
    if jobs is None:
        jobs = _env_int(ENV_JOBS) or 1
    if jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _warn_rate_floor(rates, format_tag: str) -> None:
    floor = RATE_FLOORS.get(format_tag)
    if floor is None:
        return
    for rate in rates:
        if rate < floor:
            log.warning(
                "rate %g is below the studied floor %g for %s input; proceeding",
                rate, floor, format_tag,
            )


def _peak_config(args) -> PeakConfig:
    """Start from --peak-config (or defaults) and fold in explicit flags."""
    if getattr(args, "peak_config", None):
        base = PeakConfig.from_json(Path(args.peak_config).read_text(encoding="utf-8"))
    else:
        base = PeakConfig()
    overrides = {}
    for name in _PEAK_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return PeakConfig(**{**asdict(base), **overrides}) if overrides else base


def _add_peak_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("density-peak detector")
    group.add_argument("--peak-config", help="JSON file with detector settings")
    group.add_argument("--slice-width", type=float, dest="slice_width")
    group.add_argument("--stride", type=int)
    group.add_argument("--peak-ratio", type=float, dest="peak_ratio")
    group.add_argument("--min-count", type=int, dest="min_count")
    group.add_argument(
        "--z-filter", action=argparse.BooleanOptionalAction, dest="z_filter",
        help="mask the dominant height bin as ground (--no-z-filter disables)",
    )
    group.add_argument("--z-bin-width", type=float, dest="z_bin_width")


def _add_method_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--obj-ratio", type=float, default=0.7,
                        help="object share of the sampling budget (default 0.7)")
    parser.add_argument("--model", help="trained model file (required for sta_bayes)")
    parser.add_argument("--threshold", type=float, default=0.5,
                        help="posterior threshold for sta_bayes (default 0.5)")
    _add_peak_flags(parser)


def _require_model_for(methods, args):
    if "sta_bayes" in methods and not args.model:
        raise ConfigError("--model is required when method sta_bayes is requested")


def _method_factories(methods, args, model):
    peak = _peak_config(args)

    def factory_for(name):
        def build(rate, seed):
            return make_method(
                name, rate, seed,
                obj_ratio=args.obj_ratio,
                peak_config=peak,
                model=model,
                threshold=args.threshold,
            )
        return build

    return {name: factory_for(name) for name in methods}


def _corpus_pairs(corpus_dir: str, format_tag: str, require_labels: bool):
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ConfigError(f"--corpus {corpus_dir!r} is not a directory")
    cloud_paths = sorted(root.glob("*.bin"))
    if not cloud_paths:
        raise ConfigError(f"--corpus {corpus_dir!r} contains no .bin cloud files")
    pairs = []
    for cloud_path in cloud_paths:
        labels_path = cloud_path.with_suffix("").with_suffix(".labels.json")
        if labels_path.exists():
            labels = load_labels(labels_path)
        elif require_labels:
            raise ConfigError(
                f"train-bayes requires labels: missing {labels_path.name} in --corpus"
            )
        else:
            labels = None
        pairs.append((load_point_cloud(cloud_path, format_tag), labels))
    return cloud_paths, pairs


def _parse_methods(raw: str):
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    if not methods:
        raise ConfigError("--methods must name at least one method")
    for m in methods:
        if m not in METHOD_NAMES:
            raise ConfigError(
                f"--methods: unknown method {m!r}; expected one of {METHOD_NAMES}"
            )
    return methods


def _parse_rates(raw: str):
    try:
        rates = [float(r) for r in raw.split(",") if r.strip()]
    except ValueError as exc:
        raise ConfigError(f"--rates: {exc}")
    if not rates:
        raise ConfigError("--rates must name at least one rate")
    for r in rates:
        if not (0.0 < r <= 1.0):
            raise ConfigError(f"--rates: rate {r} outside (0, 1]")
    return rates


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #

def _cmd_synth(args) -> int:
    seed = _resolve_seed(args)
    lo, hi = args.points_per_object
    config = SynthConfig(
        extent=args.extent,
        ground_points=args.ground_points,
        n_objects=args.objects,
        points_per_object=(lo, hi),
        layout_seed=args.layout_seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(args.count):
        cloud, labels = synth_scene(config, derive_seed(seed, STREAM_CORPUS, i))
        stem = f"{i:04d}"
        _atomic_write_bytes(out / f"{stem}.bin", write_point_cloud(cloud, "kitti4"))
        _atomic_write_bytes(out / f"{stem}.labels.json", write_labels(labels))
        files.append(stem)
    manifest = {
        "tool": _tool_meta(),
        "command": "synth",
        "seed": seed,
        "count": args.count,
        "format": "kitti4",
        "config": asdict(config),
        "files": files,
    }
    _atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2))
    log.info("wrote %d scenes to %s", args.count, out)
    return 0


def _cmd_sample(args) -> int:
    seed = _resolve_seed(args)
    methods = [args.method]
    _require_model_for(methods, args)
    _warn_rate_floor([args.rate], args.format)
    model = load_model_file(args.model) if args.model else None
    peak = _peak_config(args)
    sampler = make_method(
        args.method, args.rate, seed,
        obj_ratio=args.obj_ratio, peak_config=peak, model=model,
        threshold=args.threshold,
    )
    cloud = load_point_cloud(args.input, args.format)
    result = sampler.sample(cloud)
    out_path = Path(args.output)
    _atomic_write_bytes(out_path, write_point_cloud(cloud.select(result.indices), args.format))
    record = {
        "tool": _tool_meta(),
        "command": "sample",
        "input": str(args.input),
        "format": args.format,
        "seed": seed,
        "config": {
            "method": args.method,
            "rate": args.rate,
            "obj_ratio": args.obj_ratio,
            "threshold": args.threshold,
            "model": args.model,
            "detector": asdict(peak),
        },
        "n_points": len(cloud),
        "result": result_record(result, sampler._spec()),
    }
    record_path = Path(args.record) if args.record else out_path.with_name(out_path.name + ".json")
    _atomic_write_text(record_path, json.dumps(record, indent=2))
    log.info("kept %d of %d points -> %s", len(result), len(cloud), out_path)
    return 0


def _cmd_train_bayes(args) -> int:
    grid = GridConfig(
        x_min=args.grid_min, x_max=args.grid_max,
        y_min=args.grid_min, y_max=args.grid_max,
        m=args.grid_m, n=args.grid_n,
    )
    buckets = BucketScheme(tuple(2 ** b - 1 for b in range(args.buckets)))
    _, pairs = _corpus_pairs(args.corpus, args.format, require_labels=True)
    model = train_bayes(pairs, grid=grid, buckets=buckets, alpha=args.alpha, min_object_points=args.region_min_points)
    provenance = {
        "tool": _tool_meta(),
        "command": "train-bayes",
        "corpus": str(args.corpus),
        "format": args.format,
        "config": {
            "grid": grid.to_dict(),
            "buckets": args.buckets,
            "alpha": args.alpha,
            "region_min_points": args.region_min_points,
        },
    }
    _atomic_write_text(Path(args.output), save_model(model, provenance=provenance))
    log.info("trained on %d clouds -> %s", model.training_clouds, args.output)
    return 0


def _report_meta(args, command, seed, methods, rates, extra=None) -> dict:
    meta = {
        "tool": _tool_meta(),
        "command": command,
        "note": PROXY_NOTE,
        "seed": seed,
        "config": {
            "corpus": str(args.corpus),
            "format": args.format,
            "methods": methods,
            "rates": rates,
            "obj_ratio": args.obj_ratio,
            "threshold": args.threshold,
            "model": args.model,
            "detector": asdict(_peak_config(args)),
        },
    }
    if extra:
        meta["config"].update(extra)
    return meta


def _cmd_eval(args) -> int:
    seed = _resolve_seed(args)
    jobs = _resolve_jobs(args)
    methods = _parse_methods(args.methods)
    rates = _parse_rates(args.rates)
    _require_model_for(methods, args)
    _warn_rate_floor(rates, args.format)
    model = load_model_file(args.model) if args.model else None
    _, pairs = _corpus_pairs(args.corpus, args.format, require_labels=False)
    rows = evaluate(
        _method_factories(methods, args, model), pairs, rates,
        base_seed=seed, jobs=jobs,
    )
    _atomic_write_text(Path(args.output), emit_csv(rows))
    meta = _report_meta(args, "eval", seed, methods, rates, {"jobs": jobs})
    _atomic_write_text(Path(args.output + ".meta.json"), json.dumps(meta, indent=2))
    if args.summary:
        _atomic_write_text(Path(args.summary), emit_summary(rows))
    log.info("wrote %d rows -> %s", len(rows), args.output)
    if args.expectations:
        expectations = json.loads(Path(args.expectations).read_text(encoding="utf-8"))
        violations = check_expectations(rows, expectations)
        if violations:
            for v in violations:
                log.error("expectation violated: %s", v)
            return 1
    return 0


def _cmd_bench(args) -> int:
    seed = _resolve_seed(args)
    methods = _parse_methods(args.methods)
    rates = _parse_rates(args.rates)
    _require_model_for(methods, args)
    _warn_rate_floor(rates, args.format)
    model = load_model_file(args.model) if args.model else None
    _, pairs = _corpus_pairs(args.corpus, args.format, require_labels=False)
    rows = bench(
        _method_factories(methods, args, model), pairs, rates,
        repetitions=args.reps, base_seed=seed,
    )
    _atomic_write_text(Path(args.output), emit_csv(rows))
    meta = _report_meta(args, "bench", seed, methods, rates, {"reps": args.reps})
    _atomic_write_text(Path(args.output + ".meta.json"), json.dumps(meta, indent=2))
    if args.summary:
        _atomic_write_text(Path(args.summary), emit_summary(rows))
    log.info("wrote %d rows -> %s", len(rows), args.output)
    return 0


# --------------------------------------------------------------------------- #
# parser
# --------------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcsample",
        description="Object-aware LiDAR point cloud downsampling toolkit.",
        epilog=f"Environment: {ENV_SEED} and {ENV_JOBS} override the "
               "--seed/--jobs defaults.",
    )
    parser.add_argument("--version", action="version", version=f"pcsample {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--extent", type=float, default=SynthConfig.extent)
    p.add_argument("--ground-points", type=int, default=SynthConfig.ground_points)
    p.add_argument("--objects", type=int, default=SynthConfig.n_objects)
    p.add_argument("--points-per-object", type=int, nargs=2, metavar=("LO", "HI"),
                   default=list(SynthConfig.points_per_object))
    p.add_argument("--layout-seed", type=int, default=SynthConfig.layout_seed)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sample", help="downsample one cloud file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("kitti4", "nuscenes5"), default="kitti4")
    p.add_argument("--method", required=True, choices=METHOD_NAMES)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--record", help="sidecar JSON path (default: OUTPUT.json)")
    _add_method_flags(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("train-bayes", help="train the per-region Bayes model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("kitti4", "nuscenes5"), default="kitti4")
    p.add_argument("--output", required=True)
    p.add_argument("--grid-min", type=float, default=GridConfig.x_min)
    p.add_argument("--grid-max", type=float, default=GridConfig.x_max)
    p.add_argument("--grid-m", type=int, default=GridConfig.m)
    p.add_argument("--grid-n", type=int, default=GridConfig.n)
    p.add_argument("--buckets", type=int, default=12)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--region-min-points", type=int, default=1,
                   dest="region_min_points")
    p.set_defaults(func=_cmd_train_bayes)

    p = sub.add_parser("eval", help="score methods over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("kitti4", "nuscenes5"), default="kitti4")
    p.add_argument("--methods", required=True,
                   help=f"comma-separated subset of {','.join(METHOD_NAMES)}")
    p.add_argument("--rates", required=True, help="comma-separated rates in (0, 1]")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True, help="metrics CSV path")
    p.add_argument("--summary", help="optional human-readable summary path")
    p.add_argument("--expectations",
                   help="JSON thresholds; violations force a nonzero exit")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker threads over corpus clouds (default 1)")
    _add_method_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time methods over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=("kitti4", "nuscenes5"), default="kitti4")
    p.add_argument("--methods", required=True,
                   help=f"comma-separated subset of {','.join(METHOD_NAMES)}")
    p.add_argument("--rates", required=True, help="comma-separated rates in (0, 1]")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--output", required=True, help="timing CSV path")
    p.add_argument("--summary", help="optional human-readable summary path")
    _add_method_flags(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except PcSampleError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
