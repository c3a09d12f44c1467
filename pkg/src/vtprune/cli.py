"""Command-line driver: corpus generation, pipeline runs, sweeps, and heatmaps.

Exit codes: 0 success, 1 partial failure (some or all videos failed),
2 usage error.  Run outputs land under <out>/run-<id>/ where the id is a
hash of the effective configuration and corpus, so re-running the same
command reproduces byte-identical reports.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .grids import PruneConfig, TokenGrid, TokenGridError, load_token_grid
from .metrics import EfficiencyReport, write_reports_csv, write_reports_json
from .model import Model, ModelSpec, init_model
from .pipeline import make_question_ids, run_video
from .rng import derive_seed
from .synth import SynthSpec, write_video
from .viz import backproject_records, render_segment_heatmaps

MIXED_FRACTIONS = [0.25, 0.375, 0.5, 0.625, 0.75]

_SWEEP_AXES = {
    "tau": ("tau", float),
    "gamma": ("gamma", float),
    "beta": ("beta", float),
    "alpha": ("alpha", float),
    "m": ("m_layer", int),
    "k": ("k_knn", int),
}


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction must be in [0, 1], got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtprune", description=__doc__)
    parser.add_argument("--version", action="version", version=f"vtprune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic PVTG corpus with ground-truth sidecars")
    gen.add_argument("--out", required=True, help="corpus directory")
    gen.add_argument("--videos", type=_positive_int, default=10)
    gen.add_argument("--frames", type=_positive_int, default=16)
    gen.add_argument("--tokens", type=_positive_int, default=64)
    gen.add_argument("--channels", type=_positive_int, default=64)
    gen.add_argument("--scenes", type=_positive_int, default=4)
    gen.add_argument("--static-fraction", type=_fraction, default=None,
                     help="fixed static fraction; omit for the mixed preset cycling %s" % MIXED_FRACTIONS)
    gen.add_argument("--static-noise", type=float, default=0.02)
    gen.add_argument("--dynamic-drift", type=float, default=1.5)
    gen.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="run the pruning pipeline over a corpus")
    run.add_argument("--corpus", required=True, help="directory of .pvtg files")
    run.add_argument("--out", default="out", help="output root (default: out)")
    run.add_argument("--config", default=None, help="JSON config file; flags override its values")
    run.add_argument("--tau", type=float, default=None)
    run.add_argument("--gamma", type=float, default=None)
    run.add_argument("--beta", type=float, default=None)
    run.add_argument("--alpha", type=float, default=None)
    run.add_argument("--m-layer", type=int, default=None)
    run.add_argument("--k-knn", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--question-len", type=_positive_int, default=16)
    run.add_argument("--workers", type=_positive_int, default=1)
    run.add_argument("--sweep", default=None,
                     help="comma-separated axes name=start:stop:step, e.g. alpha=0.1:0.9:0.1,m=2:11:1")
    run.add_argument("--trace", action="store_true", help="write per-video merge traces")

    viz = sub.add_parser("visualize", help="render per-segment score heatmaps for one video")
    viz.add_argument("--run", required=True, help="run directory (contains manifest.json)")
    viz.add_argument("--video", required=True, help="video id from the manifest")
    viz.add_argument("--out", default=None, help="image directory (default: <run>/viz)")
    return parser


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for v in range(args.videos):
        fraction = args.static_fraction
        if fraction is None:
            fraction = MIXED_FRACTIONS[v % len(MIXED_FRACTIONS)]
        spec = SynthSpec(
            frames=args.frames,
            tokens_per_frame=args.tokens,
            channels=args.channels,
            n_scenes=args.scenes,
            static_fraction=fraction,
            static_noise=args.static_noise,
            dynamic_drift=args.dynamic_drift,
            seed=derive_seed(args.seed, 100, v),
        )
        name = f"video_{v:03d}"
        write_video(spec, out / f"{name}.pvtg", out / f"{name}.truth.json")
    print(f"wrote {args.videos} videos to {out}")
    return 0


def _fold_name(name: str) -> int:
    return derive_seed(0x9A7E, *name.encode("utf-8"))


def _load_config(args) -> PruneConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(base) - {"tau", "gamma", "beta", "alpha", "m_layer", "k_knn", "seed"}
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    for flag, key in [("tau", "tau"), ("gamma", "gamma"), ("beta", "beta"), ("alpha", "alpha"),
                      ("m_layer", "m_layer"), ("k_knn", "k_knn"), ("seed", "seed")]:
        value = getattr(args, flag)
        if value is not None:
            base[key] = value
    try:
        return PruneConfig(**base)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"invalid configuration: {exc}")


def parse_sweep(text: str) -> list[tuple[str, list]]:
    """Parse name=start:stop:step axes into (config field, values) pairs."""
    axes = []
    for part in text.split(","):
        name, _, rng = part.partition("=")
        name = name.strip()
        if name not in _SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {name!r}; choose from {sorted(_SWEEP_AXES)}")
        field_name, kind = _SWEEP_AXES[name]
        pieces = rng.split(":")
        if len(pieces) != 3:
            raise ValueError(f"sweep axis {name!r} needs start:stop:step, got {rng!r}")
        if kind is int:
            start, stop, step = (int(p) for p in pieces)
            values = list(range(start, stop + 1, step))
        else:
            start, stop, step = (float(p) for p in pieces)
            count = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 10) for i in range(count) if start + i * step <= stop + 1e-9]
        if not values:
            raise ValueError(f"sweep axis {name!r} is empty")
        axes.append((field_name, values))
    return axes


def _sweep_grid(axes: list[tuple[str, list]]) -> list[dict]:
    combos = [{}]
    for field_name, values in axes:
        combos = [{**combo, field_name: v} for combo in combos for v in values]
    return combos


def _run_one(task) -> dict:
    """Worker: full pipeline on one video (model re-built per call, deterministic)."""
    video_id, data, config_dict, model_dict, question_len = task
    try:
        return _run_one_inner(video_id, data, config_dict, model_dict, question_len)
    except Exception as exc:  # surfaced per video, run continues
        return {"video_id": video_id, "error": f"{type(exc).__name__}: {exc}"}


def _run_one_inner(video_id, data, config_dict, model_dict, question_len) -> dict:
    config = PruneConfig(**config_dict)
    model = init_model(ModelSpec(**model_dict))
    grid = TokenGrid(np.asarray(data))
    ids = make_question_ids(derive_seed(config.seed, _fold_name(video_id)), question_len, model.spec.vocab)
    run = run_video(grid, config, model, ids, video_id=video_id)
    export = {
        "video_id": video_id,
        "frames": grid.frames,
        "tokens_per_frame": grid.tokens_per_frame,
        "segments": [list(s) for s in run.merged.partition.segments],
        "segment_spans": [list(s) for s in run.merged.segment_spans],
        "provenance": [
            {"segment": p.segment_id, "frames": list(p.source_frames),
             "locations": list(p.source_locations), "kind": p.kind}
            for p in run.merged.provenance
        ],
        "selection": run.selection.to_json_dict(),
    }
    return {
        "video_id": video_id,
        "report": run.report.to_dict(),
        "export": export,
        "trace": run.merged.trace,
    }


def _aggregate(reports: list[dict]) -> dict:
    n = len(reports)
    return {
        "videos": n,
        "mean_retained_ratio": sum(r["retained_ratio"] for r in reports) / n,
        "mean_flops_multiplier": sum(r["flops_multiplier"] for r in reports) / n,
        "mean_merged_ratio": sum(r["merged_tokens"] / r["raw_tokens"] for r in reports) / n,
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    started = time.perf_counter()
    config = _load_config(args)
    model_spec = ModelSpec(seed=config.seed)
    if not config.m_layer < model_spec.layers:
        raise SystemExit(f"m_layer ({config.m_layer}) must be below the model layer count ({model_spec.layers})")

    corpus = Path(args.corpus)
    paths = sorted(corpus.glob("*.pvtg"))
    if not paths:
        print(f"error: no .pvtg files under {corpus}", file=sys.stderr)
        return 1
    grids = []
    skipped = []
    for path in paths:
        try:
            grids.append((path.stem, load_token_grid(path)))
        except TokenGridError as exc:
            skipped.append({"video": path.stem, "reason": str(exc)})
            print(f"skipping {path.name}: {exc}", file=sys.stderr)

    sweep_axes = None
    if args.sweep:
        try:
            sweep_axes = parse_sweep(args.sweep)
        except ValueError as exc:
            raise SystemExit(f"bad --sweep: {exc}")

    config_dict = {k: getattr(config, k) for k in ("tau", "gamma", "beta", "alpha", "m_layer", "k_knn", "seed")}
    model_dict = {k: getattr(model_spec, k) for k in
                  ("layers", "heads", "channels", "ffn_multiplier", "vocab", "max_seq", "seed")}
    identity = {
        "version": __version__,
        "config": config_dict,
        "model": model_dict,
        "question_len": args.question_len,
        "videos": [name for name, _ in grids],
        "sweep": args.sweep,
    }
    run_id = hashlib.sha256(json.dumps(identity, sort_keys=True).encode()).hexdigest()[:12]
    run_dir = Path(args.out) / f"run-{run_id}"
    run_dir.mkdir(parents=True, exist_ok=True)

    def execute(cfg_dict: dict) -> tuple[list[dict], list[dict]]:
        tasks = [(name, grid.data, cfg_dict, model_dict, args.question_len) for name, grid in grids]
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(_run_one, tasks))
        else:
            results = [_run_one(t) for t in tasks]
        results.sort(key=lambda r: r["video_id"])
        failures = [r for r in results if "error" in r]
        for f in failures:
            print(f"video {f['video_id']} failed: {f['error']}", file=sys.stderr)
        return [r for r in results if "error" not in r], failures

    any_failed = bool(skipped)
    if sweep_axes is None:
        results, failures = execute(config_dict)
        any_failed = any_failed or bool(failures)
        if not results:
            print("error: every video failed", file=sys.stderr)
            return 1
        reports = [r["report"] for r in results]
        videos_dir = run_dir / "videos"
        videos_dir.mkdir(exist_ok=True)
        for r in results:
            _write_json(videos_dir / f"{r['video_id']}.json", r["export"])
            if args.trace:
                _write_json(videos_dir / f"{r['video_id']}.trace.json", r["trace"])
        manifest = {
            "tool": "vtprune",
            "version": __version__,
            "run_id": run_id,
            "config": config_dict,
            "model": model_dict,
            "question_len": args.question_len,
            "corpus": str(corpus),
            "videos": [name for name, _ in grids],
            "skipped": skipped,
            "failed": [{"video": f["video_id"], "reason": f["error"]} for f in failures],
            "reports": reports,
            "aggregate": _aggregate(reports),
        }
        _write_json(run_dir / "manifest.json", manifest)
        report_objs = [EfficiencyReport(**{**r, "stage_counts": dict(r["stage_counts"])}) for r in reports]
        write_reports_json(report_objs, run_dir / "reports.json")
        write_reports_csv(report_objs, run_dir / "reports.csv")
        agg = manifest["aggregate"]
        print(f"run {run_id}: {len(reports)} videos, "
              f"mean retained ratio {agg['mean_retained_ratio']:.4f}, "
              f"mean FLOPs multiplier {agg['mean_flops_multiplier']:.4f}")
    else:
        rows = []
        for combo in _sweep_grid(sweep_axes):
            cfg_dict = {**config_dict, **combo}
            try:
                PruneConfig(**cfg_dict)
            except ValueError as exc:
                raise SystemExit(f"bad --sweep value {combo}: {exc}")
            if not cfg_dict["m_layer"] < model_spec.layers:
                raise SystemExit(f"bad --sweep value {combo}: m_layer must stay below {model_spec.layers}")
            results, failures = execute(cfg_dict)
            any_failed = any_failed or bool(failures)
            if not results:
                print("error: every video failed", file=sys.stderr)
                return 1
            rows.append({"params": combo, "aggregate": _aggregate([r["report"] for r in results])})
        _write_json(run_dir / "sweep.json", {
            "run_id": run_id, "config": config_dict, "axes": [a for a, _ in sweep_axes], "points": rows,
        })
        with open(run_dir / "sweep.csv", "w", encoding="utf-8") as fh:
            axis_names = [a for a, _ in sweep_axes]
            fh.write(",".join(axis_names + ["mean_retained_ratio", "mean_flops_multiplier"]) + "\n")
            for row in rows:
                fields = [repr(row["params"][a]) for a in axis_names]
                fields += [repr(row["aggregate"]["mean_retained_ratio"]),
                           repr(row["aggregate"]["mean_flops_multiplier"])]
                fh.write(",".join(fields) + "\n")
        print(f"run {run_id}: swept {len(rows)} points over {[a for a, _ in sweep_axes]}")

    print(f"completed in {time.perf_counter() - started:.2f}s (outputs under {run_dir})")
    return 1 if any_failed else 0


def cmd_visualize(args) -> int:
    run_dir = Path(args.run)
    export_path = run_dir / "videos" / f"{args.video}.json"
    if not export_path.exists():
        print(f"error: missing selection export {export_path} (run `vtprune run` first)", file=sys.stderr)
        return 1
    export = json.loads(export_path.read_text(encoding="utf-8"))
    proj = backproject_records(
        frames=export["frames"],
        tokens_per_frame=export["tokens_per_frame"],
        records=export["provenance"],
        scores=np.asarray(export["selection"]["scores"]),
        selected_indices=np.asarray(export["selection"]["indices"], dtype=np.int64),
        segments=tuple(tuple(s) for s in export["segments"]),
    )
    if not (proj.coverage == 1).all():
        print("error: provenance does not cover the grid exactly once", file=sys.stderr)
        return 1
    out_dir = Path(args.out) if args.out else run_dir / "viz"
    paths = render_segment_heatmaps(proj, out_dir, args.video)
    print(f"wrote {len(paths)} images to {out_dir}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate":
        return cmd_generate(args)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "visualize":
        return cmd_visualize(args)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
