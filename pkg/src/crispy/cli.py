"""Command line entry point: profile -> model -> recommend, plus evaluate.

Exit codes: 0 success, 1 failure, 2 usage error, 3 recommendation made but
no configuration satisfies the memory requirement.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import shlex
import sys
from pathlib import Path
from typing import Optional, Sequence

from .core import GiB, CatalogError, Framework, load_catalog
from .evaluator import (
    HistoryFormatError,
    JobModel,
    evaluate,
    load_history,
    load_models,
    report,
    write_results,
)
from .importer import convert_table, parse_mapping
from .manifest import ManifestError, RunManifest
from .memmodel import ModelError, RequirementParams, fit_memory_model, model_report, points_from_runs
from .profiler import JobSpec, MonitorConfig, ProfilingError, profile_job
from .sampler import DEFAULT_BASE_FRACTION, LINE_DELIMITED, RAW_BYTES, RUNTIME_WINDOW, SamplingError
from .selector import SelectionError, bfa_rank, recommendation_report, select

logger = logging.getLogger("crispy")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNSATISFIED = 0, 1, 2, 3

_UNITS = {"": 1, "B": 1, "K": 1024, "M": 1024**2, "G": 1024**3, "T": 1024**4}


class UsageError(Exception):
    pass


def parse_size(text: str) -> int:
    """Bytes from ``123``, ``1.5G``, ``200MiB`` and the like (binary units)."""
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+)\s*([KMGT]?)(?:I?B)?\s*", text, re.IGNORECASE)
    if not m:
        raise argparse.ArgumentTypeError(f"not a size: {text!r}")
    return int(round(float(m.group(1)) * _UNITS[m.group(2).upper()]))


def _fraction(text: str) -> float:
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return v


def _env_pair(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crispy", description="Memory-aware cluster configuration assistant.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="profile the job on five dataset samples")
    p.add_argument("--job-cmd", required=True, help="command template containing {sample} (and optionally {runtime_args})")
    p.add_argument("--dataset", required=True, help="local dataset file to draw samples from")
    p.add_argument("--full-size", required=True, type=parse_size, help="size of the full dataset, e.g. 250G")
    p.add_argument("--job-name", help="defaults to the dataset file stem")
    p.add_argument("--base-fraction", type=_fraction, default=DEFAULT_BASE_FRACTION)
    p.add_argument("--poll-ms", type=int, default=500)
    p.add_argument("--baseline-ms", type=int, default=5000)
    p.add_argument("--settle-timeout", type=float, default=60.0,
                   help="seconds to wait for memory use to stop drifting before each baseline (0 disables)")
    p.add_argument("--runtime-args", default="", help="pass-through runtime flags, substituted for {runtime_args}")
    p.add_argument("--env", type=_env_pair, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--timeout", type=float, default=600.0, help="per-run timeout in seconds")
    p.add_argument("--min-runtime", type=float, default=RUNTIME_WINDOW[0])
    p.add_argument("--max-runtime", type=float, default=RUNTIME_WINDOW[1])
    p.add_argument("--format", choices=[LINE_DELIMITED, RAW_BYTES], default=LINE_DELIMITED)
    p.add_argument("--workdir", default="crispy-run")
    p.add_argument("--manifest", help="defaults to WORKDIR/manifest.json")

    p = sub.add_parser("model", help="fit the memory model from the profiling runs")
    p.add_argument("--manifest", default="crispy-run/manifest.json")
    p.add_argument("--export-dir", help="also write a job-model file usable by 'evaluate --models-dir'")

    p = sub.add_parser("recommend", help="choose a cluster configuration")
    p.add_argument("--manifest", default="crispy-run/manifest.json")
    p.add_argument("--no-model", action="store_true", help="pure best-for-all selection")
    p.add_argument("--history", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--framework", required=True, choices=[f.value for f in Framework])
    p.add_argument("--exclude-job", help="job to leave out of the ranking (defaults to the manifest's job)")
    p.add_argument("--full-size", type=parse_size, help="override the manifest's full dataset size")
    p.add_argument("--overhead-gib", type=float, default=2.0)
    p.add_argument("--leeway", type=float, default=0.10)

    p = sub.add_parser("evaluate", help="compare selection strategies on an execution history")
    p.add_argument("--history", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--models-dir")
    p.add_argument("--medium-config", help="MACHINE:NODES (default: catalog medium entry with 12 nodes)")
    p.add_argument("--profiling-times", help="JSON file mapping job -> profiling seconds")
    p.add_argument("--overhead-gib", type=float, default=2.0)
    p.add_argument("--leeway", type=float, default=0.10)
    p.add_argument("--out-dir", help="write report.txt and results.json here")

    p = sub.add_parser("import-history", help="convert a foreign execution table to the history schema")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--columns", default="", help="canonical=source,... e.g. job=workload,runtime_seconds=elapsed")
    p.add_argument("--default", type=_env_pair, action="append", default=[], metavar="COLUMN=VALUE")
    p.add_argument("--runtime-scale", type=float, default=1.0)
    return parser


def cmd_profile(args) -> int:
    workdir = Path(args.workdir)
    manifest_path = Path(args.manifest) if args.manifest else workdir / "manifest.json"
    try:
        job = JobSpec(args.job_cmd, environment=dict(args.env), runtime_tuning_args=shlex.split(args.runtime_args),
                      timeout_seconds=args.timeout)
        monitor = MonitorConfig(args.poll_ms, args.baseline_ms, settle_timeout_ms=int(args.settle_timeout * 1000))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = profile_job(job, args.dataset, args.base_fraction, monitor, full_dataset_bytes=args.full_size,
                         workdir=workdir, window=(args.min_runtime, args.max_runtime), format=args.format)
    base = manifest_path.parent.resolve()
    manifest = RunManifest(manifest_path)
    manifest.set_stage("profile", {
        "job_name": args.job_name or Path(args.dataset).stem,
        "dataset_path": os.fspath(args.dataset),
        "full_dataset_bytes": args.full_size,
        "job": job.to_dict(),
        "plan": result.plan.to_dict(),
        "tuning_attempts": [list(a) for a in result.attempts],
        "runs": [{
            "trace_path": os.path.relpath(Path(t).resolve(), base),
            "sample_bytes": r.sample_bytes,
            "peak_job_bytes": r.peak_job_bytes,
            "duration_seconds": r.duration_seconds,
        } for r, t in zip(result.runs, result.trace_paths)],
    })
    manifest.save()
    for r in result.runs:
        print(f"sample {r.sample_bytes:>14d} B  peak {r.peak_job_bytes / GiB:8.3f} GiB  {r.duration_seconds:7.1f} s")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def cmd_model(args) -> int:
    manifest = RunManifest.load(args.manifest)
    points = points_from_runs(manifest.runs())
    if len(points) < 2:
        raise ModelError(f"need at least two successful runs, manifest has {len(points)}")
    model = fit_memory_model(points)
    manifest.set_stage("model", model.to_dict())
    manifest.save()
    print(model_report(model))
    if args.export_dir:
        out = Path(args.export_dir)
        out.mkdir(parents=True, exist_ok=True)
        jm = JobModel(manifest.job_name, model, {"full": manifest.full_dataset_bytes})
        (out / f"{manifest.job_name}.json").write_text(json.dumps(jm.to_dict(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _params(args) -> RequirementParams:
    if args.overhead_gib < 0 or args.leeway < 0:
        raise UsageError("--overhead-gib and --leeway must be non-negative")
    return RequirementParams(int(round(args.overhead_gib * GiB)), args.leeway)


def cmd_recommend(args) -> int:
    params = _params(args)
    catalog = load_catalog(args.catalog)
    history = load_history(args.history, catalog)
    manifest = None if args.no_model and not Path(args.manifest).is_file() else RunManifest.load(args.manifest)
    model = None if args.no_model else manifest.model()
    exclude = args.exclude_job or (manifest.job_name if manifest and "profile" in manifest.data else None)
    full = args.full_size or (manifest.full_dataset_bytes if manifest and "profile" in manifest.data else None)
    if model is not None and not full:
        raise UsageError("full dataset size unknown; pass --full-size")
    ranking = bfa_rank(history, Framework(args.framework), exclude_job=exclude)
    rec = select(ranking, model, full or 1, params)
    print(recommendation_report(rec))
    if manifest is not None:
        manifest.set_stage("recommend", rec.to_dict())
        manifest.save()
    if not rec.satisfied_memory_constraint:
        print("warning: no configuration satisfies the memory requirement", file=sys.stderr)
        return EXIT_UNSATISFIED
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params = _params(args)
    catalog = load_catalog(args.catalog)
    history = load_history(args.history, catalog)
    if args.medium_config:
        name, _, nodes = args.medium_config.partition(":")
        medium = catalog.config(name, int(nodes or 12))
    elif catalog.medium:
        medium = catalog.config(catalog.medium, 12)
    else:
        medium = None
        logger.warning("no medium configuration; the Medium column will be empty")
    models = load_models(args.models_dir) if args.models_dir else None
    times = json.loads(Path(args.profiling_times).read_text()) if args.profiling_times else None
    rows = evaluate(history, medium, models, params)
    text = report(rows, times)
    sys.stdout.write(text)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text)
        write_results(rows, out / "results.json")
    return EXIT_OK


def cmd_import_history(args) -> int:
    n, dropped = convert_table(args.src, args.dst, parse_mapping(args.columns), dict(args.default),
                               args.runtime_scale)
    print(f"wrote {n} rows to {args.dst}")
    if dropped:
        print(f"dropped columns: {', '.join(dropped)}")
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "model": cmd_model,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "import-history": cmd_import_history,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ProfilingError, SamplingError, ModelError, SelectionError, ManifestError,
            CatalogError, HistoryFormatError, OSError, ValueError) as exc:
        print(f"crispy {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
