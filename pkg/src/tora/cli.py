"""Command-line entry point.

Subcommands: ``transform`` (apply the intervention to an array file),
``analyze`` (geometry metrics and alignment-change records), ``simulate``
(toy joint-attention pipeline with the intervention off and on), and
``sweep`` (the simulate metric pass across a sigma grid).

Reports and manifests go to files or stdout; diagnostics and errors go to
stderr only, errors as ``tora-error: <code>: <message>``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import synthetic
from .errors import ToraError, ValidationError
from .metrics import delta_gamma, isotropy_scores
from .gmm import assign, fit_gmm
from .npyio import ArrayFile, read_array, write_array
from .report import MetricReport, render_json, write_report, write_sweep_csv
from .simulator import Intervention, init_weights, run_pipeline
from .transform import SemanticVector, ToraConfig, apply_tora, pool_semantic_vector

log = logging.getLogger("tora")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _digest(values: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(repr(values.shape).encode())
    h.update(np.ascontiguousarray(values).tobytes())
    return h.hexdigest()


def _emit(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _load_blocks(path) -> tuple:
    """Load an array file as a list of V x d blocks plus its ArrayFile."""
    array = read_array(path)
    if 0 in array.shape:
        raise ValidationError(f"{path}: empty extent in shape {array.shape}")
    if len(array.shape) == 2:
        return [array.values], array
    if len(array.shape) == 3:
        return list(array.values), array
    raise ValidationError(
        f"{path}: expected rank 2 (V, d) or rank 3 (B, V, d), got shape {array.shape}"
    )


def _load_semantic(args) -> SemanticVector | None:
    if args.cond is None and args.null is None:
        return None
    if args.cond is None or args.null is None:
        raise ValidationError("--cond and --null must be given together")
    cond = read_array(args.cond)
    null = read_array(args.null)
    if len(cond.shape) != 2 or len(null.shape) != 2:
        raise ValidationError("--cond and --null must be rank-2 (V, d) arrays")
    return pool_semantic_vector(cond.values, null.values)


def _tora_config(args) -> ToraConfig:
    return ToraConfig(
        sigma=args.sigma,
        elbow_override=getattr(args, "elbow_k", None),
        enable_alignment=not args.no_align,
    )


def cmd_transform(args) -> int:
    blocks, array = _load_blocks(args.input)
    semantic = _load_semantic(args)
    config = _tora_config(args)
    results = [apply_tora(block, semantic, config) for block in blocks]
    stacked = np.stack([r.embedding for r in results])
    out_values = stacked[0] if len(array.shape) == 2 else stacked
    write_array(args.output, ArrayFile(values=out_values, dtype=array.dtype))
    manifest = {
        "sigma": config.sigma,
        "alignment_enabled": config.enable_alignment,
        "input": {
            "path": str(args.input),
            "shape": list(array.shape),
            "dtype": array.dtype,
            "digest": _digest(array.values),
        },
        "semantic_provided": semantic is not None,
        "blocks": [
            {
                "block": i,
                "elbow_index": r.elbow_index,
                "rotation_angle": r.rotation_angle,
                "alignment_skipped": r.alignment_skipped,
                "skip_reason": r.skip_reason,
            }
            for i, r in enumerate(results)
        ],
    }
    _emit(args.report, (render_json(manifest) + "\n").encode("utf-8"))
    return 0


def _analyze_matrix(report: MetricReport, timestep: int, block: int, values, clusters, seed) -> None:
    count = clusters if clusters is not None else max(2, values.shape[0] // 8)
    clustering = assign(fit_gmm(values, count, seed), values)
    scores = isotropy_scores(values, clustering)
    report.add(timestep, block, "eigen_sum", scores.eigen_sum)
    report.add(timestep, block, "global_anisotropy", scores.global_anisotropy)
    report.add(timestep, block, "iso_score", scores.iso_score)
    report.add(timestep, block, "local_isotropy", scores.xi_local)


def cmd_analyze(args) -> int:
    if len(args.input) not in (1, 2):
        raise ValidationError("--input takes one matrix or a before/after pair")
    semantic = _load_semantic(args)
    report = MetricReport(
        metadata={
            "command": "analyze",
            "clusters": args.clusters,
            "seed": args.seed,
            "inputs": [str(p) for p in args.input],
        }
    )
    loaded = []
    for index, path in enumerate(args.input):
        blocks, array = _load_blocks(path)
        loaded.append(blocks)
        report.metadata[f"digest_{index}"] = _digest(array.values)
        for b, values in enumerate(blocks):
            _analyze_matrix(report, index, b, values, args.clusters, args.seed)
    if len(loaded) == 2 and semantic is not None:
        before_blocks, after_blocks = loaded
        if len(before_blocks) != len(after_blocks):
            raise ValidationError("before/after inputs have different block counts")
        for b, (before, after) in enumerate(zip(before_blocks, after_blocks)):
            record = delta_gamma(semantic, before, after)
            report.add(0, b, "gamma_before", record.gamma_before)
            report.add(0, b, "gamma_after", record.gamma_after)
            report.add(0, b, "delta_gamma", record.delta)
    report.sort()
    from .report import render_report

    _emit(args.report, render_report(report, args.format))
    return 0


def _simulation_inputs(args) -> tuple:
    if args.input is not None:
        array = read_array(args.input)
        if len(array.shape) != 2:
            raise ValidationError("--input for simulate must be a rank-2 (V, d) array")
        text = array.values
        latent = synthetic.synthetic_latents(args.seed, latents=args.latents, dim=text.shape[1])
    else:
        text, latent = synthetic.synthetic_inputs(
            args.seed,
            tokens=args.tokens,
            latents=args.latents,
            dim=args.dim,
            clusters=args.clusters or 2,
        )
    return text, latent


def _simulation_metadata(args, text, mode: str) -> dict:
    return {
        "command": "simulate",
        "mode": mode,
        "seed": args.seed,
        "sigma": args.sigma if mode == "tora" else None,
        "alignment_enabled": (not args.no_align) if mode == "tora" else None,
        "blocks": args.blocks,
        "timesteps": args.timesteps,
        "tokens": int(text.shape[0]),
        "latents": args.latents,
        "dim": int(text.shape[1]),
        "clusters": args.clusters,
        "attn_combine": args.attn_combine,
        "input_digest": _digest(text),
    }


def cmd_simulate(args) -> int:
    text, latent = _simulation_inputs(args)
    semantic = _load_semantic(args)
    weights = init_weights(args.seed, args.blocks, text.shape[1])
    intervention = Intervention(config=_tora_config(args), semantic=semantic)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for mode, applied in (("baseline", None), ("tora", intervention)):
        report, attention = run_pipeline(
            text,
            latent,
            weights,
            args.timesteps,
            intervention=applied,
            clusters=args.clusters,
            metric_seed=args.seed,
            combine=args.attn_combine,
            metadata=_simulation_metadata(args, text, mode),
        )
        write_report(out / f"{mode}.report.{args.format}", report, args.format)
        write_array(out / f"{mode}.attention.npy", ArrayFile(values=attention.text_to_text))
        log.info("wrote %s report with %d entries", mode, len(report.entries))
    return 0


def _parse_grid(text: str) -> list:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid must be A:B:STEP, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"unparseable grid {text!r}") from exc
    if step <= 0 or stop < start:
        raise ValidationError(f"grid must be non-empty and strictly increasing, got {text!r}")
    count = int((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 12) for i in range(count)]


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    text, latent = _simulation_inputs(args)
    semantic = _load_semantic(args)
    weights = init_weights(args.seed, args.blocks, text.shape[1])

    def run_point(sigma: float) -> MetricReport:
        config = ToraConfig(
            sigma=sigma,
            elbow_override=getattr(args, "elbow_k", None),
            enable_alignment=not args.no_align,
        )
        report, _ = run_pipeline(
            text,
            latent,
            weights,
            args.timesteps,
            intervention=Intervention(config=config, semantic=semantic),
            clusters=args.clusters,
            metric_seed=args.seed,
            combine=args.attn_combine,
        )
        return report

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(run_point, grid))
    else:
        reports = [run_point(sigma) for sigma in grid]
    metadata = {
        "command": "sweep",
        "grid": grid,
        "seed": args.seed,
        "blocks": args.blocks,
        "timesteps": args.timesteps,
        "alignment_enabled": not args.no_align,
        "attn_combine": args.attn_combine,
        "input_digest": _digest(text),
    }
    write_sweep_csv(args.output, list(zip(grid, reports)), metadata=metadata)
    return 0


def _add_semantic_flags(parser) -> None:
    parser.add_argument("--cond", help="conditional embedding array (V x d)")
    parser.add_argument("--null", help="unconditional embedding array (V x d)")


def _add_transform_flags(parser) -> None:
    parser.add_argument("--sigma", type=float, default=1.3, help="top-k singular value scale")
    parser.add_argument("--no-align", action="store_true", help="disable residual alignment")
    parser.add_argument("--elbow-k", type=int, default=None, help="fixed principal count override")


def _add_simulation_flags(parser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--blocks", type=int, default=6)
    parser.add_argument("--timesteps", type=int, default=4)
    parser.add_argument("--tokens", type=int, default=8)
    parser.add_argument("--latents", type=int, default=16)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--clusters", type=int, default=None)
    parser.add_argument("--attn-combine", choices=("concat", "sum"), default="concat")
    parser.add_argument("--input", help="initial text embedding array instead of synthetic data")
    _add_semantic_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tora", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="apply the intervention to an array file")
    p.add_argument("--input", required=True, help="embedding array, (V, d) or (B, V, d)")
    p.add_argument("--output", required=True, help="transformed array path")
    p.add_argument("--report", default=None, help="manifest path ('-' or omitted: stdout)")
    _add_semantic_flags(p)
    _add_transform_flags(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("analyze", help="geometry metrics for one matrix or a before/after pair")
    p.add_argument("--input", required=True, nargs="+", help="one array, or before and after")
    p.add_argument("--report", default=None, help="report path ('-' or omitted: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--clusters", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    _add_semantic_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the toy pipeline with the intervention off and on")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    _add_simulation_flags(p)
    _add_transform_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate metric pass across a sigma grid")
    p.add_argument("--output", required=True, help="consolidated CSV path")
    p.add_argument("--grid", default="1.0:1.5:0.1", help="sigma grid as A:B:STEP")
    p.add_argument("--jobs", type=int, default=1)
    _add_simulation_flags(p)
    p.add_argument("--no-align", action="store_true", help="disable residual alignment")
    p.add_argument("--elbow-k", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("TORA_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToraError as err:
        print(f"tora-error: {err.code}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"tora-error: io_error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
