"""Command line entry point.

    dmk run      --config PATH [--out DIR] [--seed N] [--workers N] [--stage NAME]
    dmk simulate --config PATH [--out DIR] [--seed N] [--workers N]
    dmk embed    --out DIR [--workers N]          (reads DIR/config.json)
    dmk filter   --out DIR [--workers N]
    dmk metrics  --out DIR

Single-file modes, for debugging without a run directory:

    dmk embed  --input raw.csv --out DIR [--window W] [--k K] [--epsilon-multiplier X]
    dmk filter --input raw.csv --model model.json --out DIR

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O failure.
Failures also write ``error.json`` (stage, error type, message) into the output
directory when it exists.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod, dmk, experiments
from .errors import InvalidInputError, NumericalDegeneracyError, StageError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("dmkalman")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, NumericalDegeneracyError):
        return EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (InvalidInputError, ValueError)):
        return EXIT_VALIDATION
    if isinstance(exc, ArithmeticError):
        return EXIT_NUMERICAL
    return EXIT_VALIDATION


def _report_failure(stage: str, exc: BaseException, out: Path | None) -> int:
    code = _exit_code(exc)
    payload = {"stage": stage, "error": type(exc).__name__, "message": str(exc), "exit_code": code}
    text = json.dumps(payload, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None and out.is_dir():
        try:
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmk", description="Diffusion-maps Kalman filter experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config: bool):
        p.add_argument("--config", type=Path, required=needs_config, help="YAML/JSON experiment config")
        p.add_argument("--out", type=Path, help=f"run directory (default: ${experiments.OUTPUT_ROOT_ENV}/<name>)")
        p.add_argument("--seed", type=int, help="override the config's master seed")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes (default: cores)")

    run = sub.add_parser("run", help="run every stage")
    common(run, True)
    run.add_argument("--stage", choices=experiments.STAGES, help="run only this stage")

    sim = sub.add_parser("simulate", help="simulate or ingest raw series")
    common(sim, True)

    emb = sub.add_parser("embed", help="diffusion-maps embedding of the raw series")
    common(emb, False)
    emb.add_argument("--input", type=Path, help="single raw CSV (time, z_* columns)")
    emb.add_argument("--window", type=int, default=30)
    emb.add_argument("--k", type=int, default=2)
    emb.add_argument("--epsilon-multiplier", type=float, default=1.0)

    fil = sub.add_parser("filter", help="assemble models and run the filters")
    common(fil, False)
    fil.add_argument("--input", type=Path, help="single raw CSV (time, z_* columns)")
    fil.add_argument("--model", type=Path, help="model JSON for single-file mode")

    met = sub.add_parser("metrics", help="score filtered series")
    common(met, False)
    return ap


def _resolve(args) -> tuple[dict, Path]:
    if args.config is not None:
        cfg = cfgmod.load(args.config, seed_override=args.seed)
        out = args.out or experiments.default_output_dir(cfg)
        return cfg, out
    if args.out is None:
        raise InvalidInputError("give --config or --out pointing at an existing run directory")
    cfg = experiments.load_run_config(args.out)
    if args.seed is not None and args.seed != cfg["seed"]:
        raise InvalidInputError("--seed differs from the seed recorded in the run directory")
    return cfg, args.out


def _single_embed(args) -> None:
    from .experiments import read_raw, write_embedding
    from .pipeline import EmbeddingParams, build_embedding

    raw = read_raw(args.input)
    params = EmbeddingParams(window=args.window, epsilon_multiplier=args.epsilon_multiplier, k=args.k)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    write_embedding(out, "embedding", raw["time"], build_embedding(raw["z"][1], params))


def _single_filter(args) -> None:
    from .experiments import _dmk_parts, read_model, read_raw, write_filtered

    if args.model is None:
        raise InvalidInputError("single-file filter mode needs --model")
    raw = read_raw(args.input)
    m = read_model(args.model)
    psi_hat, z_hat = dmk.run(raw["z"][1], m)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    write_filtered(out / "filtered_dmk.csv", raw["time"], _dmk_parts(psi_hat.values, z_hat.values, raw["z"][0]))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    stage = "config"
    out = args.out
    try:
        if args.command in ("embed", "filter") and getattr(args, "input", None) is not None:
            stage = args.command
            (_single_embed if args.command == "embed" else _single_filter)(args)
            return EXIT_OK
        cfg, out = _resolve(args)
        if args.workers < 1:
            raise InvalidInputError("--workers must be >= 1")
        if args.command == "run":
            stages = [args.stage] if args.stage else list(experiments.STAGES)
        else:
            stages = [args.command]
        if stages[0] != "simulate" and not (out / "config.json").exists():
            raise experiments.artifacts.MissingArtifactError(out / "config.json")
        if stages[0] != "simulate" and args.config is not None:
            recorded = experiments.load_run_config(out)
            if cfgmod.config_hash(recorded) != cfgmod.config_hash(cfg):
                raise InvalidInputError(f"--config does not match the config recorded in {out}")
        for stage in stages:
            experiments.run_stage(stage, cfg, out, args.workers)
    except StageError as exc:
        return _report_failure(exc.stage, exc, out)
    except Exception as exc:  # every failure becomes an exit code plus error JSON
        if args.verbose:
            log.exception("stage %s failed", stage)
        return _report_failure(stage, exc, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
