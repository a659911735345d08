"""Command-line front door: solve, train, seed, eval, replay.

Every run is captured in a JSON run-config (rng seeds, solver thresholds,
resolved paths included); replaying a saved config through the ``replay``
subcommand reproduces the output files byte for byte.  Exit codes: 0 ok,
2 validation, 3 singular system, 4 solver non-convergence, 5 I/O.

The ``--threads`` flag (overridden by the ``DIFFWALKER_THREADS`` environment
variable) bounds the BLAS thread pools used by the solvers.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._errors import SingularSystemError, SolverConvergenceError, ValidationError
from . import fileio
from .diffusion import entropy_map, label, solve_rw
from .lattice import assemble_blocks, build_lattice, edge_count
from .learning import (
    AdamConfig,
    BackwardConfig,
    EdgeParameters,
    LossConfig,
    intensity_weights,
    train_per_edge,
)
from .metrics import evaluate
from .seeding import oracle_seeds
from .solver import SolverConfig

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SINGULAR = 3
EXIT_NO_CONVERGENCE = 4
EXIT_IO = 5


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


@contextlib.contextmanager
def _thread_limit(threads: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def _resolve_threads(flag_value) -> int:
    env = os.environ.get("DIFFWALKER_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ValidationError(f"DIFFWALKER_THREADS={env!r} is not an integer")
    else:
        value = flag_value if flag_value is not None else (os.cpu_count() or 1)
    if value < 1:
        raise ValidationError("thread count must be >= 1")
    return value


def _solver_config(cfg: dict) -> SolverConfig:
    return SolverConfig(
        method=cfg.get("solver", "auto"),
        direct_limit=cfg.get("direct_limit", 200_000),
        cg_rtol=cfg.get("cg_rtol", 1e-10),
    )


# ---------------------------------------------------------------- commands


def _cmd_solve(cfg: dict) -> int:
    has_weights = cfg.get("weights") is not None
    has_image = cfg.get("image") is not None
    if has_weights == has_image:
        raise ValidationError("provide exactly one of --weights or --image with --beta")
    if has_image and cfg.get("beta") is None:
        raise ValidationError("--image requires --beta")

    if has_weights:
        weights, height, width = fileio.read_weights(cfg["weights"])
    else:
        image = fileio.read_image(cfg["image"])
        height, width = image.shape
        weights = intensity_weights(image, cfg["beta"])

    graph = build_lattice(height, width)
    seeds = fileio.read_seeds_csv(cfg["seeds"], height, width)
    blocks = assemble_blocks(graph, weights, seeds)
    assignments, report = solve_rw(blocks, seeds, config=_solver_config(cfg))

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / "assignments.npy", assignments.grid())
    fileio.write_label_image(out_dir / "labels.pgm", label(assignments))
    np.save(out_dir / "entropy.npy", entropy_map(assignments))
    _write_json(out_dir / "solve_report.json", report.to_json_dict())
    _write_json(out_dir / "run_config.json", cfg)
    print(f"solved {height}x{width} grid, {seeds.n_labels} labels -> {out_dir}", file=sys.stderr)
    return EXIT_OK


def _cmd_train(cfg: dict) -> int:
    gt = fileio.read_label_image(cfg["gt"])
    height, width = gt.shape
    if cfg.get("seeds") is not None:
        seeds = fileio.read_seeds_csv(cfg["seeds"], height, width)
    else:
        seeds = oracle_seeds(gt, mode=cfg["seed_mode"], rng_seed=cfg["rng_seed"])

    mode = cfg["mode"]
    n = cfg["n"]
    if mode != "exact" and n > edge_count(height, width):
        raise ValidationError(
            f"--n {n} exceeds the {edge_count(height, width)} edges of a "
            f"{height}x{width} grid"
        )

    variant = cfg["loss"]
    loss_config = LossConfig(
        variant=variant,
        side_weight=cfg["alpha"] if variant == "side-ce" else 1e-2,
        barrier_weight=cfg["alpha"] if variant == "log-barrier" else 1e-5,
        decay=cfg["gamma"],
    )
    backward = BackwardConfig(mode=mode, n_samples=n, rng_seed=cfg["rng_seed"])

    init = None
    if cfg.get("image") is not None:
        if cfg.get("beta") is None:
            raise ValidationError("--image requires --beta")
        image = fileio.read_image(cfg["image"])
        if image.shape != gt.shape:
            raise ValidationError(
                f"image shape {image.shape} does not match ground truth {gt.shape}"
            )
        init = EdgeParameters.from_weights(intensity_weights(image, cfg["beta"]))

    result = train_per_edge(
        gt,
        seeds,
        epochs=cfg["epochs"],
        loss_config=loss_config,
        backward=backward,
        optimizer=AdamConfig(learning_rate=cfg["lr"]),
        solver_config=_solver_config(cfg),
        init=init,
    )

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fileio.write_weights(out_dir / "weights.bin", result.weights, height, width)
    lines = ["step,loss,ce,side,reg"]
    for step, total, ce, side, reg in result.trace:
        lines.append(f"{int(step)},{total},{ce},{side},{reg}")
    (out_dir / "trace.csv").write_text("\n".join(lines) + "\n")
    report = evaluate(result.labels, gt, tolerance=cfg["tolerance"])
    _write_json(out_dir / "eval_report.json", report.to_json_dict())
    _write_json(out_dir / "run_config.json", cfg)
    print(
        f"trained {result.steps} steps (converged={result.converged}), "
        f"ARAND {report.arand:.4f} -> {out_dir}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_eval(cfg: dict) -> int:
    pred = fileio.read_label_image(cfg["pred"])
    gt = fileio.read_label_image(cfg["gt"])
    report = evaluate(pred, gt, tolerance=cfg["tolerance"])
    payload = report.to_json_dict()
    if cfg.get("out"):
        _write_json(cfg["out"], payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    if cfg.get("save_config"):
        _write_json(cfg["save_config"], cfg)
    return EXIT_OK


def _cmd_seed(cfg: dict) -> int:
    gt = fileio.read_label_image(cfg["gt"])
    seeds = oracle_seeds(gt, mode=cfg["mode"], rng_seed=cfg["rng_seed"])
    fileio.write_seeds_csv(cfg["out"], seeds, width=gt.shape[1])
    if cfg.get("save_config"):
        _write_json(cfg["save_config"], cfg)
    return EXIT_OK


_DISPATCH = {
    "solve": _cmd_solve,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "seed": _cmd_seed,
}


def _dispatch(cfg: dict) -> int:
    command = cfg.get("command")
    if command not in _DISPATCH:
        raise ValidationError(f"unknown command {command!r} in run config")
    with _thread_limit(cfg.get("threads", 1)):
        return _DISPATCH[command](cfg)


# ---------------------------------------------------------------- parsing


def _abspath(value):
    return str(Path(value).resolve()) if value is not None else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffwalker",
        description="Seeded segmentation by linear diffusion with learnable edge weights.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--threads", type=int, default=None,
                       help="BLAS thread cap (default: hardware concurrency; "
                            "DIFFWALKER_THREADS overrides)")
        p.add_argument("--solver", choices=["auto", "direct", "cg"], default="auto")
        p.add_argument("--cg-rtol", type=float, default=1e-10)
        p.add_argument("--direct-limit", type=int, default=200_000)

    p = sub.add_parser("solve", help="diffuse seeds through given or image-derived weights")
    p.add_argument("--weights", help="binary edge-weight file")
    p.add_argument("--image", help="grayscale PGM; weights become exp(-beta * contrast^2)")
    p.add_argument("--beta", type=float, help="contrast sensitivity for --image")
    p.add_argument("--seeds", required=True, help="seed CSV (row,col,label)")
    p.add_argument("--out-dir", required=True)
    add_common(p)

    p = sub.add_parser("train", help="fit one diffusivity per edge to a ground truth")
    p.add_argument("--gt", required=True, help="ground-truth label image (16-bit PGM or CSV)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--seeds", help="seed CSV")
    group.add_argument("--seed-mode", choices=["sparse", "extended"],
                       help="generate oracle seeds from the ground truth")
    p.add_argument("--mode", choices=["exact", "sampled", "pruned"], default="exact")
    p.add_argument("--n", type=int, default=1024, help="edges sampled per backward pass")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--loss", choices=["side-ce", "log-barrier"], default="side-ce")
    p.add_argument("--alpha", type=float, default=None,
                   help="side-loss weight (default 1e-2 side-ce, 1e-5 log-barrier)")
    p.add_argument("--gamma", type=float, default=1e-5, help="parameter decay weight")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--image", help="optional PGM whose contrast map initializes the weights")
    p.add_argument("--beta", type=float, help="contrast sensitivity for --image")
    p.add_argument("--tolerance", type=int, default=2, help="evaluation boundary tolerance")
    p.add_argument("--out-dir", required=True)
    add_common(p)

    p = sub.add_parser("eval", help="VOI / ARAND report for a predicted labeling")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tolerance", type=int, default=2)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--save-config", help="write the replayable run config here")
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("seed", help="oracle seeds from a ground-truth labeling")
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", choices=["sparse", "extended"], default="sparse")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True, help="seed CSV path")
    p.add_argument("--save-config", help="write the replayable run config here")
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("replay", help="re-run a saved run config byte-identically")
    p.add_argument("config", help="run_config.json from a previous run")

    return parser


def _config_from_args(args: argparse.Namespace) -> dict:
    threads = _resolve_threads(getattr(args, "threads", None))
    if args.command == "solve":
        return {
            "command": "solve",
            "weights": _abspath(args.weights),
            "image": _abspath(args.image),
            "beta": args.beta,
            "seeds": _abspath(args.seeds),
            "out_dir": _abspath(args.out_dir),
            "solver": args.solver,
            "cg_rtol": args.cg_rtol,
            "direct_limit": args.direct_limit,
            "threads": threads,
        }
    if args.command == "train":
        alpha = args.alpha
        if alpha is None:
            alpha = 1e-2 if args.loss == "side-ce" else 1e-5
        return {
            "command": "train",
            "gt": _abspath(args.gt),
            "seeds": _abspath(args.seeds),
            "seed_mode": args.seed_mode,
            "mode": args.mode,
            "n": args.n,
            "epochs": args.epochs,
            "loss": args.loss,
            "alpha": alpha,
            "gamma": args.gamma,
            "lr": args.lr,
            "rng_seed": args.rng_seed,
            "image": _abspath(args.image),
            "beta": args.beta,
            "tolerance": args.tolerance,
            "out_dir": _abspath(args.out_dir),
            "solver": args.solver,
            "cg_rtol": args.cg_rtol,
            "direct_limit": args.direct_limit,
            "threads": threads,
        }
    if args.command == "eval":
        return {
            "command": "eval",
            "pred": _abspath(args.pred),
            "gt": _abspath(args.gt),
            "tolerance": args.tolerance,
            "out": _abspath(args.out),
            "save_config": _abspath(args.save_config),
            "threads": threads,
        }
    if args.command == "seed":
        return {
            "command": "seed",
            "gt": _abspath(args.gt),
            "mode": args.mode,
            "rng_seed": args.rng_seed,
            "out": _abspath(args.out),
            "save_config": _abspath(args.save_config),
            "threads": threads,
        }
    raise ValidationError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            cfg = json.loads(Path(args.config).read_text())
        else:
            cfg = _config_from_args(args)
        return _dispatch(cfg)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except SingularSystemError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SINGULAR
    except SolverConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
