"""Command-line interface.

Subcommands: ``simulate``, ``train``, ``evaluate``, ``benchmark-runtime``,
``landscape``, ``serve-source``. Exit codes: 0 success, 2 configuration or
usage error, 3 wire-protocol error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .. import naqst, nn
from ..sources import SimulatorSource, session_seed_sequences
from .config import ConfigError, RunConfig, build_config, load_config_file
from .protocol import ProtocolError, StdioSource, serve_source
from . import experiments
from .experiments import (
    LANDSCAPE_COLUMNS,
    RESULT_COLUMNS,
    SUMMARY_COLUMNS,
    TIMING_COLUMNS,
    episode_config,
    landscape_rows,
    result_rows,
    run_trials,
    write_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="root random seed")
    parser.add_argument("--config", default=None, help="JSON config file; flags override it")
    parser.add_argument("--out", default=None, help="output file path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qstlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one algorithm on simulated states")
    _common_flags(sim)
    sim.add_argument("--algo", dest="algorithm", choices=("standard", "abqt", "naqst"))
    sim.add_argument("--family", choices=("basis", "trine", "sic", "six"))
    sim.add_argument("--adaptive", action="store_true", default=None)
    sim.add_argument("--copies", type=int)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--batch", type=int)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--n-bank", dest="n_bank", type=int)
    sim.add_argument("--prior", choices=("pure-haar", "mixed-hs"))
    sim.add_argument("--checkpoint", help="trained parameters (required for naqst)")
    sim.add_argument(
        "--source",
        choices=("sim", "stdio"),
        default="sim",
        help="stdio speaks the measurement protocol on stdin/stdout (naqst only)",
    )

    tr = sub.add_parser("train", help="train the neural estimator's heads")
    _common_flags(tr)
    tr.add_argument("--episodes", type=int, default=2000)
    tr.add_argument("--family", choices=("basis", "trine", "sic", "six"))
    tr.add_argument("--adaptive", action="store_true", default=None)
    tr.add_argument("--copies", type=int)
    tr.add_argument("--steps", type=int)
    tr.add_argument("--n-bank", dest="n_bank", type=int)
    tr.add_argument("--probes", type=int, default=4, help="antithetic probe pairs per update")
    tr.add_argument("--sigma", type=float, default=0.05)
    tr.add_argument("--lr", type=float, default=0.02)

    ev = sub.add_parser("evaluate", help="trained checkpoint vs baselines on shared states")
    _common_flags(ev)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--family", choices=("basis", "trine", "sic", "six"))
    ev.add_argument("--adaptive", action="store_true", default=None)
    ev.add_argument("--copies", type=int)
    ev.add_argument("--trials", type=int)
    ev.add_argument("--n-bank", dest="n_bank", type=int)
    ev.add_argument("--baselines", default="abqt,standard")

    bench = sub.add_parser("benchmark-runtime", help="reconstruction-time scaling sweep")
    _common_flags(bench)
    bench.add_argument("--algos", default="naqst,abqt")
    bench.add_argument("--copies-grid", default="1000,10000,100000,1000000")
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--family", choices=("basis", "trine", "sic", "six"))
    bench.add_argument("--checkpoint")

    land = sub.add_parser("landscape", help="heuristic values over a 2-D orientation grid")
    _common_flags(land)
    land.add_argument("--family", choices=("basis", "trine", "sic", "six"))
    land.add_argument("--grid", type=int, default=64)
    land.add_argument("--bank-size", type=int, default=30)

    serve = sub.add_parser("serve-source", help="expose the simulator over the stdio protocol")
    _common_flags(serve)
    serve.add_argument("--n-qubits", type=int, default=2)
    serve.add_argument("--prior", choices=("pure-haar", "mixed-hs"), default="mixed-hs")

    return parser


def _config_from_args(args, **extra) -> RunConfig:
    file_doc = load_config_file(args.config) if args.config else None
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "algorithm",
            "family",
            "adaptive",
            "copies",
            "steps",
            "batch",
            "trials",
            "n_bank",
            "prior",
            "seed",
            "checkpoint",
            "out",
        )
    }
    overrides.update(extra)
    return build_config(file_doc, **overrides)


def _load_model(cfg: RunConfig) -> nn.ModelParameters | None:
    if cfg.algorithm != "naqst":
        return None
    if cfg.checkpoint:
        model, _ = nn.load_checkpoint(cfg.checkpoint)
        return model
    raise ConfigError("naqst needs --checkpoint with trained parameters")


def _require_out(cfg: RunConfig) -> str:
    if not cfg.out:
        raise ConfigError("this command needs --out for its CSV output")
    return cfg.out


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    if args.source == "stdio":
        if cfg.algorithm != "naqst":
            raise ConfigError("--source stdio drives the neural estimator only")
        model = _load_model(cfg)
        _, algo_ss = session_seed_sequences(cfg.seed)
        source = StdioSource(sys.stdin, sys.stdout, cfg.n_qubits)
        trajectory = naqst.reconstruct(
            source,
            episode_config(cfg),
            model,
            np.random.default_rng(algo_ss),
            notify=source.send_estimate,
        )
        source.close()
        rows = result_rows(cfg, [trajectory])
        write_csv(_require_out(cfg), RESULT_COLUMNS, rows, cfg)
        return EXIT_OK
    model = _load_model(cfg)
    trajectories = run_trials(cfg, model)
    write_csv(_require_out(cfg), RESULT_COLUMNS, result_rows(cfg, trajectories), cfg)
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _config_from_args(args, algorithm="naqst")
    out = _require_out(cfg)
    model0 = nn.init_model(cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    result = naqst.train(
        episode_config(cfg),
        args.episodes,
        model0,
        rng,
        n_probes=args.probes,
        sigma=args.sigma,
        hyper=nn.AdamHyper(lr=args.lr),
        checkpoint_path=out,
        config_hash=experiments.config_hash(cfg),
        log_every=1,
    )
    print(f"trained {args.episodes} episodes; best validation loss {result.best_validation:.4f}")
    print(f"checkpoint written to {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    cfg = _config_from_args(args, algorithm="naqst")
    model, _ = nn.load_checkpoint(cfg.checkpoint)
    cells = [cfg]
    for name in [b.strip() for b in args.baselines.split(",") if b.strip()]:
        cells.append(cfg.replace(algorithm=name, checkpoint=None))
    rows = experiments.experiment_accuracy(cells, model, shared_states=True)
    write_csv(_require_out(cfg), SUMMARY_COLUMNS, rows, cfg)
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    algorithms = [a.strip() for a in args.algos.split(",") if a.strip()]
    copies_values = [int(v) for v in args.copies_grid.split(",") if v.strip()]
    cfg = _config_from_args(args, algorithm=algorithms[0] if algorithms else None)
    model = None
    if "naqst" in algorithms:
        if not cfg.checkpoint:
            raise ConfigError("benchmarking naqst needs --checkpoint")
        model, _ = nn.load_checkpoint(cfg.checkpoint)
    rows = experiments.experiment_runtime(cfg, algorithms, copies_values, args.reps, model)
    write_csv(_require_out(cfg), TIMING_COLUMNS, rows, cfg)
    return EXIT_OK


def _cmd_landscape(args) -> int:
    cfg = _config_from_args(args)
    rows = landscape_rows(cfg, args.grid, args.bank_size)
    write_csv(_require_out(cfg), LANDSCAPE_COLUMNS, rows, cfg)
    return EXIT_OK


def _cmd_serve_source(args) -> int:
    seed = args.seed if args.seed is not None else 0
    return serve_source(sys.stdin, sys.stdout, seed, args.n_qubits, args.prior)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "benchmark-runtime": _cmd_benchmark,
        "landscape": _cmd_landscape,
        "serve-source": _cmd_serve_source,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":
    sys.exit(main())
