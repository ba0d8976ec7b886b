"""Experiment drivers: seeded trial fans, CSV persistence, benchmark sweeps.

Every output CSV starts with two comment lines embedding the resolved
configuration and its content hash, then a header row. Rows are written
with ``repr`` floats, so re-running with the same seed reproduces the file
byte for byte apart from the wall-clock columns.
"""

from __future__ import annotations

import platform
import statistics
import time

import numpy as np

from .. import abqt, adapt, naqst, nn, qcore, standard_qst
from ..sources import SimulatorSource, TrajectoryStep, session_seed_sequences
from .config import RunConfig, SCHEMA_VERSION, canonical_json, config_hash

RESULT_COLUMNS = (
    "schema_version",
    "trial",
    "step",
    "copies",
    "bures_sq",
    "hs_distance",
    "wall_seconds",
    "angles",
    "config_hash",
)

SUMMARY_COLUMNS = (
    "schema_version",
    "algorithm",
    "family",
    "adaptive",
    "n_bank",
    "copies",
    "trials",
    "mean_bures_sq",
    "stderr_bures_sq",
    "mean_hs_distance",
    "stderr_hs_distance",
    "config_hash",
)

TIMING_COLUMNS = (
    "schema_version",
    "algorithm",
    "copies",
    "repetition",
    "analysis_seconds",
    "hardware",
    "config_hash",
)


def hardware_descriptor() -> str:
    return f"{platform.machine()}/{platform.system()}/python{platform.python_version()}"


def episode_config(cfg: RunConfig) -> naqst.EpisodeConfig:
    return naqst.EpisodeConfig(
        schedule=cfg.resolved_schedule(),
        n_bank=cfg.n_bank,
        n_resample=cfg.n_resample,
        n_steps=cfg.n_steps,
        family=cfg.family,
        adaptive=cfg.adaptive,
        n_candidates=cfg.n_candidates,
        prior=cfg.prior,
        n_qubits=cfg.n_qubits,
    )


def run_trajectory(
    cfg: RunConfig,
    source,
    algo_rng: np.random.Generator,
    model: nn.ModelParameters | None = None,
) -> list[TrajectoryStep]:
    """Dispatch one reconstruction run for the configured algorithm."""
    schedule = cfg.resolved_schedule()
    if cfg.algorithm == "standard":
        orientation = cfg.orientation
        return standard_qst.run_standard(source, schedule, cfg.family, algo_rng, orientation)
    if cfg.algorithm == "abqt":
        return abqt.run_abqt(
            source,
            schedule,
            cfg.family,
            cfg.adaptive,
            cfg.n_bank,
            algo_rng,
            n_candidates=cfg.n_candidates,
            mh_steps=cfg.mh_steps,
            step_scale=cfg.step_scale,
            prior=cfg.prior,
        )
    if model is None:
        raise ValueError("naqst runs need trained model parameters (checkpoint)")
    return naqst.reconstruct(source, episode_config(cfg), model, algo_rng)


def run_trials(
    cfg: RunConfig,
    model: nn.ModelParameters | None = None,
    true_states: list[np.ndarray] | None = None,
) -> list[list[TrajectoryStep]]:
    """Run ``cfg.trials`` seeded trials; trial i uses the i-th spawned stream pair.

    ``true_states`` overrides the per-trial prior draws so several
    algorithms can be scored on identical hidden states. Every emitted
    estimate is checked against the density-matrix invariants; a violation
    raises immediately.
    """
    root = np.random.SeedSequence(cfg.seed)
    trial_seeds = root.spawn(cfg.trials)
    trajectories = []
    for i in range(cfg.trials):
        source_ss, algo_ss = trial_seeds[i].spawn(2)
        source_rng = np.random.default_rng(source_ss)
        if true_states is not None:
            true_state = true_states[i]
        else:
            true_state = qcore.random_state(cfg.prior, 2**cfg.n_qubits, source_rng)
        source = SimulatorSource(true_state, source_rng)
        steps = run_trajectory(cfg, source, np.random.default_rng(algo_ss), model)
        for step in steps:
            reason = qcore.density_matrix_violation(step.estimate)
            if reason is not None:
                raise RuntimeError(
                    f"estimate invariant violated (trial {i}, step {step.step}): {reason}"
                )
        trajectories.append(steps)
    return trajectories


def _format_angles(angles: np.ndarray) -> str:
    return ";".join(repr(float(a)) for a in np.asarray(angles).reshape(-1))


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def write_csv(path, columns, rows, cfg: RunConfig | None = None, extra_header: dict | None = None) -> None:
    lines = []
    header_doc = dict(extra_header or {})
    if cfg is not None:
        header_doc["config"] = cfg.to_dict()
        header_doc["config_hash"] = config_hash(cfg)
    for key, value in header_doc.items():
        lines.append(f"# {key}={canonical_json(value) if isinstance(value, dict) else value}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_format_value(row.get(col)) for col in columns))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def result_rows(cfg: RunConfig, trajectories: list[list[TrajectoryStep]]) -> list[dict]:
    digest = config_hash(cfg)
    rows = []
    for trial, steps in enumerate(trajectories):
        for step in steps:
            rows.append(
                {
                    "schema_version": SCHEMA_VERSION,
                    "trial": trial,
                    "step": step.step,
                    "copies": step.copies,
                    "bures_sq": step.bures_sq,
                    "hs_distance": step.hs_distance,
                    "wall_seconds": step.wall_seconds,
                    "angles": _format_angles(step.angles),
                    "config_hash": digest,
                }
            )
    return rows


def summarize_cell(cfg: RunConfig, trajectories: list[list[TrajectoryStep]]) -> dict:
    """Mean and standard error of the final-step metrics across trials."""
    finals_b = [t[-1].bures_sq for t in trajectories]
    finals_h = [t[-1].hs_distance for t in trajectories]
    n = len(trajectories)
    stderr = lambda xs: (statistics.stdev(xs) / np.sqrt(n)) if n > 1 else 0.0
    return {
        "schema_version": SCHEMA_VERSION,
        "algorithm": cfg.algorithm,
        "family": cfg.family,
        "adaptive": cfg.adaptive,
        "n_bank": cfg.n_bank,
        "copies": sum(cfg.resolved_schedule()),
        "trials": n,
        "mean_bures_sq": float(np.mean(finals_b)),
        "stderr_bures_sq": float(stderr(finals_b)),
        "mean_hs_distance": float(np.mean(finals_h)),
        "stderr_hs_distance": float(stderr(finals_h)),
        "config_hash": config_hash(cfg),
    }


def experiment_accuracy(
    cells: list[RunConfig],
    model: nn.ModelParameters | None = None,
    shared_states: bool = False,
) -> list[dict]:
    """Run every grid cell and summarize; optionally share true states across cells.

    When ``shared_states`` is set all cells must agree on trials, seed,
    prior and n_qubits; the hidden states are then drawn once so cells are
    directly comparable (paired).
    """
    if not cells:
        return []
    true_states = None
    if shared_states:
        base = cells[0]
        for cell in cells[1:]:
            if (cell.trials, cell.seed, cell.prior, cell.n_qubits) != (
                base.trials,
                base.seed,
                base.prior,
                base.n_qubits,
            ):
                raise ValueError("shared_states requires matching trials/seed/prior/n_qubits")
        true_states = draw_true_states(base)
    return [summarize_cell(cfg, run_trials(cfg, model, true_states)) for cfg in cells]


def draw_true_states(cfg: RunConfig) -> list[np.ndarray]:
    """The per-trial hidden states that ``run_trials`` would draw for ``cfg``."""
    root = np.random.SeedSequence(cfg.seed)
    states = []
    for trial_ss in root.spawn(cfg.trials):
        source_ss, _ = trial_ss.spawn(2)
        rng = np.random.default_rng(source_ss)
        states.append(qcore.random_state(cfg.prior, 2**cfg.n_qubits, rng))
    return states


def experiment_runtime(
    base: RunConfig,
    algorithms: list[str],
    copies_values: list[int],
    repetitions: int = 3,
    model: nn.ModelParameters | None = None,
) -> list[dict]:
    """Median-of-repetitions analysis time per full reconstruction.

    One warmup run per algorithm (smallest copies value) is excluded.
    Sampling time is already excluded by the run loops; the reported number
    is the sum of per-step analysis times.
    """
    rows = []
    hardware = hardware_descriptor()
    for algorithm in algorithms:
        warmed = False
        for copies in copies_values:
            for rep in range(repetitions):
                cfg = base.replace(
                    algorithm=algorithm,
                    copies=copies,
                    schedule=None,
                    trials=1,
                    seed=base.seed + rep,
                )
                if not warmed:
                    run_trials(cfg, model)
                    warmed = True
                t0 = time.perf_counter()
                trajectories = run_trials(cfg, model)
                _ = time.perf_counter() - t0
                analysis = float(sum(s.wall_seconds for s in trajectories[0]))
                rows.append(
                    {
                        "schema_version": SCHEMA_VERSION,
                        "algorithm": algorithm,
                        "copies": copies,
                        "repetition": rep,
                        "analysis_seconds": analysis,
                        "hardware": hardware,
                        "config_hash": config_hash(cfg),
                    }
                )
    return rows


def landscape_rows(cfg: RunConfig, grid: int, bank_size: int = 30) -> list[dict]:
    """CSV rows of the adaptivity heuristic over a 2-D orientation grid."""
    root = np.random.SeedSequence(cfg.seed)
    rng = np.random.default_rng(root)
    d = 2**cfg.n_qubits
    particles = np.stack([qcore.random_state(cfg.prior, d, rng) for _ in range(bank_size)])
    weights = np.full(bank_size, 1.0 / bank_size)
    axis, values = adapt.landscape_scan(particles, weights, cfg.family, grid, cfg.n_qubits)
    digest = config_hash(cfg)
    rows = []
    for i, a0 in enumerate(axis):
        for j, a1 in enumerate(axis):
            rows.append(
                {
                    "schema_version": SCHEMA_VERSION,
                    "angle1": float(a0),
                    "angle2": float(a1),
                    "f": float(values[i, j]),
                    "config_hash": digest,
                }
            )
    return rows


LANDSCAPE_COLUMNS = ("schema_version", "angle1", "angle2", "f", "config_hash")
