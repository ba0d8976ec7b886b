"""Neural-adaptive tomography: a learned recurrent estimator.

Each step measures one batch, compares every particle's Born distribution
to the batch's empirical frequencies, and lets small networks decide the
particle weights, per-particle perturbation sizes, and a score for the
step's weighted-mean guess. Particles are refined by keep-the-best
perturbation rounds against the current batch only, so the per-step cost
never depends on how much data has been analyzed. The running output is
the softmax-over-scores combination of all step guesses, a convex mixture
of valid states and therefore always a valid state itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import adapt, nn, qcore
from .povm import MeasurementRecord, ProductPovm, build_povm, random_orientation
from .sources import MeasurementSource, SimulatorSource, TrajectoryStep, score_step

DEFAULT_N_BANK = 100
DEFAULT_N_RESAMPLE = 16
DEFAULT_N_STEPS = 4
DEFAULT_SCHEDULE = [50 * 2**t for t in range(12)]


@dataclass
class EpisodeConfig:
    """Shape of one reconstruction episode."""

    schedule: list[int] = field(default_factory=lambda: list(DEFAULT_SCHEDULE))
    n_bank: int = DEFAULT_N_BANK
    n_resample: int = DEFAULT_N_RESAMPLE
    n_steps: int = DEFAULT_N_STEPS
    family: str = "sic"
    adaptive: bool = False
    n_candidates: int = adapt.DEFAULT_CANDIDATES
    prior: str = "mixed-hs"
    n_qubits: int = 2
    eps_max: float = nn.EPSILON_MAX

    def __post_init__(self):
        if len(self.schedule) < 1:
            raise ValueError("schedule must have at least one entry")
        if any(m <= 0 for m in self.schedule):
            raise ValueError("schedule entries must be positive")
        for name in ("n_bank", "n_resample", "n_steps", "n_candidates", "n_qubits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ParticleBank:
    particles: np.ndarray  # (B, d, d)
    weights: np.ndarray  # (B,)
    epsilons: np.ndarray  # (B,)

    @property
    def size(self) -> int:
        return self.particles.shape[0]


@dataclass
class CellState:
    """State threaded between steps: the bank, all past guesses, and the last record."""

    bank: ParticleBank
    guesses: list[tuple[np.ndarray, float]]
    step: int
    last_record: MeasurementRecord | None = None


def new_cell_stats() -> dict[str, int]:
    """Operation counters for the cost-independence check."""
    return {"born_vectors": 0, "perturbations": 0, "purifications": 0, "head_rows": 0}


def initial_state(config: EpisodeConfig, rng: np.random.Generator) -> CellState:
    d = 2**config.n_qubits
    particles = np.stack([qcore.random_state(config.prior, d, rng) for _ in range(config.n_bank)])
    bank = ParticleBank(
        particles,
        np.full(config.n_bank, 1.0 / config.n_bank),
        np.zeros(config.n_bank),
    )
    return CellState(bank, [], 0)


def resample_step(
    bank: ParticleBank,
    frequencies: np.ndarray,
    povm: ProductPovm,
    n_resample: int,
    rng: np.random.Generator,
    stats: dict[str, int] | None = None,
) -> ParticleBank:
    """One keep-the-best refinement round.

    Every particle is purified and perturbed in ``n_resample`` random
    orthogonal directions by its own step size; the candidate (original
    included) whose Born distribution is L2-closest to the empirical
    frequencies survives. Per-particle distance to the frequencies never
    increases.
    """
    particles = bank.particles
    b = particles.shape[0]
    d = particles.shape[1]
    vs = qcore.purify(particles)  # (B, d*d)
    tiled = np.broadcast_to(vs[:, None, :], (b, n_resample, d * d))
    eps = np.broadcast_to(bank.epsilons[:, None], (b, n_resample))
    perturbed = qcore.perturb_purification(tiled, eps, rng)
    candidates = qcore.depurify(perturbed)  # (B, R, d, d)
    cand_probs = qcore.born_probabilities(candidates, povm)
    base_probs = qcore.born_probabilities(particles, povm)
    cand_dist = np.sqrt(((cand_probs - frequencies) ** 2).sum(axis=-1))
    base_dist = np.sqrt(((base_probs - frequencies) ** 2).sum(axis=-1))
    best = cand_dist.argmin(axis=1)
    rows = np.arange(b)
    improved = cand_dist[rows, best] < base_dist
    new_particles = np.where(improved[:, None, None], candidates[rows, best], particles)
    if stats is not None:
        stats["born_vectors"] += b * (n_resample + 1)
        stats["perturbations"] += b * n_resample
        stats["purifications"] += b
    return ParticleBank(new_particles, bank.weights, bank.epsilons)


def _particle_features(probs: np.ndarray, frequencies: np.ndarray, copies: int, step: int) -> np.ndarray:
    l1 = np.abs(probs - frequencies).sum(axis=1)
    l2 = np.sqrt(((probs - frequencies) ** 2).sum(axis=1))
    b = probs.shape[0]
    return np.stack(
        [l1, l2, np.full(b, np.log1p(copies)), np.full(b, np.log1p(step))], axis=1
    )


def _score_summary(features: np.ndarray, weights: np.ndarray, copies: int, step: int) -> np.ndarray:
    l1, l2 = features[:, 0], features[:, 1]
    weight_entropy = -np.sum(np.where(weights > 0, weights * np.log(np.where(weights > 0, weights, 1.0)), 0.0))
    return np.array(
        [weights @ l1, weights @ l2, l1.min(), l2.min(), weight_entropy, np.log1p(copies), np.log1p(step)]
    )


def cell_step(
    state: CellState,
    record: MeasurementRecord,
    model: nn.ModelParameters,
    config: EpisodeConfig,
    rng: np.random.Generator,
    stats: dict[str, int] | None = None,
) -> tuple[CellState, np.ndarray, float]:
    """One recurrent cell: weigh, guess, score, redraw, refine, aggregate.

    Returns ``(next_state, estimate, confidence)`` where the estimate is the
    softmax-over-scores mixture of all step guesses so far and confidence is
    the mixture weight of the current step's guess.
    """
    copies = record.total
    frequencies = record.frequencies
    probs = qcore.born_probabilities(state.bank.particles, record.povm)
    features = _particle_features(probs, frequencies, copies, state.step)
    weights = nn.weight_head(model, features)
    epsilons = nn.epsilon_head(model, features, config.eps_max)
    guess = np.einsum("b,bij->ij", weights, state.bank.particles)
    score = nn.score_head(model, _score_summary(features, weights, copies, state.step))
    if stats is not None:
        stats["born_vectors"] += state.bank.size
        stats["head_rows"] += 2 * state.bank.size + 1

    idx = rng.choice(state.bank.size, size=state.bank.size, p=weights)
    bank = ParticleBank(
        state.bank.particles[idx],
        np.full(state.bank.size, 1.0 / state.bank.size),
        epsilons[idx],
    )
    for _ in range(config.n_steps):
        bank = resample_step(bank, frequencies, record.povm, config.n_resample, rng, stats)

    guesses = state.guesses + [(guess, score)]
    guess_weights = nn.softmax(np.array([s for _, s in guesses]))
    estimate = np.einsum("t,tij->ij", guess_weights, np.stack([g for g, _ in guesses]))
    next_state = CellState(bank, guesses, state.step + 1, record)
    return next_state, estimate, float(guess_weights[-1])


def _choose_orientation(
    state: CellState, config: EpisodeConfig, rng: np.random.Generator
) -> ProductPovm:
    # First step has no data; adaptivity starts once a refined bank exists.
    if config.adaptive and state.step > 0:
        return adapt.choose_povm(
            state.bank.particles,
            state.bank.weights,
            config.family,
            config.n_qubits,
            config.n_candidates,
            rng,
        )
    return build_povm(config.family, random_orientation(rng, config.n_qubits), config.n_qubits)


def run_training_episode(
    true_state: np.ndarray,
    config: EpisodeConfig,
    model: nn.ModelParameters,
    rng: np.random.Generator,
    stats: dict[str, int] | None = None,
) -> float:
    """Simulated episode loss: sum over steps of HS distance to the truth.

    The true state is used only to sample counts and to score estimates;
    the estimator itself sees nothing but the counts.
    """
    loss = 0.0
    state = initial_state(config, rng)
    for copies in config.schedule:
        povm_t = _choose_orientation(state, config, rng)
        counts = qcore.sample_counts(qcore.born_probabilities(true_state, povm_t), copies, rng)
        state, estimate, _ = cell_step(
            state, MeasurementRecord(povm_t, counts), model, config, rng, stats
        )
        loss += qcore.hs_distance(estimate, true_state)
    return loss


def reconstruct(
    source: MeasurementSource,
    config: EpisodeConfig,
    model: nn.ModelParameters,
    rng: np.random.Generator,
    notify=None,
) -> list[TrajectoryStep]:
    """Deployment loop: drive a measurement source, emit one estimate per step.

    ``notify(step, estimate, confidence)`` is called after each step when
    given (the stdio client uses it to stream estimates back to the source).
    """
    if source.n_qubits != config.n_qubits:
        raise ValueError(
            f"source has {source.n_qubits} qubits but the episode is configured for {config.n_qubits}"
        )
    true_state = getattr(source, "true_state", None)
    state = initial_state(config, rng)
    steps: list[TrajectoryStep] = []
    copies_cum = 0
    for t, copies in enumerate(config.schedule):
        t0 = time.perf_counter()
        povm_t = _choose_orientation(state, config, rng)
        s0 = time.perf_counter()
        counts = source.measure(povm_t, copies)
        sample_dt = time.perf_counter() - s0
        state, estimate, confidence = cell_step(
            state, MeasurementRecord(povm_t, counts), model, config, rng
        )
        copies_cum += copies
        wall = time.perf_counter() - t0 - sample_dt
        if notify is not None:
            notify(t, estimate, confidence)
        b, h = score_step(estimate, true_state)
        steps.append(TrajectoryStep(t, copies_cum, estimate, b, h, wall, povm_t.angles, confidence))
    return steps


def make_episode_loss(config: EpisodeConfig, specs: dict[str, nn.MlpSpec]):
    """Episode loss as a pure function of (parameter vector, episode seed)."""
    slices_model = nn.init_model(0, specs)  # layout only; values replaced per call

    def loss_fn(values: np.ndarray, seed: int) -> float:
        rng = np.random.default_rng(seed)
        true_state = qcore.random_state(config.prior, 2**config.n_qubits, rng)
        model = slices_model.with_values(values)
        return run_training_episode(true_state, config, model, rng)

    return loss_fn


@dataclass
class TrainResult:
    model: nn.ModelParameters
    history: list[dict]
    best_validation: float


def train(
    config: EpisodeConfig,
    episodes: int,
    model0: nn.ModelParameters,
    rng: np.random.Generator,
    *,
    n_probes: int = 4,
    sigma: float = 0.05,
    hyper: nn.AdamHyper = nn.AdamHyper(lr=0.02),
    n_validation: int = 8,
    checkpoint_every: int = 400,
    checkpoint_path=None,
    config_hash: str = "",
    log_every: int = 0,
) -> TrainResult:
    """Evolution-strategies training until ``episodes`` episodes are consumed.

    Every optimizer step spends ``2 * n_probes`` episodes. A fixed set of
    validation seeds is scored at each checkpoint and the best-validation
    parameters are returned, so the result is reproducible from the seeds
    alone.
    """
    if episodes < 1:
        raise ValueError("need at least one training episode")
    loss_fn = make_episode_loss(config, model0.specs)
    values = model0.values.copy()
    adam = nn.AdamState.zeros(values.size)
    validation_seeds = [int(s) for s in rng.integers(0, 2**63 - 1, size=n_validation)]

    def validate(v: np.ndarray) -> float:
        return float(np.mean([loss_fn(v, s) for s in validation_seeds]))

    best_val = validate(values)
    best_values = values.copy()
    history: list[dict] = []
    consumed = 0
    since_checkpoint = 0
    step = 0
    while consumed < episodes:
        grad = nn.estimate_gradient(loss_fn, values, rng, n_probes=n_probes, sigma=sigma)
        values, adam = nn.adam_step(values, grad, adam, hyper)
        consumed += 2 * n_probes
        since_checkpoint += 2 * n_probes
        step += 1
        if since_checkpoint >= checkpoint_every or consumed >= episodes:
            since_checkpoint = 0
            val = validate(values)
            history.append({"step": step, "episodes": consumed, "validation_loss": val})
            if log_every and (len(history) % log_every == 0):
                print(f"[train] episodes={consumed} validation_loss={val:.4f}")
            if val < best_val:
                best_val = val
                best_values = values.copy()
            if checkpoint_path is not None:
                nn.save_checkpoint(
                    checkpoint_path,
                    model0.with_values(best_values),
                    config_hash=config_hash,
                    training={
                        "episodes": consumed,
                        "validation_seeds": validation_seeds,
                        "best_validation": best_val,
                        "history": history,
                    },
                )
    return TrainResult(model0.with_values(best_values), history, best_val)


def simulate_episode_source(seed_sequence, prior: str, n_qubits: int) -> SimulatorSource:
    """Simulator with a hidden state drawn from the prior; for harness use."""
    rng = np.random.default_rng(seed_sequence)
    true_state = qcore.random_state(prior, 2**n_qubits, rng)
    return SimulatorSource(true_state, rng)
