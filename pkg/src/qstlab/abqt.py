"""Adaptive Bayesian tomography baseline: a particle filter over state space.

A bank of candidate states carries posterior weights updated by Bayes' rule
after every measured batch. When the effective sample size drops below a
threshold the bank is rejuvenated: systematic resampling followed by
Metropolis-Hastings mutation whose acceptance ratio is evaluated against
the full measurement history, which is what makes this baseline's cost
grow with the amount of data analyzed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import adapt, qcore
from .povm import MeasurementRecord, build_povm, random_orientation
from .sources import MeasurementSource, TrajectoryStep, score_step

DEFAULT_MH_STEPS = 10
DEFAULT_STEP_SCALE = 0.1
DEFAULT_ESS_FRACTION = 0.5


class DegeneratePosteriorError(RuntimeError):
    """Every particle assigns zero likelihood to the observed data."""


@dataclass
class WeightedBank:
    """Particles with normalized posterior weights."""

    particles: np.ndarray  # (B, d, d)
    weights: np.ndarray  # (B,), nonnegative, sums to 1

    @property
    def size(self) -> int:
        return self.particles.shape[0]


def initial_bank(n_bank: int, d: int, rng: np.random.Generator, prior: str = "mixed-hs") -> WeightedBank:
    particles = np.stack([qcore.random_state(prior, d, rng) for _ in range(n_bank)])
    return WeightedBank(particles, np.full(n_bank, 1.0 / n_bank))


def bayes_update(bank: WeightedBank, record: MeasurementRecord) -> WeightedBank:
    """Posterior reweighting ``w_i' ~ w_i * prod_y p_iy^{n_y}`` in log space.

    Particles are untouched. A record with zero copies returns the bank
    unchanged; if every particle has zero likelihood the update raises
    ``DegeneratePosteriorError`` so the caller can refresh from the prior.
    """
    counts = np.asarray(record.counts, dtype=float)
    if counts.sum() == 0:
        return bank
    probs = qcore.born_probabilities(bank.particles, record.povm)
    hit = counts > 0
    with np.errstate(divide="ignore"):
        log_p = np.log(probs[:, hit])
    log_w = np.where(bank.weights > 0, np.log(np.where(bank.weights > 0, bank.weights, 1.0)), -np.inf)
    log_w = log_w + log_p @ counts[hit]
    top = log_w.max()
    if not np.isfinite(top):
        raise DegeneratePosteriorError("all particles have zero posterior weight")
    w = np.exp(log_w - top)
    return WeightedBank(bank.particles, w / w.sum())


def effective_sample_size(weights: np.ndarray) -> float:
    """``1 / sum(w_i^2)``, between 1 and the bank size for normalized weights."""
    return float(1.0 / np.sum(np.square(weights)))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: indices drawn from one stratified uniform."""
    n = weights.shape[0]
    positions = (np.arange(n) + rng.uniform()) / n
    return np.searchsorted(np.cumsum(weights), positions).clip(0, n - 1)


def bank_mean(bank: WeightedBank) -> np.ndarray:
    """Weighted average of the bank; always a valid state."""
    return np.einsum("b,bij->ij", bank.weights, bank.particles)


def weighted_spread(bank: WeightedBank) -> float:
    """Root-mean-square Frobenius distance of particles from the bank mean."""
    mean = bank_mean(bank)
    sq = np.sum(np.abs(bank.particles - mean) ** 2, axis=(1, 2))
    return float(np.sqrt(bank.weights @ sq))


_LOG_FLOOR = 1e-300  # log(clip) turns a zero-probability hit into ~-690 * count


def _history_arrays(history: list[MeasurementRecord]) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Flatten observed outcomes: transposed operators as rows, plus counts.

    With operators laid out as ``Pi.T.reshape(d*d)``, the probability table
    for a stack of states is one matmul: ``states.reshape(B, d*d) @ ops.T``;
    real and imaginary parts are kept separate so it runs as two real
    matmuls. Zero-count outcomes contribute nothing and are dropped.
    """
    if not history:
        return None
    ops = []
    counts = []
    for rec in history:
        c = np.asarray(rec.counts, dtype=float)
        hit = c > 0
        if hit.any():
            block = rec.povm.outcomes[hit]
            ops.append(block.swapaxes(-1, -2).reshape(block.shape[0], -1))
            counts.append(c[hit])
    if not ops:
        return None
    flat = np.concatenate(ops)
    return np.ascontiguousarray(flat.real.T), np.ascontiguousarray(flat.imag.T), np.concatenate(counts)


def _history_loglik(states: np.ndarray, packed: tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    ops_re, ops_im, counts = packed
    flat = states.reshape(states.shape[0], -1)
    probs = flat.real @ ops_re - flat.imag @ ops_im
    return np.log(np.clip(probs, _LOG_FLOOR, None)) @ counts


def resample_mh(
    bank: WeightedBank,
    history: list[MeasurementRecord],
    rng: np.random.Generator,
    mh_steps: int = DEFAULT_MH_STEPS,
    step_scale: float = DEFAULT_STEP_SCALE,
    scale_multipliers: tuple[float, ...] = (1.0,),
) -> WeightedBank:
    """Systematic resample, then mutate every particle by Metropolis-Hastings.

    Proposals perturb the particle's purification by a half-normal step of
    scale ``step_scale`` and are accepted on the likelihood of the full
    history. ``scale_multipliers`` cycles extra proposal scales across
    iterations (a ladder) so chains can both escape a collapsed bank and
    refine locally. With an empty history every proposal is accepted (free
    diffusion). Weights come back uniform.
    """
    idx = systematic_resample(bank.weights, rng)
    particles = bank.particles[idx].copy()
    n = particles.shape[0]
    if mh_steps > 0:
        packed = _history_arrays(history)
        current_ll = np.zeros(n) if packed is None else _history_loglik(particles, packed)
        for it in range(mh_steps):
            scale = step_scale * scale_multipliers[it % len(scale_multipliers)]
            eps = np.clip(np.abs(rng.normal(0.0, scale, size=n)), 0.0, 1.0)
            vs = qcore.purify(particles)
            proposals = qcore.depurify(qcore.perturb_purification(vs, eps, rng))
            proposal_ll = np.zeros(n) if packed is None else _history_loglik(proposals, packed)
            log_u = np.log(rng.uniform(size=n))
            accept = log_u < (proposal_ll - current_ll)
            particles[accept] = proposals[accept]
            current_ll[accept] = proposal_ll[accept]
    return WeightedBank(particles, np.full(n, 1.0 / n))


def run_abqt(
    source: MeasurementSource,
    schedule: list[int],
    family: str,
    adaptive: bool,
    n_bank: int,
    rng: np.random.Generator,
    *,
    n_candidates: int = adapt.DEFAULT_CANDIDATES,
    mh_steps: int = DEFAULT_MH_STEPS,
    step_scale: float = DEFAULT_STEP_SCALE,
    ess_fraction: float = DEFAULT_ESS_FRACTION,
    prior: str = "mixed-hs",
    scale_proposals_to_spread: bool = True,
    scale_multipliers: tuple[float, ...] = (1.0,),
) -> list[TrajectoryStep]:
    """Full reconstruction run; returns one trajectory step per batch.

    Orientation choice is heuristic-driven when ``adaptive`` (random on the
    first step, before any data) and uniform-random otherwise. The bank is
    rejuvenated whenever ESS falls below ``ess_fraction * n_bank``. With
    ``scale_proposals_to_spread`` the MH proposal scale for each rejuvenation
    is capped at the current weighted bank spread, so proposals track the
    sharpening posterior instead of staying at the prior's scale.
    """
    if not schedule:
        raise ValueError("schedule must be nonempty")
    n = source.n_qubits
    d = 2**n
    true_state = getattr(source, "true_state", None)
    bank = initial_bank(n_bank, d, rng, prior)
    history: list[MeasurementRecord] = []
    steps: list[TrajectoryStep] = []
    copies_cum = 0
    for t, m in enumerate(schedule):
        t0 = time.perf_counter()
        if adaptive and t > 0:
            povm_t = adapt.choose_povm(bank.particles, bank.weights, family, n, n_candidates, rng)
        else:
            povm_t = build_povm(family, random_orientation(rng, n), n)
        s0 = time.perf_counter()
        counts = source.measure(povm_t, m)
        sample_dt = time.perf_counter() - s0
        record = MeasurementRecord(povm_t, counts)
        history.append(record)
        try:
            bank = bayes_update(bank, record)
        except DegeneratePosteriorError:
            bank = initial_bank(n_bank, d, rng, prior)
            for rec in history:
                try:
                    bank = bayes_update(bank, rec)
                except DegeneratePosteriorError:
                    bank = WeightedBank(bank.particles, np.full(n_bank, 1.0 / n_bank))
        if effective_sample_size(bank.weights) < ess_fraction * n_bank:
            scale = step_scale
            if scale_proposals_to_spread:
                scale = min(step_scale, max(weighted_spread(bank), 1e-4))
            bank = resample_mh(bank, history, rng, mh_steps, scale, scale_multipliers)
        estimate = bank_mean(bank)
        copies_cum += m
        wall = time.perf_counter() - t0 - sample_dt
        b, h = score_step(estimate, true_state)
        steps.append(TrajectoryStep(t, copies_cum, estimate, b, h, wall, povm_t.angles))
    return steps
