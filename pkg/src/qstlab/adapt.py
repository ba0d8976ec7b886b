"""POVM orientation selection by mixed-entropy maximization.

The selection heuristic for a weighted particle ensemble and a candidate
POVM is ``f = S(p_mean) - sum_i w_i S(p_i)`` with ``p_mean`` the Born
distribution of the weighted mean state and ``S`` the natural-log Shannon
entropy. This equals the classical mutual information between the particle
label (distributed by the weights) and the measurement outcome, which
:func:`mutual_information` computes independently from the joint
distribution; the two implementations are kept separate on purpose and
cross-checked in the test suite. Orientations are chosen by evaluating the
heuristic on a set of random candidates and keeping the argmax.
"""

from __future__ import annotations

import numpy as np

from .povm import ProductPovm, build_povm, random_orientation
from .qcore import born_probabilities

DEFAULT_CANDIDATES = 40


def _entropy(p: np.ndarray) -> np.ndarray:
    """Natural-log entropy along the last axis, with 0 * ln(0) = 0."""
    p = np.clip(p, 0.0, None)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def mixed_entropy(particles: np.ndarray, weights: np.ndarray, povm: ProductPovm | np.ndarray) -> float:
    """Entropy of the mean state's outcome distribution minus mean particle entropy."""
    weights = np.asarray(weights, dtype=float)
    mean_state = np.einsum("b,bij->ij", weights, particles)
    stacked = np.concatenate([mean_state[None], particles])
    probs = born_probabilities(stacked, povm)
    entropies = _entropy(probs)
    return float(entropies[0] - weights @ entropies[1:])


def mutual_information(particles: np.ndarray, weights: np.ndarray, povm: ProductPovm | np.ndarray) -> float:
    """Mutual information between particle label and outcome, from the joint.

    Builds the joint ``p(x, y) = w_x * p(y|x)`` explicitly and sums
    ``p(x, y) * ln(p(y|x) / p(y))`` with zero-probability terms dropped.
    """
    weights = np.asarray(weights, dtype=float)
    cond = born_probabilities(particles, povm)  # (B, K)
    joint = weights[:, None] * cond
    marginal = joint.sum(axis=0)
    mask = joint > 0.0
    ratio = np.where(mask, cond / np.where(marginal > 0.0, marginal, 1.0), 1.0)
    return float(np.sum(joint * np.log(ratio), where=mask))


def choose_povm(
    particles: np.ndarray,
    weights: np.ndarray,
    family: str,
    n_qubits: int,
    n_candidates: int,
    rng: np.random.Generator,
) -> ProductPovm:
    """Best of ``n_candidates`` random orientations under the mixed-entropy heuristic.

    Ties keep the earliest candidate; deterministic given the generator.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be at least 1")
    best_povm = None
    best_f = -np.inf
    for _ in range(n_candidates):
        candidate = build_povm(family, random_orientation(rng, n_qubits), n_qubits)
        f = mixed_entropy(particles, weights, candidate)
        if f > best_f:
            best_f = f
            best_povm = candidate
    return best_povm


def landscape_scan(
    particles: np.ndarray,
    weights: np.ndarray,
    family: str,
    grid: int,
    n_qubits: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Heuristic values on a 2-D grid of X-axis rotation angles.

    Axis 0 varies qubit 0's X angle, axis 1 qubit 1's X angle, both over
    ``grid`` points on [0, 2*pi); all other angles stay zero. Returns
    ``(axis_values, f_matrix)``.
    """
    if grid < 2:
        raise ValueError("grid resolution must be at least 2")
    if n_qubits < 2:
        raise ValueError("the scan varies two qubits' angles; need n_qubits >= 2")
    axis = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    values = np.empty((grid, grid))
    for i, a0 in enumerate(axis):
        for j, a1 in enumerate(axis):
            angles = np.zeros((n_qubits, 3))
            angles[0, 0] = a0
            angles[1, 0] = a1
            values[i, j] = mixed_entropy(particles, weights, build_povm(family, angles, n_qubits))
    return axis, values
