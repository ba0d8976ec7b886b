"""Measurement sources: where outcome counts come from.

Reconstruction loops only interact with a source through ``measure``; the
true state never leaks to the estimator. The in-process ``SimulatorSource``
keeps the hidden state as an attribute so harness code can score estimates;
the stdio client in :mod:`qstlab.harness.protocol` has no such attribute.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import qcore
from .povm import ProductPovm


@runtime_checkable
class MeasurementSource(Protocol):
    n_qubits: int

    def measure(self, povm: ProductPovm, copies: int) -> np.ndarray:
        """Outcome counts from measuring ``copies`` fresh copies with ``povm``."""
        ...


class SimulatorSource:
    """Samples multinomial counts from a hidden true state."""

    def __init__(self, true_state: np.ndarray, rng: np.random.Generator):
        qcore.assert_density_matrix(true_state)
        self.true_state = true_state
        self.rng = rng
        self.n_qubits = int(np.log2(true_state.shape[0]).round())
        if 2**self.n_qubits != true_state.shape[0]:
            raise ValueError("simulator states must have power-of-two dimension")

    def measure(self, povm: ProductPovm, copies: int) -> np.ndarray:
        probs = qcore.born_probabilities(self.true_state, povm)
        return qcore.sample_counts(probs, copies, self.rng)


@dataclass
class TrajectoryStep:
    """Per-step output of a reconstruction run.

    ``wall_seconds`` is analysis time only; the source's sampling time is
    measured around the ``measure`` call and excluded. ``bures_sq`` and
    ``hs_distance`` are filled only when the source exposes its true state.
    """

    step: int
    copies: int  # cumulative copies measured through this step
    estimate: np.ndarray
    bures_sq: float | None
    hs_distance: float | None
    wall_seconds: float
    angles: np.ndarray
    confidence: float | None = None


def score_step(estimate: np.ndarray, true_state: np.ndarray | None) -> tuple[float | None, float | None]:
    if true_state is None:
        return None, None
    return qcore.bures_sq(true_state, estimate), qcore.hs_distance(true_state, estimate)


def session_seed_sequences(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Derive the (source, algorithm) seed pair for one session.

    Both the in-process simulator path and the stdio server/client pair use
    this split, so a loopback session reproduces the in-process trajectory
    bit for bit.
    """
    source_ss, algo_ss = np.random.SeedSequence(seed).spawn(2)
    return source_ss, algo_ss
