"""Non-adaptive baseline: linear inversion plus projection onto valid states.

The inversion solves a copy-weighted least-squares problem over Hermitian
trace-1 matrices in a generalized Bloch (orthonormal traceless Hermitian
basis) parameterization, so heterogeneous records combine naturally. The
result need not be positive semidefinite; ``project_to_state`` then finds
the Frobenius-closest valid density matrix by projecting the eigenvalue
spectrum onto the probability simplex.
"""

from __future__ import annotations

import time
from functools import lru_cache

import numpy as np

from . import qcore
from .povm import MeasurementRecord, build_povm, random_orientation
from .sources import MeasurementSource, TrajectoryStep, score_step


class InformationallyIncompleteError(ValueError):
    """The measurement records do not pin down all state parameters."""

    def __init__(self, rank: int, needed: int):
        self.rank = rank
        self.needed = needed
        self.deficiency = needed - rank
        super().__init__(
            f"measurement design spans only {rank} of {needed} state parameters "
            f"(deficiency {self.deficiency}); add more POVM orientations"
        )


@lru_cache(maxsize=None)
def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal traceless Hermitian basis of d x d matrices, shape (d^2 - 1, d, d).

    Hilbert-Schmidt orthonormal: ``Tr(B_a B_b) = delta_ab``. Cached and
    marked read-only; do not mutate.
    """
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            mats.append(sym)
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2.0)
            asym[k, j] = 1j / np.sqrt(2.0)
            mats.append(asym)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag).astype(complex) / np.sqrt(l * (l + 1)))
    basis = np.stack(mats)
    basis.setflags(write=False)
    return basis


def linear_inversion(records: list[MeasurementRecord]) -> np.ndarray:
    """Least-squares Hermitian trace-1 estimate from relative frequencies.

    Each record contributes its outcome frequencies weighted by its copy
    count (records with zero copies are skipped). Raises
    ``InformationallyIncompleteError`` when the pooled outcome operators do
    not span the traceless Hermitian space. The output is Hermitian with
    unit trace but may have negative eigenvalues.
    """
    if not records:
        raise ValueError("at least one measurement record is required")
    d = records[0].povm.dim
    basis = hermitian_basis(d)
    blocks = []
    rhs = []
    for rec in records:
        if rec.povm.dim != d:
            raise ValueError("all records must share one system dimension")
        counts = np.asarray(rec.counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            continue
        nu = counts / total
        ops = rec.povm.outcomes
        design = np.real(np.einsum("yij,aji->ya", ops, basis))
        offset = np.real(np.trace(ops, axis1=-2, axis2=-1)) / d
        w = np.sqrt(total)
        blocks.append(w * design)
        rhs.append(w * (nu - offset))
    if not blocks:
        raise ValueError("all records carry zero copies")
    a = np.vstack(blocks)
    b = np.concatenate(rhs)
    needed = d * d - 1
    rank = int(np.linalg.matrix_rank(a))
    if rank < needed:
        raise InformationallyIncompleteError(rank, needed)
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return np.eye(d, dtype=complex) / d + np.einsum("a,aij->ij", x, basis)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a real vector onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    cumsum = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    feasible = u + (1.0 - cumsum) / j > 0
    rho = int(np.nonzero(feasible)[0][-1])
    theta = (1.0 - cumsum[rho]) / (rho + 1)
    return np.maximum(v + theta, 0.0)


def project_to_state(matrix: np.ndarray) -> np.ndarray:
    """Frobenius-closest valid density matrix to a Hermitian trace-1 matrix.

    Eigenvectors are kept; eigenvalues are projected onto the simplex.
    Idempotent on already-valid states.
    """
    vals, vecs = np.linalg.eigh(matrix)
    lam = project_simplex(vals)
    return (vecs * lam) @ vecs.conj().T


def run_standard(
    source: MeasurementSource,
    schedule: list[int],
    family: str,
    rng: np.random.Generator,
    orientation: str = "fixed",
) -> list[TrajectoryStep]:
    """Accumulate records batch by batch and re-invert after each batch.

    ``orientation`` is ``"fixed"`` (one random orientation drawn up front
    and reused; the default) or ``"random"`` (fresh orientation per batch,
    needed for families that are not informationally complete on their
    own). While the accumulated design is still rank-deficient the estimate
    falls back to the maximally mixed state.
    """
    if orientation not in ("fixed", "random"):
        raise ValueError("orientation must be 'fixed' or 'random'")
    n = source.n_qubits
    true_state = getattr(source, "true_state", None)
    fixed_angles = random_orientation(rng, n)
    records: list[MeasurementRecord] = []
    steps: list[TrajectoryStep] = []
    copies_cum = 0
    for t, m in enumerate(schedule):
        t0 = time.perf_counter()
        angles = fixed_angles if orientation == "fixed" else random_orientation(rng, n)
        povm_t = build_povm(family, angles, n)
        s0 = time.perf_counter()
        counts = source.measure(povm_t, m)
        sample_dt = time.perf_counter() - s0
        records.append(MeasurementRecord(povm_t, counts))
        try:
            estimate = project_to_state(linear_inversion(records))
        except InformationallyIncompleteError:
            estimate = qcore.maximally_mixed(2**n)
        copies_cum += m
        wall = time.perf_counter() - t0 - sample_dt
        b, h = score_step(estimate, true_state)
        steps.append(TrajectoryStep(t, copies_cum, estimate, b, h, wall, angles))
    return steps
