"""Dimension-generic linear algebra for quantum states.

States, purifications, and probability vectors are plain numpy arrays;
nothing in this module mutates its inputs. Randomness always comes from an
explicitly passed ``numpy.random.Generator`` so parallel callers can use
independent streams. Most operations accept a batch of states through
leading axes, e.g. shape ``(B, d, d)`` instead of ``(d, d)``.
"""

from __future__ import annotations

import math

import numpy as np

# Invariant tolerances. Eigenvalues above EIG_FLOOR are treated as
# floating-point drift and clamped; anything below is a genuine violation
# and is never silently repaired.
HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
EIG_FLOOR = -1e-9
_PROB_CLAMP = -1e-12

STATE_PRIORS = ("pure-haar", "mixed-hs")


def _outcome_operators(povm) -> np.ndarray:
    # Accepts a ProductPovm or a raw (K, d, d) operator stack.
    return getattr(povm, "outcomes", povm)


def born_probabilities(rho: np.ndarray, povm) -> np.ndarray:
    """Outcome probabilities ``Re Tr(rho @ Pi_y)`` for every POVM outcome.

    ``rho`` may be a single state ``(d, d)`` or a batch ``(..., d, d)``;
    the result has shape ``(K,)`` or ``(..., K)``. Negative values caused
    by rounding (above -1e-12) are clamped to zero.
    """
    ops = _outcome_operators(povm)
    if rho.shape[-1] != ops.shape[-1]:
        raise ValueError(
            f"state dimension {rho.shape[-1]} does not match "
            f"POVM dimension {ops.shape[-1]}"
        )
    probs = np.real(np.einsum("...ij,yji->...y", rho, ops))
    return np.where((probs < 0) & (probs >= _PROB_CLAMP), 0.0, probs)


def sample_counts(probs: np.ndarray, copies: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial outcome counts for ``copies`` measured copies.

    Deterministic given the generator state; returns an all-zero vector for
    ``copies == 0``.
    """
    if copies < 0:
        raise ValueError("copies must be nonnegative")
    p = np.asarray(probs, dtype=float)
    p = np.clip(p, 0.0, None)
    return rng.multinomial(copies, p / p.sum())


def log_likelihood(counts: np.ndarray, probs: np.ndarray) -> float:
    """``sum_y n_y * ln(p_y)`` with the convention that ``n_y == 0`` terms vanish.

    Returns ``-inf`` when an observed outcome has zero probability.
    """
    counts = np.asarray(counts)
    probs = np.asarray(probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValueError("counts and probabilities must have the same arity")
    hit = counts > 0
    if np.any(probs[hit] <= 0.0):
        return float("-inf")
    return float(np.sum(counts[hit] * np.log(probs[hit])))


def _sqrt_spectrum(vals: np.ndarray, d: int) -> np.ndarray:
    # The sqrt would amplify eigh's noise eigenvalues (~eps * |A|) to ~1e-8,
    # so clip everything below a relative floor before taking it.
    floor = 4.0 * d * np.finfo(float).eps * max(float(vals.max()), 0.0)
    return np.sqrt(np.where(vals > floor, vals, 0.0))


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Squared-overlap fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    if rho.shape != sigma.shape:
        raise ValueError("states must have equal dimension")
    d = rho.shape[-1]
    vals, vecs = np.linalg.eigh(rho)
    sqrt_rho = (vecs * _sqrt_spectrum(vals, d)) @ vecs.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    ev = np.linalg.eigvalsh(inner)
    f = float(np.sum(_sqrt_spectrum(ev, d)) ** 2)
    return min(max(f, 0.0), 1.0)


def bures_sq(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Squared Bures distance ``2 - 2*sqrt(F)``, in ``[0, 2]``."""
    return 2.0 - 2.0 * math.sqrt(fidelity(rho, sigma))


def hs_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) distance between two operators."""
    if rho.shape != sigma.shape:
        raise ValueError("states must have equal dimension")
    return float(np.linalg.norm(rho - sigma))


def purify(rho: np.ndarray) -> np.ndarray:
    """Canonical purification on system (x) reference of equal dimension.

    Returns ``sum_k sqrt(l_k) |k> (x) |k>`` with eigenpairs sorted by
    descending eigenvalue, as a vector of length ``d**2`` (batched inputs
    give ``(..., d**2)``). Eigenvalues within EIG_FLOOR of zero are clamped
    and the spectrum renormalized.
    """
    vals, vecs = np.linalg.eigh(rho)
    if vals.min() < EIG_FLOOR:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {vals.min():.3e})")
    vals = np.clip(vals, 0.0, None)
    vals = vals / vals.sum(axis=-1, keepdims=True)
    order = np.flip(np.argsort(vals, axis=-1), axis=-1)
    vals = np.take_along_axis(vals, order, axis=-1)
    vecs = np.take_along_axis(vecs, order[..., None, :], axis=-1)
    v = np.einsum("...k,...ik,...jk->...ij", np.sqrt(vals), vecs, vecs)
    return v.reshape(*rho.shape[:-2], -1)


def depurify(v: np.ndarray) -> np.ndarray:
    """Partial trace over the reference factor of a purification vector."""
    length = v.shape[-1]
    d = math.isqrt(length)
    if d * d != length:
        raise ValueError(f"purification length {length} is not a perfect square")
    mat = v.reshape(*v.shape[:-1], d, d)
    return np.einsum("...ij,...kj->...ik", mat, mat.conj())


def perturb_purification(v: np.ndarray, eps, rng: np.random.Generator) -> np.ndarray:
    """Move a unit purification toward a random orthogonal direction.

    Draws ``u`` with i.i.d. standard complex normal entries, keeps its
    component ``o`` orthogonal to ``v`` (renormalized), and returns
    ``(1 - eps) * v + eps * o`` rescaled to unit norm. ``eps`` may be a
    scalar or broadcast over the batch axes of ``v``; ``eps == 0`` returns
    ``v`` unchanged and ``eps == 1`` returns a direction orthogonal to ``v``.
    """
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr < 0) or np.any(eps_arr > 1):
        raise ValueError("perturbation size must lie in [0, 1]")
    shape = v.shape
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    overlap = np.sum(v.conj() * u, axis=-1, keepdims=True)
    o = u - overlap * v
    norm = np.linalg.norm(o, axis=-1, keepdims=True)
    # u parallel to v has probability zero but would leave a zero direction.
    while np.any(norm < 1e-12):
        bad = np.broadcast_to(norm < 1e-12, shape)
        u2 = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        u = np.where(bad, u2, u)
        overlap = np.sum(v.conj() * u, axis=-1, keepdims=True)
        o = u - overlap * v
        norm = np.linalg.norm(o, axis=-1, keepdims=True)
    o = o / norm
    eps_col = eps_arr[..., None] if eps_arr.ndim else eps_arr
    out = (1.0 - eps_col) * v + eps_col * o
    out = out / np.linalg.norm(out, axis=-1, keepdims=True)
    if np.any(eps_arr == 0.0):
        keep = np.broadcast_to((eps_arr == 0.0)[..., None] if eps_arr.ndim else eps_arr == 0.0, shape)
        out = np.where(keep, v, out)
    return out


def random_unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform unit vector in C^n."""
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z / np.linalg.norm(z)


def random_state(kind: str, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random density matrix: ``pure-haar`` or ``mixed-hs`` (Hilbert-Schmidt measure)."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if kind == "pure-haar":
        psi = random_unit_vector(d, rng)
        return np.outer(psi, psi.conj())
    if kind == "mixed-hs":
        return depurify(random_unit_vector(d * d, rng))
    raise ValueError(f"unknown state prior {kind!r}; expected one of {STATE_PRIORS}")


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


def prob_distance(p: np.ndarray, q: np.ndarray, metric: str) -> float:
    """L1 (total variation, unhalved) or L2 distance between probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("probability vectors must have the same arity")
    if metric == "L1":
        return float(np.abs(p - q).sum())
    if metric == "L2":
        return float(np.sqrt(((p - q) ** 2).sum()))
    raise ValueError(f"unknown metric {metric!r}; expected 'L1' or 'L2'")


def is_density_matrix(
    rho: np.ndarray,
    hermitian_atol: float = HERMITIAN_ATOL,
    trace_atol: float = TRACE_ATOL,
    eig_floor: float = EIG_FLOOR,
) -> bool:
    """True when ``rho`` is Hermitian, trace-1, and PSD within tolerances."""
    return density_matrix_violation(rho, hermitian_atol, trace_atol, eig_floor) is None


def density_matrix_violation(
    rho: np.ndarray,
    hermitian_atol: float = HERMITIAN_ATOL,
    trace_atol: float = TRACE_ATOL,
    eig_floor: float = EIG_FLOOR,
) -> str | None:
    """Describe the first violated state invariant, or None if all hold."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return f"not square: shape {rho.shape}"
    herm_err = np.abs(rho - rho.conj().T).max()
    if herm_err > hermitian_atol:
        return f"not Hermitian: max asymmetry {herm_err:.3e}"
    trace_err = abs(np.trace(rho) - 1.0)
    if trace_err > trace_atol:
        return f"trace deviates from 1 by {trace_err:.3e}"
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    if min_eig < eig_floor:
        return f"not PSD: min eigenvalue {min_eig:.3e}"
    return None


def assert_density_matrix(rho: np.ndarray, **tolerances) -> None:
    reason = density_matrix_violation(rho, **tolerances)
    if reason is not None:
        raise ValueError(f"invalid density matrix: {reason}")
