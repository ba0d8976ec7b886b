"""Single-qubit POVM families and n-qubit product POVMs.

Four leg geometries are supported, named by their serialized form:

* ``basis`` -- 2 projectors ``(I +/- z.sigma)/2``
* ``trine`` -- 3 legs ``(I + t_k.sigma)/3`` at 120 degrees in the x-z plane
* ``sic``   -- 4 legs ``(I + s_k.sigma)/4`` at regular-tetrahedron vertices
* ``six``   -- 6 legs ``(I +/- e_i.sigma)/6`` along the three Pauli axes

An orientation rotates all of a qubit's legs rigidly. Convention (fixed,
since any order spans the same orientation set): angles ``(tx, ty, tz)``
conjugate every leg by ``U = Rx(tx) @ Ry(ty) @ Rz(tz)`` where
``Rk(t) = cos(t/2) I - 1j sin(t/2) sigma_k``. Conjugation by ``Rk(t)``
rotates Bloch vectors by ``+t`` about axis ``k`` (right-hand rule), so
``ty = pi/2`` carries the ``+z`` basis leg onto ``+x``.

Product POVMs tensor the per-qubit outcome operators in lexicographic
outcome order with the first qubit as the most significant digit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("basis", "trine", "sic", "six")
LEGS = {"basis": 2, "trine": 3, "sic": 4, "six": 6}

PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)

_TWO_PI = 2.0 * np.pi


def reference_legs(family: str) -> tuple[np.ndarray, np.ndarray]:
    """Scale factors and Bloch vectors of the unrotated legs.

    Returns ``(scales, vectors)`` with shapes ``(L,)`` and ``(L, 3)``; the
    outcome operators are ``scales[k] * (I + vectors[k] . sigma)``.
    """
    if family == "basis":
        vecs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        scales = np.full(2, 0.5)
    elif family == "trine":
        phis = _TWO_PI * np.arange(3) / 3.0
        vecs = np.stack([np.sin(phis), np.zeros(3), np.cos(phis)], axis=1)
        scales = np.full(3, 1.0 / 3.0)
    elif family == "sic":
        vecs = np.array(
            [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        ) / np.sqrt(3.0)
        scales = np.full(4, 0.25)
    elif family == "six":
        vecs = np.array(
            [
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ]
        )
        scales = np.full(6, 1.0 / 6.0)
    else:
        raise ValueError(f"unknown POVM family {family!r}; expected one of {FAMILIES}")
    return scales, vecs


def family_operators(family: str) -> np.ndarray:
    """Unrotated single-qubit outcome operators, shape ``(L, 2, 2)``."""
    scales, vecs = reference_legs(family)
    ops = np.eye(2, dtype=complex)[None, :, :] + np.einsum("lk,kij->lij", vecs, PAULI)
    return scales[:, None, None] * ops


def rotation_matrix(angles) -> np.ndarray:
    """Qubit rotation ``Rx(tx) @ Ry(ty) @ Rz(tz)`` for one angle triple."""
    u = np.eye(2, dtype=complex)
    for theta, sigma in zip(np.asarray(angles, dtype=float), PAULI):
        u = u @ (np.cos(theta / 2.0) * np.eye(2) - 1j * np.sin(theta / 2.0) * sigma)
    return u


def n_outcomes(family: str, n_qubits: int) -> int:
    return LEGS[family] ** n_qubits


@dataclass
class ProductPovm:
    """Product POVM: per-qubit rotated legs tensored over all qubits."""

    n_qubits: int
    family: str
    angles: np.ndarray  # (n_qubits, 3), canonicalized to [0, 2*pi)
    outcomes: np.ndarray = field(repr=False)  # (K, d, d)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def n_outcomes(self) -> int:
        return self.outcomes.shape[0]


def build_povm(family: str, angles, n_qubits: int) -> ProductPovm:
    """Construct the product POVM for one orientation.

    ``angles`` is one ``(tx, ty, tz)`` triple per qubit (a single triple is
    accepted for one qubit). Outcome ``y`` corresponds to the per-qubit leg
    indices of ``y`` written in base ``L`` with qubit 0 as the most
    significant digit.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be at least 1")
    angles = np.asarray(angles, dtype=float).reshape(n_qubits, 3)
    if not np.all(np.isfinite(angles)):
        raise ValueError("orientation angles must be finite")
    angles = np.mod(angles, _TWO_PI)
    base = family_operators(family)
    outcomes = None
    for q in range(n_qubits):
        u = rotation_matrix(angles[q])
        legs = np.einsum("ab,lbc,dc->lad", u, base, u.conj())
        if outcomes is None:
            outcomes = legs
        else:
            k, d = outcomes.shape[0], outcomes.shape[1]
            outcomes = np.einsum("yab,zcd->yzacbd", outcomes, legs).reshape(
                k * legs.shape[0], d * 2, d * 2
            )
    return ProductPovm(n_qubits=n_qubits, family=family, angles=angles, outcomes=outcomes)


def random_orientation(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    """I.i.d. uniform angles on [0, 2*pi), one (X, Y, Z) triple per qubit."""
    return rng.uniform(0.0, _TWO_PI, size=(n_qubits, 3))


@dataclass
class MeasurementRecord:
    """One measured batch: the POVM used and the observed outcome counts."""

    povm: ProductPovm
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (self.povm.n_outcomes,):
            raise ValueError(
                f"counts arity {self.counts.shape} does not match "
                f"POVM outcome count {self.povm.n_outcomes}"
            )
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            raise ValueError("record has zero copies; frequencies undefined")
        return self.counts / total
