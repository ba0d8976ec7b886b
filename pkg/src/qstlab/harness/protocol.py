"""Newline-delimited JSON protocol between an estimator and a measurement source.

Estimator -> source messages::

    {"type": "measure", "povm": {"family": "...", "angles": [[tx,ty,tz], ...]}, "copies": M}
    {"type": "estimate", "step": t, "density_matrix": [[re, im], ...], "confidence": c}
    {"type": "done"}

Source -> estimator messages::

    {"type": "counts", "counts": [n_0, ..., n_{K-1}]}
    {"type": "error", "reason": "..."}

Density matrices are row-major lists of ``[re, im]`` pairs. Either side
answers a malformed or inconsistent message with an ``error`` message and
aborts the session (CLI exit code 3). Counts are integers, so a loopback
session is bit-identical to running the simulator in process.
"""

from __future__ import annotations

import json

import numpy as np

from .. import qcore
from ..povm import FAMILIES, ProductPovm, build_povm
from ..sources import session_seed_sequences


class ProtocolError(RuntimeError):
    """Wire-protocol violation; ``position`` is the 1-based message index."""

    def __init__(self, reason: str, position: int = 0):
        self.reason = reason
        self.position = position
        super().__init__(f"protocol error at message {position}: {reason}" if position else reason)


def write_message(stream, message: dict) -> None:
    stream.write(json.dumps(message, separators=(",", ":")) + "\n")
    stream.flush()


def encode_density_matrix(rho: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in rho.reshape(-1)]


def decode_density_matrix(entries, dim: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in entries])
    if flat.size != dim * dim:
        raise ValueError(f"expected {dim * dim} matrix entries, got {flat.size}")
    return flat.reshape(dim, dim)


class StdioSource:
    """Estimator-side client: turns ``measure`` calls into wire messages."""

    def __init__(self, reader, writer, n_qubits: int):
        self.reader = reader
        self.writer = writer
        self.n_qubits = n_qubits
        self._position = 0

    def _read_message(self) -> dict:
        line = self.reader.readline()
        self._position += 1
        if not line:
            raise ProtocolError("source closed the stream", self._position)
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"malformed JSON: {exc}", self._position) from exc
        if not isinstance(message, dict) or "type" not in message:
            raise ProtocolError("message is not an object with a 'type'", self._position)
        if message["type"] == "error":
            raise ProtocolError(f"source reported: {message.get('reason')}", self._position)
        return message

    def measure(self, povm: ProductPovm, copies: int) -> np.ndarray:
        write_message(
            self.writer,
            {
                "type": "measure",
                "povm": {"family": povm.family, "angles": povm.angles.tolist()},
                "copies": int(copies),
            },
        )
        reply = self._read_message()
        if reply["type"] != "counts":
            raise ProtocolError(f"expected counts, got {reply['type']!r}", self._position)
        counts = np.asarray(reply.get("counts", []))
        if counts.shape != (povm.n_outcomes,):
            raise ProtocolError(
                f"counts arity {counts.shape} does not match POVM outcomes {povm.n_outcomes}",
                self._position,
            )
        if np.any(counts < 0) or counts.sum() != copies:
            raise ProtocolError("counts must be nonnegative and sum to the requested copies", self._position)
        return counts

    def send_estimate(self, step: int, estimate: np.ndarray, confidence: float | None) -> None:
        write_message(
            self.writer,
            {
                "type": "estimate",
                "step": int(step),
                "density_matrix": encode_density_matrix(estimate),
                "confidence": None if confidence is None else float(confidence),
            },
        )

    def close(self) -> None:
        write_message(self.writer, {"type": "done"})


def _parse_measure(message: dict, n_qubits: int) -> tuple[ProductPovm, int]:
    povm_doc = message.get("povm")
    if not isinstance(povm_doc, dict):
        raise ValueError("measure message needs a 'povm' object")
    family = povm_doc.get("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown POVM family {family!r}")
    angles = np.asarray(povm_doc.get("angles", []), dtype=float)
    if angles.shape != (n_qubits, 3):
        raise ValueError(f"angles must have shape ({n_qubits}, 3), got {angles.shape}")
    copies = message.get("copies")
    if not isinstance(copies, int) or copies < 0:
        raise ValueError("copies must be a nonnegative integer")
    return build_povm(family, angles, n_qubits), copies


def serve_source(
    reader,
    writer,
    seed: int,
    n_qubits: int = 2,
    prior: str = "mixed-hs",
    estimate_log: list | None = None,
) -> int:
    """Serve the simulator over a line-oriented channel; returns an exit code.

    The hidden state is drawn from ``prior`` using the source half of the
    session seed split, so the paired estimator process can reproduce the
    session in process from the same root seed.
    """
    source_ss, _ = session_seed_sequences(seed)
    rng = np.random.default_rng(source_ss)
    true_state = qcore.random_state(prior, 2**n_qubits, rng)
    position = 0
    for line in reader:
        position += 1
        if not line.strip():
            continue
        try:
            message = json.loads(line)
            if not isinstance(message, dict) or "type" not in message:
                raise ValueError("message is not an object with a 'type'")
        except (json.JSONDecodeError, ValueError) as exc:
            write_message(writer, {"type": "error", "reason": f"message {position}: {exc}"})
            return 3
        kind = message["type"]
        if kind == "measure":
            try:
                povm_t, copies = _parse_measure(message, n_qubits)
            except ValueError as exc:
                write_message(writer, {"type": "error", "reason": f"message {position}: {exc}"})
                return 3
            probs = qcore.born_probabilities(true_state, povm_t)
            counts = qcore.sample_counts(probs, copies, rng)
            write_message(writer, {"type": "counts", "counts": [int(c) for c in counts]})
        elif kind == "estimate":
            if estimate_log is not None:
                estimate_log.append(message)
        elif kind == "done":
            return 0
        else:
            write_message(writer, {"type": "error", "reason": f"message {position}: unknown type {kind!r}"})
            return 3
    # Stream ended without a done message; treat as a protocol violation.
    return 3
