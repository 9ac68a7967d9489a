"""Discrete signed measures on R^d stored as weighted atom lists.

Every measure is kept in canonical form: atoms sorted lexicographically
by position, bit-identical positions merged by weight summation, zero
weights dropped. Canonical form makes equality, hashing and
serialization bit-stable and keeps derived quantities independent of
how a measure was assembled. Negative zeros in coordinates are
normalized to +0.0 during canonicalization, otherwise two atoms could
sit at distinct canonical positions with ground distance zero and the
transport distance would stop separating points.

All values are immutable after construction (arrays are marked
read-only) and every operation is a pure function, so measures can be
shared freely between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np

__all__ = [
    "Atom",
    "SignedMeasure",
    "JordanPair",
    "canonicalize",
    "dirac",
    "jordan",
    "mass",
    "push_forward",
    "common_measure",
    "linear_combine",
    "support_radius",
    "measure_to_json",
    "measure_from_json",
    "write_measure",
    "read_measure",
]


class Atom(NamedTuple):
    """A weighted point: coordinate tuple plus signed mass."""

    position: tuple[float, ...]
    weight: float


def _canonical_arrays(positions, weights, dim: int):
    P = np.asarray(positions, dtype=float)
    W = np.asarray(weights, dtype=float)
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    dim = int(dim)
    if W.ndim != 1:
        raise ValueError("weights must be a one-dimensional array")
    if P.size == 0:
        P = P.reshape(0, dim)
    if P.ndim == 1 and dim == 1:
        P = P.reshape(-1, 1)
    if P.ndim != 2 or P.shape[1] != dim:
        raise ValueError(f"positions must have shape (n, {dim}), got {P.shape}")
    if P.shape[0] != W.shape[0]:
        raise ValueError(
            f"got {P.shape[0]} positions but {W.shape[0]} weights"
        )
    if not np.all(np.isfinite(P)):
        raise ValueError("positions must be finite")
    if not np.all(np.isfinite(W)):
        raise ValueError("weights must be finite")

    if P.shape[0] == 0:
        P = np.zeros((0, dim))
        W = np.zeros(0)
    else:
        P = P + 0.0  # maps -0.0 to +0.0 so bitwise identity matches the metric
        order = np.lexsort(P.T[::-1])
        P = P[order]
        W = W[order]
        if P.shape[0] > 1:
            changed = np.any(P[1:] != P[:-1], axis=1)
            starts = np.flatnonzero(np.concatenate(([True], changed)))
        else:
            starts = np.array([0])
        merged = np.add.reduceat(W, starts)
        keep = merged != 0.0
        P = np.ascontiguousarray(P[starts][keep])
        W = np.ascontiguousarray(merged[keep])

    P.setflags(write=False)
    W.setflags(write=False)
    return P, W, dim


@dataclass(frozen=True, eq=False)
class SignedMeasure:
    """A finite signed combination of point masses in canonical form.

    Construct with raw atom data; canonicalization happens in the
    constructor, so two measures built from the same atoms in any order
    compare equal bitwise.
    """

    positions: np.ndarray
    weights: np.ndarray
    dim: int

    def __post_init__(self):
        P, W, d = _canonical_arrays(self.positions, self.weights, self.dim)
        object.__setattr__(self, "positions", P)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "dim", d)

    @staticmethod
    def empty(dim: int) -> "SignedMeasure":
        return SignedMeasure(np.zeros((0, dim)), np.zeros(0), dim)

    @property
    def n_atoms(self) -> int:
        return int(self.weights.shape[0])

    @property
    def atoms(self) -> list[Atom]:
        return [
            Atom(tuple(float(c) for c in p), float(w))
            for p, w in zip(self.positions, self.weights)
        ]

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.weights > 0.0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.positions.shape == other.positions.shape
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.positions.tobytes(), self.weights.tobytes()))

    def __add__(self, other):
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return linear_combine(1.0, self, 1.0, other)

    def __sub__(self, other):
        if not isinstance(other, SignedMeasure):
            return NotImplemented
        return linear_combine(1.0, self, -1.0, other)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, np.floating, np.integer)):
            return NotImplemented
        return linear_combine(float(scalar), self, 0.0, SignedMeasure.empty(self.dim))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        if self.n_atoms > 6:
            return f"SignedMeasure(dim={self.dim}, n_atoms={self.n_atoms})"
        inner = ", ".join(f"{w:+g}@{tuple(p)}" for p, w in zip(self.positions, self.weights))
        return f"SignedMeasure(dim={self.dim}, [{inner}])"


class JordanPair(NamedTuple):
    """Positive and negative parts of a signed measure, both positive measures."""

    plus: SignedMeasure
    minus: SignedMeasure


def canonicalize(raw_atoms: Iterable, dim: int) -> SignedMeasure:
    """Build a canonical measure from an iterable of (position, weight) pairs.

    Positions may be scalars when ``dim == 1``. Coincident positions are
    merged by weight summation, zero weights are dropped and atoms come
    out sorted lexicographically by coordinates.
    """
    positions = []
    weights = []
    for entry in raw_atoms:
        pos, w = entry
        positions.append(np.atleast_1d(np.asarray(pos, dtype=float)))
        weights.append(w)
    if positions:
        P = np.vstack(positions)
    else:
        P = np.zeros((0, dim))
    return SignedMeasure(P, np.asarray(weights, dtype=float), dim)


def dirac(position, weight: float = 1.0) -> SignedMeasure:
    """A single weighted point mass; scalar positions mean dimension one."""
    p = np.atleast_1d(np.asarray(position, dtype=float))
    return SignedMeasure(p.reshape(1, -1), np.array([weight]), p.size)


def jordan(mu: SignedMeasure) -> JordanPair:
    """Split into positive part and negated negative part.

    The parts have disjoint supports, so their masses add up exactly to
    the total variation of ``mu``.
    """
    pos = mu.weights > 0.0
    plus = SignedMeasure(mu.positions[pos], mu.weights[pos], mu.dim)
    minus = SignedMeasure(mu.positions[~pos], -mu.weights[~pos], mu.dim)
    return JordanPair(plus, minus)


def mass(mu: SignedMeasure) -> float:
    """Total variation: the sum of absolute atom weights."""
    return float(np.sum(np.abs(mu.weights)))


def push_forward(mu: SignedMeasure, transform: Callable) -> SignedMeasure:
    """Relocate every atom through ``transform`` and re-canonicalize.

    ``transform`` receives a read-only coordinate vector of length
    ``mu.dim`` and must return a finite vector of the same length.
    Weights ride along unchanged; atoms mapped to one point merge.
    """
    if mu.n_atoms == 0:
        return mu
    rows = []
    for p in mu.positions:
        q = np.asarray(transform(p), dtype=float).reshape(-1)
        if q.shape[0] != mu.dim:
            raise ValueError(
                f"transform returned {q.shape[0]} coordinates, expected {mu.dim}"
            )
        rows.append(q)
    return SignedMeasure(np.vstack(rows), mu.weights, mu.dim)


def common_measure(mu: SignedMeasure, nu: SignedMeasure) -> SignedMeasure:
    """Largest positive measure dominated by both arguments.

    For atomic measures this is the positionwise minimum of weights over
    bit-identical shared positions. Both inputs must be positive.
    """
    if not mu.is_positive or not nu.is_positive:
        raise ValueError("common_measure requires positive measures")
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    lookup = {row.tobytes(): j for j, row in enumerate(nu.positions)}
    keep_pos = []
    keep_w = []
    for i, row in enumerate(mu.positions):
        j = lookup.get(row.tobytes())
        if j is not None:
            keep_pos.append(row)
            keep_w.append(min(mu.weights[i], nu.weights[j]))
    if not keep_pos:
        return SignedMeasure.empty(mu.dim)
    return SignedMeasure(np.vstack(keep_pos), np.asarray(keep_w), mu.dim)


def linear_combine(
    alpha: float, mu: SignedMeasure, beta: float, nu: SignedMeasure
) -> SignedMeasure:
    """Canonical form of ``alpha * mu + beta * nu``."""
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    for name, coef in (("alpha", alpha), ("beta", beta)):
        if not np.isfinite(coef):
            raise ValueError(f"{name} must be finite")
    P = np.vstack([mu.positions, nu.positions])
    W = np.concatenate([alpha * mu.weights, beta * nu.weights])
    return SignedMeasure(P, W, mu.dim)


def support_radius(mu: SignedMeasure) -> float:
    """Radius of the smallest origin-centered ball containing the support."""
    if mu.n_atoms == 0:
        return 0.0
    return float(np.max(np.linalg.norm(mu.positions, axis=1)))


def measure_to_json(mu: SignedMeasure) -> dict:
    """JSON-ready dict; float repr round-trips bit-exactly through json."""
    return {
        "dim": mu.dim,
        "atoms": [
            {"x": [float(c) for c in p], "w": float(w)}
            for p, w in zip(mu.positions, mu.weights)
        ],
    }


def measure_from_json(obj) -> SignedMeasure:
    if not isinstance(obj, dict):
        raise ValueError("measure JSON must be an object")
    try:
        dim = obj["dim"]
        atoms = obj["atoms"]
    except KeyError as exc:
        raise ValueError(f"measure JSON missing key {exc.args[0]!r}") from None
    if not isinstance(atoms, list):
        raise ValueError("measure JSON field 'atoms' must be a list")
    positions = []
    weights = []
    for k, atom in enumerate(atoms):
        try:
            positions.append(atom["x"])
            weights.append(atom["w"])
        except (TypeError, KeyError):
            raise ValueError(f"atoms[{k}] must be an object with keys 'x' and 'w'") from None
    if positions:
        P = np.asarray(positions, dtype=float)
    else:
        P = np.zeros((0, dim if isinstance(dim, int) and dim >= 1 else 1))
    return SignedMeasure(P, np.asarray(weights, dtype=float), dim)


def write_measure(mu: SignedMeasure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(measure_to_json(mu), fh)
        fh.write("\n")


def read_measure(path) -> SignedMeasure:
    with open(path, "r", encoding="utf-8") as fh:
        return measure_from_json(json.load(fh))
