"""Velocity fields, source terms, flows and the dyadic splitting scheme.

The evolution advanced here moves a signed atomic measure along a
measure-dependent velocity field while a measure-dependent source adds
and removes mass. One step of size ``dt`` freezes both couplings at the
current state: atoms ride the frozen field for ``dt``, then the frozen
source, scaled by ``dt``, is appended. States at times strictly inside
a step follow the same recipe with the partial elapsed time; the
partial source mass is appended where the source puts it and is not
pushed through the flow within the step.

Velocity models carry certified constants: a Lipschitz constant and a
sup bound of the field, plus, for the nonlocal kernel field, the factor
relating field differences to the transport distance of the underlying
measures. The kernel certificates are analytic (computed from the
profile's closed-form extrema at construction), and they are only valid
for measures up to the declared mass cap, so evaluation refuses
heavier measures instead of silently leaving the certified regime.

Everything is an immutable value; steps and simulations are pure
functions of their inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

from .flatnorm import NormParams
from .measure import SignedMeasure, dirac, mass, measure_to_json, support_radius

__all__ = [
    "ConstantVelocity",
    "LinearVelocity",
    "KernelVelocity",
    "VelocityModel",
    "ZeroSource",
    "FixedSource",
    "IntegralDrivenSource",
    "SourceModel",
    "FrozenField",
    "eval_velocity",
    "freeze_velocity",
    "flow_map",
    "flow_positions",
    "scheme_step",
    "Scenario",
    "Trajectory",
    "simulate",
    "merge_close_atoms",
    "PRUNE_TOLERANCE",
]

PRUNE_TOLERANCE = 1e-15

# Extrema of the C^1 bump profile g(z) = (1 - |z|^2/r^2)_+^2 and of the
# radial interaction field g(z) * z / r, used for analytic certificates:
#   sup |g| = 1,            Lip(g)        = 8 / (3*sqrt(3)*r)
#   sup |g z/r| = 16/(25*sqrt(5)),  Lip(g z/r) <= 4 / (3r)
_BUMP_LIP = 8.0 / (3.0 * math.sqrt(3.0))
_INTERACTION_SUP = 16.0 / (25.0 * math.sqrt(5.0))
_INTERACTION_LIP = 4.0 / 3.0


def _readonly(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FrozenField:
    """A velocity field with the measure dependence already bound.

    ``kind`` selects the flow integrator: "constant" and "linear" flows
    are closed-form, anything else is integrated with a fixed-step
    fourth-order Runge-Kutta rule.
    """

    kind: str
    dim: int
    c: np.ndarray | None = None
    A: np.ndarray | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = None
    lip_L: float = 0.0
    bound_M: float = math.inf

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.c, X.shape).copy()
        if self.kind == "linear":
            return X @ self.A.T + self.c
        return self.func(X)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.eval_many(np.atleast_2d(np.asarray(x, dtype=float)))[0]


@dataclass(frozen=True)
class ConstantVelocity:
    """Uniform drift; ignores the measure entirely."""

    c: np.ndarray

    kind = "constant"

    def __post_init__(self):
        c = _readonly(np.atleast_1d(self.c))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("drift vector must be a finite 1-d array")
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return int(self.c.shape[0])

    @property
    def lip_L(self) -> float:
        return 0.0

    @property
    def bound_M(self) -> float:
        return float(np.linalg.norm(self.c))

    @property
    def h1_K(self) -> float:
        return 0.0

    @property
    def params(self):
        return None

    def field(self, mu: SignedMeasure) -> FrozenField:
        if mu.dim != self.dim:
            raise ValueError(f"dimension mismatch: measure {mu.dim}, field {self.dim}")
        return FrozenField(
            kind="constant", dim=self.dim, c=self.c, lip_L=0.0, bound_M=self.bound_M
        )

    def to_dict(self) -> dict:
        return {"kind": "constant", "c": [float(v) for v in self.c]}


@dataclass(frozen=True)
class LinearVelocity:
    """Affine field ``x -> A x + c``, exact matrix-exponential flow.

    Affine fields are unbounded on all of R^d, so the sup certificate is
    issued relative to ``cert_radius``: it holds on the centered ball of
    that radius and tests must keep trajectories inside it.
    """

    A: np.ndarray
    c: np.ndarray
    cert_radius: float

    kind = "linear"

    def __post_init__(self):
        A = _readonly(np.atleast_2d(self.A))
        c = _readonly(np.atleast_1d(self.c))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if c.shape != (A.shape[0],):
            raise ValueError("c must match A")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(c))):
            raise ValueError("A and c must be finite")
        if not (np.isfinite(self.cert_radius) and self.cert_radius > 0):
            raise ValueError("cert_radius must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return int(self.A.shape[0])

    @property
    def lip_L(self) -> float:
        return float(np.linalg.norm(self.A, 2))

    @property
    def bound_M(self) -> float:
        return self.lip_L * self.cert_radius + float(np.linalg.norm(self.c))

    @property
    def h1_K(self) -> float:
        return 0.0

    @property
    def params(self):
        return None

    def field(self, mu: SignedMeasure) -> FrozenField:
        if mu.dim != self.dim:
            raise ValueError(f"dimension mismatch: measure {mu.dim}, field {self.dim}")
        return FrozenField(
            kind="linear",
            dim=self.dim,
            A=self.A,
            c=self.c,
            lip_L=self.lip_L,
            bound_M=self.bound_M,
        )

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "A": [[float(v) for v in row] for row in self.A],
            "c": [float(v) for v in self.c],
            "cert_radius": float(self.cert_radius),
        }


@dataclass(frozen=True)
class KernelVelocity:
    """Nonlocal field: convolution of the measure with a compact kernel.

    ``v[mu](x) = sum_i w_i * K(x - x_i)`` with two built-in shapes over
    the profile ``g(z) = (1 - |z|^2/radius^2)_+^2``:

    * ``"bump"``: ``K(z) = amplitude * g(z) * direction``, a scalar bump
      times a fixed unit vector, so ``K(0) = amplitude * direction``.
    * ``"interaction"``: ``K(z) = amplitude * g(z) * z / radius``, an
      odd radial pairwise force (repulsive for positive amplitude).

    Certificates are analytic in the profile extrema and scale with the
    declared ``mass_cap``; ``h1_K`` relates field differences to the
    transport distance with prices ``params`` via the dual potential
    characterization, hence ``max(sup|K|/a, Lip(K)/b)``.
    """

    shape: str
    amplitude: float
    radius: float
    mass_cap: float
    params: NormParams
    dim: int
    direction: np.ndarray | None = None

    kind = "kernel"

    def __post_init__(self):
        if self.shape not in ("bump", "interaction"):
            raise ValueError(f"unknown kernel shape {self.shape!r}")
        if not (np.isfinite(self.amplitude)):
            raise ValueError("amplitude must be finite")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("radius must be positive")
        if not (np.isfinite(self.mass_cap) and self.mass_cap > 0):
            raise ValueError("mass_cap must be positive")
        if not isinstance(self.params, NormParams):
            raise ValueError("params must be a NormParams")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.shape == "bump":
            d = self.direction
            if d is None:
                d = np.zeros(self.dim)
                d[0] = 1.0
            d = np.atleast_1d(np.asarray(d, dtype=float))
            norm = np.linalg.norm(d)
            if d.shape != (self.dim,) or not np.isfinite(norm) or norm == 0:
                raise ValueError("direction must be a nonzero vector of length dim")
            object.__setattr__(self, "direction", _readonly(d / norm))
        else:
            object.__setattr__(self, "direction", None)

    @property
    def kernel_sup(self) -> float:
        if self.shape == "bump":
            return abs(self.amplitude)
        return abs(self.amplitude) * _INTERACTION_SUP

    @property
    def kernel_lip(self) -> float:
        if self.shape == "bump":
            return abs(self.amplitude) * _BUMP_LIP / self.radius
        return abs(self.amplitude) * _INTERACTION_LIP / self.radius

    @property
    def lip_L(self) -> float:
        return self.kernel_lip * self.mass_cap

    @property
    def bound_M(self) -> float:
        return self.kernel_sup * self.mass_cap

    @property
    def h1_K(self) -> float:
        return max(self.kernel_sup / self.params.a, self.kernel_lip / self.params.b)

    def field(self, mu: SignedMeasure) -> FrozenField:
        if mu.dim != self.dim:
            raise ValueError(f"dimension mismatch: measure {mu.dim}, field {self.dim}")
        total = mass(mu)
        if total > self.mass_cap * (1.0 + 1e-12):
            raise ValueError(
                f"measure mass {total} exceeds certified cap {self.mass_cap}"
            )
        centers = mu.positions
        weights = mu.weights
        amp, r = self.amplitude, self.radius
        r2 = r * r
        direction = self.direction

        def func(X: np.ndarray) -> np.ndarray:
            if centers.shape[0] == 0:
                return np.zeros_like(X)
            diff = X[:, None, :] - centers[None, :, :]
            t = np.sum(diff * diff, axis=2) / r2
            prof = np.square(np.maximum(1.0 - t, 0.0))
            if self.shape == "bump":
                return np.outer(prof @ weights, amp * direction)
            return (amp / r) * np.einsum("nm,nmd->nd", prof * weights[None, :], diff)

        return FrozenField(
            kind="kernel",
            dim=self.dim,
            func=func,
            lip_L=self.kernel_lip * total,
            bound_M=self.kernel_sup * total,
        )

    def to_dict(self) -> dict:
        out = {
            "kind": "kernel",
            "shape": self.shape,
            "amplitude": float(self.amplitude),
            "radius": float(self.radius),
            "mass_cap": float(self.mass_cap),
        }
        if self.direction is not None:
            out["direction"] = [float(v) for v in self.direction]
        return out


VelocityModel = Union[ConstantVelocity, LinearVelocity, KernelVelocity]


@dataclass(frozen=True)
class ZeroSource:
    """No mass exchange."""

    kind = "zero"

    @property
    def mass_P(self) -> float:
        return 0.0

    @property
    def lip_Q(self) -> float:
        return 0.0

    @property
    def radius_R(self) -> float:
        return 0.0

    def evaluate(self, mu: SignedMeasure) -> SignedMeasure:
        return SignedMeasure.empty(mu.dim)

    def to_dict(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class FixedSource:
    """State-independent source: the same signed measure at every time."""

    measure: SignedMeasure

    kind = "fixed"

    @property
    def mass_P(self) -> float:
        return mass(self.measure)

    @property
    def lip_Q(self) -> float:
        return 0.0

    @property
    def radius_R(self) -> float:
        return support_radius(self.measure)

    def evaluate(self, mu: SignedMeasure) -> SignedMeasure:
        if mu.dim != self.measure.dim:
            raise ValueError(
                f"dimension mismatch: measure {mu.dim}, source {self.measure.dim}"
            )
        return self.measure

    def to_dict(self) -> dict:
        return {"kind": "fixed", "measure": measure_to_json(self.measure)}


@dataclass(frozen=True)
class IntegralDrivenSource:
    """Point source driven by a saturated weighted integral of the state.

    The state is sensed through a bump test function psi centered at
    ``sensor_center``; the sensed value is clamped to ``saturation`` and
    scaled by ``gain``, and that much mass is emitted at ``site``.
    Saturation gives the global mass bound; the clamp is 1-Lipschitz,
    so the transport-distance Lipschitz certificate comes straight from
    the dual potential characterization applied to psi.
    """

    site: np.ndarray
    gain: float
    saturation: float
    sensor_center: np.ndarray
    sensor_radius: float
    sensor_amplitude: float
    params: NormParams

    kind = "lipschitz_map"

    def __post_init__(self):
        site = _readonly(np.atleast_1d(self.site))
        center = _readonly(np.atleast_1d(self.sensor_center))
        if site.shape != center.shape:
            raise ValueError("site and sensor_center must share a dimension")
        if not (np.isfinite(self.gain)):
            raise ValueError("gain must be finite")
        if not (np.isfinite(self.saturation) and self.saturation > 0):
            raise ValueError("saturation must be positive")
        if not (np.isfinite(self.sensor_radius) and self.sensor_radius > 0):
            raise ValueError("sensor_radius must be positive")
        if not (np.isfinite(self.sensor_amplitude) and self.sensor_amplitude > 0):
            raise ValueError("sensor_amplitude must be positive")
        if not isinstance(self.params, NormParams):
            raise ValueError("params must be a NormParams")
        object.__setattr__(self, "site", site)
        object.__setattr__(self, "sensor_center", center)

    @property
    def dim(self) -> int:
        return int(self.site.shape[0])

    @property
    def mass_P(self) -> float:
        return abs(self.gain) * self.saturation

    @property
    def lip_Q(self) -> float:
        psi_sup = self.sensor_amplitude
        psi_lip = self.sensor_amplitude * _BUMP_LIP / self.sensor_radius
        factor = max(psi_sup / self.params.a, psi_lip / self.params.b)
        return abs(self.gain) * self.params.a * factor

    @property
    def radius_R(self) -> float:
        return float(np.linalg.norm(self.site))

    def sensed(self, mu: SignedMeasure) -> float:
        if mu.n_atoms == 0:
            return 0.0
        diff = mu.positions - self.sensor_center[None, :]
        t = np.sum(diff * diff, axis=1) / (self.sensor_radius**2)
        psi = self.sensor_amplitude * np.square(np.maximum(1.0 - t, 0.0))
        return float(psi @ mu.weights)

    def evaluate(self, mu: SignedMeasure) -> SignedMeasure:
        if mu.dim != self.dim:
            raise ValueError(f"dimension mismatch: measure {mu.dim}, source {self.dim}")
        level = self.gain * float(np.clip(self.sensed(mu), -self.saturation, self.saturation))
        return SignedMeasure(self.site.reshape(1, -1), np.array([level]), self.dim)

    def to_dict(self) -> dict:
        return {
            "kind": "lipschitz_map",
            "site": [float(v) for v in self.site],
            "gain": float(self.gain),
            "saturation": float(self.saturation),
            "sensor_center": [float(v) for v in self.sensor_center],
            "sensor_radius": float(self.sensor_radius),
            "sensor_amplitude": float(self.sensor_amplitude),
        }


SourceModel = Union[ZeroSource, FixedSource, IntegralDrivenSource]


def eval_velocity(model: VelocityModel, mu: SignedMeasure, x, params: NormParams | None = None):
    """Evaluate the measure-coupled field at one point."""
    if params is not None and model.params is not None and params != model.params:
        raise ValueError("model was certified for different norm prices")
    return model.field(mu)(np.asarray(x, dtype=float))


def freeze_velocity(model: VelocityModel, mu: SignedMeasure) -> FrozenField:
    """Bind the measure argument, yielding a static field for flow maps."""
    return model.field(mu)


def flow_positions(field: FrozenField, X: np.ndarray, tau: float, n_sub: int = 4):
    """Advance many points through the frozen field for time ``tau``.

    Constant fields translate, affine fields use the matrix exponential
    of the augmented generator (exact up to its own rounding), anything
    else takes ``n_sub`` classical Runge-Kutta substeps.
    """
    if not (np.isfinite(tau) and tau >= 0.0):
        raise ValueError(f"tau must be a nonnegative real, got {tau!r}")
    X = np.asarray(X, dtype=float)
    if tau == 0.0 or X.shape[0] == 0:
        return X.copy()
    if field.kind == "constant":
        return X + tau * field.c
    if field.kind == "linear":
        d = field.dim
        gen = np.zeros((d + 1, d + 1))
        gen[:d, :d] = field.A * tau
        gen[:d, d] = field.c * tau
        E = expm(gen)
        return X @ E[:d, :d].T + E[:d, d]
    if n_sub < 1:
        raise ValueError("n_sub must be at least 1")
    h = tau / n_sub
    Y = X.copy()
    for _ in range(n_sub):
        k1 = field.eval_many(Y)
        k2 = field.eval_many(Y + 0.5 * h * k1)
        k3 = field.eval_many(Y + 0.5 * h * k2)
        k4 = field.eval_many(Y + h * k3)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(Y)):
        raise RuntimeError("flow integration produced non-finite coordinates")
    return Y


def flow_map(field: FrozenField, x, tau: float, n_sub: int = 4):
    """Single-point version of :func:`flow_positions`."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    return flow_positions(field, X, tau, n_sub)[0]


def _prune(mu: SignedMeasure, tol: float) -> SignedMeasure:
    if mu.n_atoms == 0 or tol <= 0.0:
        return mu
    keep = np.abs(mu.weights) >= tol
    if np.all(keep):
        return mu
    return SignedMeasure(mu.positions[keep], mu.weights[keep], mu.dim)


def merge_close_atoms(mu: SignedMeasure, eps: float) -> SignedMeasure:
    """Collapse clusters of atoms within ``eps`` of each other.

    Positive and negative atoms are clustered separately: within one
    sign class the weighted centroid is a convex combination and stays
    inside the cluster hull, which a mixed-sign centroid would not.
    Clusters whose net weight rounds to zero are dropped.
    """
    if eps <= 0.0 or mu.n_atoms <= 1:
        return mu
    out_pos = []
    out_w = []
    for sign_mask in (mu.weights > 0.0, mu.weights < 0.0):
        P = mu.positions[sign_mask]
        W = mu.weights[sign_mask]
        n = P.shape[0]
        if n == 0:
            continue
        parent = list(range(n))

        def find(k):
            while parent[k] != k:
                parent[k] = parent[parent[k]]
                k = parent[k]
            return k

        dist = np.sqrt(np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=2))
        for i in range(n):
            for j in range(i + 1, n):
                if dist[i, j] <= eps:
                    parent[find(i)] = find(j)
        clusters: dict[int, list[int]] = {}
        for k in range(n):
            clusters.setdefault(find(k), []).append(k)
        for members in clusters.values():
            w = float(np.sum(W[members]))
            if w == 0.0:
                continue
            centroid = (W[members] @ P[members]) / w
            out_pos.append(centroid)
            out_w.append(w)
    if not out_pos:
        return SignedMeasure.empty(mu.dim)
    return SignedMeasure(np.vstack(out_pos), np.asarray(out_w), mu.dim)


def _partial_state(
    mu: SignedMeasure,
    tau: float,
    velocity: VelocityModel,
    source: SourceModel,
    n_sub: int,
    merge_radius: float,
) -> SignedMeasure:
    field = freeze_velocity(velocity, mu)
    moved = flow_positions(field, mu.positions, tau, n_sub)
    emitted = source.evaluate(mu)
    P = np.vstack([moved, emitted.positions])
    W = np.concatenate([mu.weights, tau * emitted.weights])
    state = SignedMeasure(P, W, mu.dim)
    state = _prune(state, PRUNE_TOLERANCE)
    if merge_radius > 0.0:
        state = merge_close_atoms(state, merge_radius)
    return state


def scheme_step(
    mu: SignedMeasure,
    dt: float,
    velocity: VelocityModel,
    source: SourceModel,
    params: NormParams | None = None,
    *,
    n_sub: int = 4,
    merge_radius: float = 0.0,
) -> SignedMeasure:
    """One splitting step: ride the frozen field, then add ``dt`` worth
    of the frozen source, then canonicalize and prune.

    Weights below ``PRUNE_TOLERANCE`` in absolute value are dropped;
    ``merge_radius > 0`` additionally compresses near-duplicate atoms
    (off by default, exact runs must keep it off).
    """
    if not (np.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be a positive real, got {dt!r}")
    if params is not None and velocity.params is not None and params != velocity.params:
        raise ValueError("velocity was certified for different norm prices")
    return _partial_state(mu, dt, velocity, source, n_sub, merge_radius)


@dataclass(frozen=True)
class Scenario:
    """A complete simulation problem, ready to run at any dyadic level."""

    initial: SignedMeasure
    velocity: VelocityModel
    source: SourceModel
    params: NormParams
    horizon_T: float
    level_k: int
    snapshot_times: tuple[float, ...]
    n_sub: int = 4
    merge_radius: float = 0.0
    constants_override: dict | None = None

    def __post_init__(self):
        if not (np.isfinite(self.horizon_T) and self.horizon_T > 0):
            raise ValueError("horizon_T must be positive")
        if not (isinstance(self.level_k, (int, np.integer)) and self.level_k >= 1):
            raise ValueError("level_k must be an integer >= 1")
        if self.initial.dim != self.velocity.dim:
            raise ValueError(
                f"dimension mismatch: initial {self.initial.dim}, "
                f"velocity {self.velocity.dim}"
            )
        src_dim = getattr(self.source, "dim", None)
        if src_dim is None and isinstance(self.source, FixedSource):
            src_dim = self.source.measure.dim
        if src_dim is not None and src_dim != self.initial.dim:
            raise ValueError(
                f"dimension mismatch: initial {self.initial.dim}, source {src_dim}"
            )
        if self.velocity.params is not None and self.velocity.params != self.params:
            raise ValueError("velocity certificates do not match scenario prices")
        src_params = getattr(self.source, "params", None)
        if src_params is not None and src_params != self.params:
            raise ValueError("source certificates do not match scenario prices")
        times = tuple(sorted(set(float(t) for t in self.snapshot_times)))
        for t in times:
            if not (0.0 <= t <= self.horizon_T):
                raise ValueError(f"snapshot time {t} outside [0, {self.horizon_T}]")
        if not np.isfinite(self.merge_radius) or self.merge_radius < 0:
            raise ValueError("merge_radius must be a nonnegative real")
        if self.n_sub < 1:
            raise ValueError("n_sub must be at least 1")
        object.__setattr__(self, "snapshot_times", times)
        object.__setattr__(self, "level_k", int(self.level_k))

    def with_level(self, k: int) -> "Scenario":
        return replace(self, level_k=k)

    def with_snapshots(self, times) -> "Scenario":
        return replace(self, snapshot_times=tuple(times))

    def with_initial(self, mu: SignedMeasure) -> "Scenario":
        return replace(self, initial=mu)

    def to_dict(self) -> dict:
        out = {
            "initial": measure_to_json(self.initial),
            "velocity": self.velocity.to_dict(),
            "source": self.source.to_dict(),
            "norm": {"a": self.params.a, "b": self.params.b},
            "T": float(self.horizon_T),
            "k": self.level_k,
            "snapshots": list(self.snapshot_times),
            "n_sub": self.n_sub,
            "merge_radius": float(self.merge_radius),
        }
        if self.constants_override:
            out["constants_override"] = dict(self.constants_override)
        return out

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of one simulation, first one always at time zero."""

    scenario_digest: str
    level_k: int
    snapshots: tuple[tuple[float, SignedMeasure], ...]

    def __post_init__(self):
        times = [t for t, _ in self.snapshots]
        if not times or times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.snapshots]

    def state_at(self, t: float) -> SignedMeasure:
        for st, m in self.snapshots:
            if st == t:
                return m
        raise KeyError(f"no snapshot at t = {t}")

    def to_json_obj(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "level_k": self.level_k,
            "snapshots": [
                {"t": float(t), "measure": measure_to_json(m)}
                for t, m in self.snapshots
            ],
        }

    def to_csv_text(self) -> str:
        dim = self.snapshots[0][1].dim
        cols = ",".join(f"x{i}" for i in range(dim))
        lines = [f"t,atom,{cols},w"]
        for t, m in self.snapshots:
            for idx, (p, w) in enumerate(zip(m.positions, m.weights)):
                coords = ",".join(repr(float(c)) for c in p)
                lines.append(f"{float(t)!r},{idx},{coords},{float(w)!r}")
        return "\n".join(lines) + "\n"

    def write(self, path, fmt: str = "csv") -> None:
        if fmt == "csv":
            text = self.to_csv_text()
        elif fmt == "json":
            text = json.dumps(self.to_json_obj()) + "\n"
        else:
            raise ValueError(f"unknown trajectory format {fmt!r}")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def simulate(scenario: Scenario) -> Trajectory:
    """Run the splitting scheme at the scenario's dyadic level.

    The step count is ``2**level_k`` over ``[0, horizon_T]``. Snapshots
    inside a step are produced by the partial-step recipe from the state
    at the step's start. A snapshot exactly at a grid time reuses the
    stepped state, so grid snapshots and the marching state agree bit
    for bit.
    """
    steps = 2**scenario.level_k
    dt = scenario.horizon_T / steps
    eps = 1e-12 * max(1.0, scenario.horizon_T)
    pending = [t for t in scenario.snapshot_times if t > 0.0]
    out: list[tuple[float, SignedMeasure]] = [(0.0, scenario.initial)]
    state = scenario.initial
    ptr = 0
    for i in range(steps):
        t0 = i * dt
        t1 = scenario.horizon_T if i == steps - 1 else (i + 1) * dt
        stepped = scheme_step(
            state,
            dt,
            scenario.velocity,
            scenario.source,
            scenario.params,
            n_sub=scenario.n_sub,
            merge_radius=scenario.merge_radius,
        )
        while ptr < len(pending) and pending[ptr] <= t1 + eps:
            t = pending[ptr]
            tau = t - t0
            if tau >= dt - eps:
                snap = stepped
            else:
                snap = _partial_state(
                    state,
                    tau,
                    scenario.velocity,
                    scenario.source,
                    scenario.n_sub,
                    scenario.merge_radius,
                )
            out.append((t, snap))
            ptr += 1
        state = stepped
    return Trajectory(
        scenario_digest=scenario.digest,
        level_k=scenario.level_k,
        snapshots=tuple(out),
    )
