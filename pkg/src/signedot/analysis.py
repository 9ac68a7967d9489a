"""Quantitative checks: refinement decay, stability, and the property suite.

The dyadic scheme from :mod:`signedot.dynamics` comes with explicit
worst-case constants built from the model certificates. This module
evaluates those bounds on concrete runs:

* ``convergence_table`` measures the distance between consecutive
  refinement levels and compares it to the geometric a priori bound;
* ``continuous_dependence_check`` perturbs the initial state and
  compares the measured divergence to the exponential envelope (two
  candidate growth rates are reported, see ``TheoremConstants``);
* ``time_lipschitz_check`` and ``splitting_order`` probe the in-time
  regularity of one trajectory;
* ``property_suite`` fuzzes the distance layer's algebraic identities
  on seeded random instances and emits a deterministic report.

All randomness flows through explicitly seeded generators, so every
report is reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Scenario, freeze_velocity, flow_positions, simulate
from .flatnorm import (
    NormParams,
    dual_value,
    gw_distance,
    pairwise_distance_matrix,
    signed_distance,
    signed_norm,
    w1_classic,
)
from .measure import (
    SignedMeasure,
    dirac,
    jordan,
    linear_combine,
    mass,
    push_forward,
)

__all__ = [
    "TheoremConstants",
    "ConvergenceRow",
    "convergence_table",
    "continuous_dependence_check",
    "time_lipschitz_check",
    "splitting_order",
    "property_suite",
    "format_report_text",
    "report_to_json",
]


@dataclass(frozen=True)
class TheoremConstants:
    """Certified model constants and the derived worst-case rates.

    ``L``, ``M`` bound the field's Lipschitz constant and magnitude,
    ``K`` relates field differences to the transport distance of the
    driving measures, ``P``, ``Q``, ``R`` bound the source's mass, its
    transport-distance Lipschitz constant and its support radius, and
    ``mass0`` is the initial total variation.

    Two candidate growth rates are exposed for the stability envelope:
    ``c1_dependence`` (the plain rate) and ``c1_dependence_alt`` (same
    with the coupling term scaled by the movement price ``b``, which is
    the factor the step-by-step expansion actually produces). They agree
    when ``b == 1``; checks use the larger of the two and report which
    one was binding.
    """

    L: float
    M: float
    K: float
    P: float
    Q: float
    R: float
    a: float
    b: float
    mass0: float

    @staticmethod
    def from_scenario(scenario: Scenario) -> "TheoremConstants":
        v, s = scenario.velocity, scenario.source
        values = {
            "L": v.lip_L,
            "M": v.bound_M,
            "K": v.h1_K,
            "P": s.mass_P,
            "Q": s.lip_Q,
            "R": s.radius_R,
            "a": scenario.params.a,
            "b": scenario.params.b,
            "mass0": mass(scenario.initial),
        }
        if scenario.constants_override:
            unknown = set(scenario.constants_override) - set(values)
            if unknown:
                raise ValueError(f"unknown constants_override keys: {sorted(unknown)}")
            values.update({k: float(x) for k, x in scenario.constants_override.items()})
        return TheoremConstants(**values)

    def c1_dependence(self, mass_other: float | None = None) -> float:
        m = self.mass0 if mass_other is None else min(self.mass0, mass_other)
        return 2.0 * self.L + 2.0 * self.K * (self.P + m) + self.Q

    def c1_dependence_alt(self, mass_other: float | None = None) -> float:
        m = self.mass0 if mass_other is None else min(self.mass0, mass_other)
        return 2.0 * self.L + 2.0 * self.b * self.K * (self.P + m) + self.Q

    @property
    def c1_cauchy(self) -> float:
        return (
            1.0
            + 3.0 * self.L
            + (self.P + self.mass0) * (1.0 + self.L)
            + self.K * self.P
            + self.Q
        )

    @property
    def c2_cauchy(self) -> float:
        return 0.25 * (
            self.M * self.P * (1.0 + 2.0 * self.K)
            + self.mass0
            + self.P * (1.0 + self.a)
        )

    def cauchy_bound(self, k: int) -> float:
        c1 = self.c1_cauchy
        return (self.c2_cauchy / c1) * math.expm1(c1) * 2.0**-k

    def c2_time_lipschitz(self, t: float, tau: float) -> float:
        return self.P + self.b * self.M * (self.P * (t + tau) + self.mass0)

    def grid_slack(self, k: int) -> float:
        return 2.0 * 2.0**-k * (self.b * self.M * (self.P + self.mass0) + self.P)


@dataclass(frozen=True)
class ConvergenceRow:
    """One refinement comparison: level ``k`` against level ``k + 1``."""

    k: int
    sup_distance: float
    ratio: float | None
    bound: float

    def to_json_obj(self) -> dict:
        return {
            "k": self.k,
            "sup_distance": self.sup_distance,
            "ratio": self.ratio,
            "bound": self.bound,
        }


def convergence_table(
    scenario: Scenario, k_min: int, k_max: int, grid=None
) -> list[ConvergenceRow]:
    """Sup distance between consecutive dyadic levels over a time grid.

    Rows cover ``k = k_min .. k_max - 1``; each row's ``ratio`` divides
    its sup by the previous row's (``None`` on the first row or after a
    zero). ``bound`` is the a priori geometric envelope. ``k_min`` must
    clear ``ceil(log2(max(L, 1)))`` so the coarsest step already
    resolves the field's stiffness.
    """
    if not (1 <= k_min < k_max):
        raise ValueError("need 1 <= k_min < k_max")
    constants = TheoremConstants.from_scenario(scenario)
    k_floor = max(1, math.ceil(math.log2(max(constants.L, 1.0))))
    if k_min < k_floor:
        raise ValueError(f"k_min = {k_min} below required floor {k_floor}")
    times = tuple(grid) if grid is not None else scenario.snapshot_times
    if not times:
        raise ValueError("need a nonempty snapshot grid")
    runs = {
        k: simulate(scenario.with_level(k).with_snapshots(times))
        for k in range(k_min, k_max + 1)
    }
    rows: list[ConvergenceRow] = []
    prev_sup: float | None = None
    for k in range(k_min, k_max):
        sup = 0.0
        coarse, fine = runs[k], runs[k + 1]
        for t in times:
            d = signed_distance(coarse.state_at(t), fine.state_at(t), scenario.params)
            sup = max(sup, d)
        ratio = None
        if prev_sup is not None and prev_sup > 0.0:
            ratio = sup / prev_sup
        rows.append(
            ConvergenceRow(
                k=k, sup_distance=sup, ratio=ratio, bound=constants.cauchy_bound(k)
            )
        )
        prev_sup = sup
    return rows


def continuous_dependence_check(
    scenario: Scenario, perturbation: SignedMeasure, k: int
) -> dict:
    """Divergence of a perturbed run against the exponential envelope.

    Simulates the scenario and its perturbed twin at level ``k`` and
    reports, for every snapshot time, the measured distance divided by
    ``dist(0) * exp(c1 * t)`` for both candidate rates. The ``active``
    rate is the larger one; its ratios are the ones a pass/fail gate
    should use.
    """
    if perturbation.n_atoms == 0:
        raise ValueError("perturbation must be nonzero")
    if k < 1:
        raise ValueError("k must be >= 1")
    base_sc = scenario.with_level(k)
    pert_sc = base_sc.with_initial(scenario.initial + perturbation)
    constants = TheoremConstants.from_scenario(scenario)
    eps0 = signed_norm(perturbation, scenario.params)
    other_mass = mass(pert_sc.initial)
    c1_plain = constants.c1_dependence(other_mass)
    c1_alt = constants.c1_dependence_alt(other_mass)
    active = "plain" if c1_plain >= c1_alt else "alt"
    base = simulate(base_sc)
    pert = simulate(pert_sc)
    times = []
    distances = []
    ratios_plain = []
    ratios_alt = []
    for t in base_sc.snapshot_times:
        d = signed_distance(base.state_at(t), pert.state_at(t), scenario.params)
        times.append(t)
        distances.append(d)
        ratios_plain.append(d / (eps0 * math.exp(c1_plain * t)))
        ratios_alt.append(d / (eps0 * math.exp(c1_alt * t)))
    ratios_active = ratios_plain if active == "plain" else ratios_alt
    return {
        "k": k,
        "initial_distance": eps0,
        "c1_plain": c1_plain,
        "c1_alt": c1_alt,
        "active": active,
        "times": times,
        "distances": distances,
        "ratios_plain": ratios_plain,
        "ratios_alt": ratios_alt,
        "max_ratio_plain": max(ratios_plain),
        "max_ratio_alt": max(ratios_alt),
        "max_ratio_active": max(ratios_active),
    }


def time_lipschitz_check(scenario: Scenario, k: int, grid=None) -> dict:
    """In-time regularity of one trajectory against the linear envelope.

    For every ordered pair of grid times the measured distance must stay
    below ``c2(t, tau) * tau`` plus a grid slack proportional to the
    step size, both built from the certified constants.
    """
    times = tuple(grid) if grid is not None else scenario.snapshot_times
    if len(times) < 2:
        raise ValueError("need at least two grid times")
    constants = TheoremConstants.from_scenario(scenario)
    run = simulate(scenario.with_level(k).with_snapshots(times))
    slack = constants.grid_slack(k)
    rows = []
    worst_excess = -math.inf
    for i, t in enumerate(times):
        for t2 in times[i + 1 :]:
            tau = t2 - t
            d = signed_distance(run.state_at(t), run.state_at(t2), scenario.params)
            bound = constants.c2_time_lipschitz(t, tau) * tau + slack
            rows.append({"t": t, "tau": tau, "distance": d, "bound": bound})
            worst_excess = max(worst_excess, d - bound)
    return {
        "k": k,
        "slack": slack,
        "rows": rows,
        "max_excess": worst_excess,
        "pass": worst_excess <= 0.0,
    }


def splitting_order(
    scenario: Scenario, k_ref: int, t0: float, taus
) -> dict:
    """Decay rate of the one-chunk splitting residual.

    A reference trajectory at level ``k_ref`` provides states at ``t0``
    and ``t0 + tau``. For each ``tau`` the state at ``t0`` is advanced
    in a single frozen chunk (one flow ride plus ``tau`` times the
    frozen source) and compared against the reference. The residual of
    a first-order splitting decays quadratically; the slope is the
    log-log regression coefficient.

    All requested times must sit on the reference grid so no secondary
    interpolation error enters the measurement.
    """
    taus = sorted(float(t) for t in taus)
    if not taus or taus[0] <= 0:
        raise ValueError("taus must be positive")
    dt_ref = scenario.horizon_T / 2**k_ref
    for t in [t0] + [t0 + tau for tau in taus]:
        steps = t / dt_ref
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"time {t} is not on the level-{k_ref} grid")
    grid = [t0] + [t0 + tau for tau in taus]
    run = simulate(scenario.with_level(k_ref).with_snapshots(grid))
    state0 = run.state_at(t0)
    field = freeze_velocity(scenario.velocity, state0)
    emitted = scenario.source.evaluate(state0)
    residuals = []
    for tau in taus:
        n_sub = max(16, int(round(tau / dt_ref)) * 2)
        moved = flow_positions(field, state0.positions, tau, n_sub)
        chunk = SignedMeasure(
            np.vstack([moved, emitted.positions]),
            np.concatenate([state0.weights, tau * emitted.weights]),
            state0.dim,
        )
        residuals.append(
            signed_distance(run.state_at(t0 + tau), chunk, scenario.params)
        )
    if any(r <= 0.0 for r in residuals):
        slope = math.inf
    else:
        slope = float(
            np.polyfit(np.log(np.asarray(taus)), np.log(np.asarray(residuals)), 1)[0]
        )
    return {"t0": t0, "taus": taus, "residuals": residuals, "slope": slope}


# ---------------------------------------------------------------------------
# Property suite


def _random_measure(rng, dim, max_atoms=12, min_weight=0.05):
    n = int(rng.integers(1, max_atoms + 1))
    P = rng.uniform(-1.0, 1.0, size=(n, dim))
    W = rng.uniform(min_weight, 2.0, size=n) * rng.choice([-1.0, 1.0], size=n)
    return SignedMeasure(P, W, dim)


def _random_positive(rng, dim, max_atoms=12):
    m = _random_measure(rng, dim, max_atoms)
    return SignedMeasure(m.positions, np.abs(m.weights), m.dim)


def _rel_gap(x: float, y: float) -> float:
    return abs(x - y) / max(1.0, abs(x), abs(y))


def _prop_two_atom_closed_form(rng, params):
    dim = int(rng.integers(1, 3))
    x = rng.uniform(-2.0, 2.0, size=dim)
    y = rng.uniform(-2.0, 2.0, size=dim)
    aa = rng.uniform(0.1, 10.0)
    bb = rng.uniform(0.1, 10.0)
    mu = dirac(x) - dirac(y)
    if mu.n_atoms == 0:
        return 0.0
    got = signed_norm(mu, NormParams(aa, bb))
    want = min(2.0 * aa, bb * pairwise_distance_matrix(x[None, :], y[None, :])[0, 0])
    return abs(got - want)


def _prop_symmetry(rng, params):
    dim = int(rng.integers(1, 3))
    mu = _random_measure(rng, dim)
    nu = _random_measure(rng, dim)
    return abs(signed_distance(mu, nu, params) - signed_distance(nu, mu, params))


def _prop_identity(rng, params):
    mu = _random_measure(rng, int(rng.integers(1, 3)))
    return abs(signed_distance(mu, mu, params))


def _prop_separation(rng, params):
    dim = int(rng.integers(1, 3))
    mu = _random_measure(rng, dim)
    nu = _random_measure(rng, dim)
    if mu == nu:
        return 0.0
    return 1.0 if signed_distance(mu, nu, params) <= 0.0 else 0.0


def _prop_triangle(rng, params):
    dim = int(rng.integers(1, 3))
    mu, nu, eta = (_random_measure(rng, dim) for _ in range(3))
    lhs = signed_distance(mu, eta, params)
    rhs = signed_distance(mu, nu, params) + signed_distance(nu, eta, params)
    return max(0.0, lhs - rhs)


def _prop_homogeneity(rng, params):
    mu = _random_measure(rng, int(rng.integers(1, 3)))
    lam = rng.uniform(-3.0, 3.0)
    return _rel_gap(signed_norm(lam * mu, params), abs(lam) * signed_norm(mu, params))


def _prop_norm_subadditivity(rng, params):
    dim = int(rng.integers(1, 3))
    mu, eta = _random_measure(rng, dim), _random_measure(rng, dim)
    return max(
        0.0,
        signed_norm(mu + eta, params)
        - signed_norm(mu, params)
        - signed_norm(eta, params),
    )


def _prop_cancellation(rng, params):
    dim = int(rng.integers(1, 3))
    mu, nu, eta = (_random_measure(rng, dim) for _ in range(3))
    return abs(
        signed_distance(mu + eta, nu + eta, params) - signed_distance(mu, nu, params)
    )


def _prop_pair_subadditivity(rng, params):
    dim = int(rng.integers(1, 3))
    mu1, nu1 = _random_measure(rng, dim), _random_measure(rng, dim)
    mu2, nu2 = _random_measure(rng, dim), _random_measure(rng, dim)
    lhs = signed_distance(mu1 + mu2, nu1 + nu2, params)
    rhs = signed_distance(mu1, nu1, params) + signed_distance(mu2, nu2, params)
    return max(0.0, lhs - rhs)


def _prop_decomposition_independence(rng, params):
    dim = int(rng.integers(1, 3))
    mu = _random_measure(rng, dim)
    pad = _random_positive(rng, dim, max_atoms=4)
    parts = jordan(mu)
    inflated_plus = linear_combine(1.0, parts.plus, 1.0, pad)
    inflated_minus = linear_combine(1.0, parts.minus, 1.0, pad)
    via_inflated, _ = gw_distance(inflated_plus, inflated_minus, params)
    return abs(signed_norm(mu, params) - via_inflated)


def _prop_price_scaling(rng, params):
    dim = int(rng.integers(1, 3))
    mu, nu = _random_measure(rng, dim), _random_measure(rng, dim)
    lam = float(rng.choice([0.5, 2.0, 5.0]))
    base = signed_distance(mu, nu, params)
    scaled = signed_distance(mu, nu, NormParams(lam * params.a, lam * params.b))
    return _rel_gap(scaled, lam * base)


def _prop_dilation(rng, params):
    dim = int(rng.integers(1, 3))
    mu, nu = _random_measure(rng, dim), _random_measure(rng, dim)
    lam = float(rng.choice([0.5, 2.0, 5.0]))
    dilate = lambda p: lam * p
    lhs = signed_distance(push_forward(mu, dilate), push_forward(nu, dilate), params)
    rhs = signed_distance(mu, nu, NormParams(params.a, lam * params.b))
    return _rel_gap(lhs, rhs)


def _prop_norm_equivalence(rng, params):
    mu = _random_measure(rng, int(rng.integers(1, 3)))
    aa = rng.uniform(0.1, 10.0)
    bb = rng.uniform(0.1, 10.0)
    unit = signed_norm(mu, NormParams(1.0, 1.0))
    ab = signed_norm(mu, NormParams(aa, bb))
    lo = min(aa, bb) * unit
    hi = max(aa, bb) * unit
    return max(0.0, lo - ab, ab - hi)


def _prop_mass_gap(rng, params):
    mu = _random_measure(rng, int(rng.integers(1, 3)))
    parts = jordan(mu)
    gap = params.a * abs(mass(parts.plus) - mass(parts.minus))
    return max(0.0, gap - signed_norm(mu, params))


def _prop_strong_duality(rng, params):
    dim = int(rng.integers(1, 3))
    mu, nu = _random_measure(rng, dim), _random_measure(rng, dim)
    primal = signed_distance(mu, nu, params)
    dual, _ = dual_value(mu, nu, params)
    return _rel_gap(primal, dual)


def _prop_w1_comparison(rng, params):
    dim = int(rng.integers(1, 3))
    mu = _random_positive(rng, dim)
    nu = _random_positive(rng, dim)
    nu = (mass(mu) / mass(nu)) * nu
    w1, _ = w1_classic(mu, nu)
    gw, _ = gw_distance(mu, nu, params)
    return max(0.0, gw - params.b * w1)


_PROPERTIES = [
    ("two_atom_closed_form", _prop_two_atom_closed_form, 1e-12),
    ("metric_symmetry", _prop_symmetry, 0.0),
    ("metric_identity", _prop_identity, 1e-12),
    ("metric_separation", _prop_separation, 0.0),
    ("triangle_inequality", _prop_triangle, 1e-9),
    ("homogeneity", _prop_homogeneity, 1e-9),
    ("norm_subadditivity", _prop_norm_subadditivity, 1e-9),
    ("cancellation_invariance", _prop_cancellation, 1e-9),
    ("pair_subadditivity", _prop_pair_subadditivity, 1e-9),
    ("decomposition_independence", _prop_decomposition_independence, 1e-9),
    ("price_scaling", _prop_price_scaling, 1e-9),
    ("dilation_identity", _prop_dilation, 1e-9),
    ("norm_equivalence", _prop_norm_equivalence, 1e-9),
    ("mass_gap", _prop_mass_gap, 1e-9),
    ("strong_duality", _prop_strong_duality, 1e-7),
    ("w1_comparison", _prop_w1_comparison, 1e-9),
]


def property_suite(seed: int, trials: int, params: NormParams) -> list[dict]:
    """Fuzz every distance-layer identity and report the worst violation.

    Each property draws its own generator from ``(seed, index)``, so
    reports are reproducible and independent of the property order.
    Returns a list of ``{"property", "trials", "max_violation", "pass"}``
    records.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    report = []
    for idx, (name, fn, tol) in enumerate(_PROPERTIES):
        rng = np.random.default_rng([seed, idx])
        worst = 0.0
        for _ in range(trials):
            worst = max(worst, fn(rng, params))
        report.append(
            {
                "property": name,
                "trials": trials,
                "max_violation": worst,
                "pass": worst <= tol,
            }
        )
    return report


def format_report_text(rows: list[dict]) -> str:
    """Aligned-column rendering of a list of flat dict records."""
    if not rows:
        return ""
    cols = list(rows[0].keys())
    table = [[_cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in table)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    for row in table:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _cell(value) -> str:
    if isinstance(value, bool):
        return "pass" if value else "FAIL"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "-"
    return str(value)


def report_to_json(rows) -> str:
    """Canonical single-line JSON for report rows (floats via repr)."""
    payload = [r.to_json_obj() if hasattr(r, "to_json_obj") else r for r in rows]
    return json.dumps(payload)
