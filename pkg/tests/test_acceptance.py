"""Acceptance gate for the whole package.

Twelve criteria, each one test, each printing a single verdict line
to the real terminal (past pytest's capture). The tolerances are
pinned here on purpose: the gate must not drift with the library.

Criteria 1-7 check the metric itself against closed forms, dual
solutions, and axioms on seeded random instances. Criterion 8 checks
the regimes where the scheme is exact in float arithmetic. Criteria
9-11 run the flagship kernel scenario through the convergence,
dependence, time-regularity, and splitting harnesses. Criterion 12
pins report determinism at the CLI boundary.
"""

import json
import time

import numpy as np
import pytest

from signedot import (
    ConstantVelocity,
    FixedSource,
    KernelVelocity,
    NormParams,
    Scenario,
    SignedMeasure,
    TheoremConstants,
    ZeroSource,
    cli,
    continuous_dependence_check,
    convergence_table,
    dirac,
    distance_report,
    jordan,
    mass,
    push_forward,
    signed_distance,
    signed_norm,
    simulate,
    splitting_order,
    support_radius,
    time_lipschitz_check,
)

P11 = NormParams(1.0, 1.0)


def _verdict(capsys, num, ok, text):
    line = f"criterion {num:02d} {'PASS' if ok else 'FAIL'}  {text}"
    with capsys.disabled():
        print(line)
    assert ok, line


def _random_signed(rng, dim, max_atoms=12):
    n = int(rng.integers(1, max_atoms + 1))
    pos = rng.uniform(-3.0, 3.0, size=(n, dim))
    w = rng.uniform(0.05, 2.0, size=n) * rng.choice([-1.0, 1.0], size=n)
    return SignedMeasure(pos, w, dim)


def _random_prices(rng):
    return NormParams(float(rng.uniform(0.1, 10.0)), float(rng.uniform(0.1, 10.0)))


# The flagship scenario used by criteria 9-11: five signed atoms on the
# line, an attracting interaction kernel, and a fixed two-atom source.
# The cap of 5.0 leaves room for the perturbed twin in criterion 10
# (worst-case mass 3.61 + 0.9).
FLAG_INITIAL = SignedMeasure(
    [[-1.5], [-0.75], [0.2], [0.9], [1.6]], [0.8, -0.6, 1.0, -0.7, 0.5], 1
)
FLAG_SOURCE = SignedMeasure([[-0.5], [0.5]], [0.5, -0.4], 1)
FLAG_GRID = (0.25, 0.5, 0.75, 1.0)


def _flagship(with_source=True, k=4):
    vel = KernelVelocity("interaction", 0.4, 2.0, 5.0, P11, 1)
    src = FixedSource(FLAG_SOURCE) if with_source else ZeroSource()
    return Scenario(FLAG_INITIAL, vel, src, P11, 1.0, k, FLAG_GRID)


def test_criterion_01_two_atom_closed_form(capsys):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(1000):
        dim = int(rng.integers(1, 3))
        x = rng.uniform(-5.0, 5.0, size=dim)
        y = rng.uniform(-5.0, 5.0, size=dim)
        a = float(rng.uniform(0.1, 10.0))
        b = float(rng.uniform(0.1, 10.0))
        got = signed_distance(dirac(x), dirac(y), NormParams(a, b))
        want = min(2.0 * a, b * float(np.linalg.norm(x - y)))
        worst = max(worst, abs(got - want))
    _verdict(
        capsys, 1, worst <= 1e-12,
        f"two-atom closed form min(2a, b|x-y|): max deviation {worst:.3e} over 1000 draws",
    )


def test_criterion_02_vanishing_pair_sequences(capsys):
    worst = 0.0
    # unit atoms drifting together: distance collapses like 1/n
    for n in range(3, 11):
        d = signed_distance(dirac([float(n)]), dirac([n + 1.0 / n]), P11)
        worst = max(worst, abs(d - 1.0 / n))
    # growing opposite atoms at +-1/n^2: norm collapses like 2/n
    for n in range(2, 11):
        mu = SignedMeasure(
            [[1.0 / n**2], [-1.0 / n**2]], [float(n), -float(n)], 1
        )
        worst = max(worst, abs(signed_norm(mu, P11) - 2.0 / n))
    _verdict(
        capsys, 2, worst <= 1e-12,
        f"vanishing-pair sequences 1/n and 2/n: max deviation {worst:.3e}",
    )


def test_criterion_03_strong_duality(capsys):
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(500):
        dim = int(rng.integers(1, 3))
        prm = _random_prices(rng)
        mu = _random_signed(rng, dim)
        nu = _random_signed(rng, dim)
        rep = distance_report(mu, nu, prm, check_dual=True)
        gap = rep["duality_gap"] / max(1.0, rep["value"])
        worst = max(worst, gap)
    _verdict(
        capsys, 3, worst <= 1e-7,
        f"primal vs dual on 500 signed pairs: max relative gap {worst:.3e}",
    )


def test_criterion_04_metric_axioms(capsys):
    rng = np.random.default_rng(104)
    sym_ok = True
    worst_tri = 0.0
    worst_hom = 0.0
    for _ in range(500):
        dim = int(rng.integers(1, 3))
        prm = _random_prices(rng)
        mu = _random_signed(rng, dim)
        nu = _random_signed(rng, dim)
        eta = _random_signed(rng, dim)
        d_mn = signed_distance(mu, nu, prm)
        sym_ok = sym_ok and d_mn == signed_distance(nu, mu, prm)
        d_me = signed_distance(mu, eta, prm)
        d_ne = signed_distance(nu, eta, prm)
        worst_tri = max(worst_tri, d_me - (d_mn + d_ne))
        lam = float(rng.uniform(-3.0, 3.0))
        ref = abs(lam) * signed_norm(mu, prm)
        worst_hom = max(
            worst_hom, abs(signed_norm(lam * mu, prm) - ref) / max(1.0, ref)
        )
    ok = sym_ok and worst_tri <= 1e-9 and worst_hom <= 1e-9
    _verdict(
        capsys, 4, ok,
        "metric axioms on 500 triples: symmetry "
        + ("exact" if sym_ok else "BROKEN")
        + f", triangle excess {worst_tri:.3e}, homogeneity dev {worst_hom:.3e}",
    )


def test_criterion_05_cancellation(capsys):
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(200):
        dim = int(rng.integers(1, 3))
        prm = _random_prices(rng)
        mu = _random_signed(rng, dim)
        nu = _random_signed(rng, dim)
        eta = _random_signed(rng, dim)
        worst = max(
            worst,
            abs(
                signed_distance(mu + eta, nu + eta, prm)
                - signed_distance(mu, nu, prm)
            ),
        )
    _verdict(
        capsys, 5, worst <= 1e-9,
        f"common-part cancellation on 200 instances: max deviation {worst:.3e}",
    )


def test_criterion_06_sandwich_and_mass_gap(capsys):
    rng = np.random.default_rng(106)
    ok = True
    worst_lo = 0.0
    worst_hi = 0.0
    worst_gap = 0.0
    for _ in range(200):
        dim = int(rng.integers(1, 3))
        prm = _random_prices(rng)
        mu = _random_signed(rng, dim)
        n11 = signed_norm(mu, P11)
        nab = signed_norm(mu, prm)
        lo = min(prm.a, prm.b) * n11
        hi = max(prm.a, prm.b) * n11
        worst_lo = max(worst_lo, lo - nab)
        worst_hi = max(worst_hi, nab - hi)
        parts = jordan(mu)
        gap = prm.a * abs(mass(parts.plus) - mass(parts.minus))
        worst_gap = max(worst_gap, gap - nab)
        ok = ok and lo - 1e-9 <= nab <= hi + 1e-9 and gap <= nab + 1e-9
    _verdict(
        capsys, 6, ok,
        f"price sandwich and mass gap on 200 instances: excesses "
        f"{worst_lo:.3e} / {worst_hi:.3e} / {worst_gap:.3e}",
    )


def test_criterion_07_scaling_and_dilation(capsys):
    rng = np.random.default_rng(107)
    worst_scale = 0.0
    worst_dil = 0.0
    for lam in (0.5, 2.0, 5.0):
        for _ in range(60):
            dim = int(rng.integers(1, 3))
            prm = _random_prices(rng)
            mu = _random_signed(rng, dim, max_atoms=8)
            nu = _random_signed(rng, dim, max_atoms=8)
            base = signed_distance(mu, nu, prm)
            at_scaled = signed_distance(
                mu, nu, NormParams(lam * prm.a, lam * prm.b)
            )
            worst_scale = max(
                worst_scale,
                abs(at_scaled - lam * base) / max(1.0, lam * base),
            )
            lhs = signed_distance(
                push_forward(mu, lambda p: lam * p),
                push_forward(nu, lambda p: lam * p),
                prm,
            )
            rhs = signed_distance(mu, nu, NormParams(prm.a, lam * prm.b))
            worst_dil = max(worst_dil, abs(lhs - rhs) / max(1.0, rhs))
    ok = worst_scale <= 1e-9 and worst_dil <= 1e-9
    _verdict(
        capsys, 7, ok,
        f"price scaling and dilation at lambda in {{0.5, 2, 5}}: "
        f"max relative deviations {worst_scale:.3e} / {worst_dil:.3e}",
    )


def test_criterion_08_exact_regimes(capsys):
    grid = (0.25, 0.5, 0.75, 1.0)
    mu0 = SignedMeasure([[-1.0], [1.0]], [1.0, -0.5], 1)
    sig = SignedMeasure([[-0.5], [0.5]], [0.5, -0.25], 1)

    # pure reaction: every level reproduces mu0 + t*sigma bit for bit
    reaction_ok = True
    sc = Scenario(
        mu0, ConstantVelocity(np.zeros(1)), FixedSource(sig), P11, 1.0, 1, grid
    )
    for k in range(1, 7):
        traj = simulate(sc.with_level(k))
        for t in grid:
            reaction_ok = reaction_ok and traj.state_at(t) == mu0 + t * sig

    # pure transport at constant speed: exact translation
    translate_ok = True
    scv = Scenario(
        mu0, ConstantVelocity(np.array([0.5])), ZeroSource(), P11, 1.0, 1, grid
    )
    for k in range(1, 7):
        traj = simulate(scv.with_level(k))
        for t in grid:
            want = SignedMeasure(mu0.positions + 0.5 * t, mu0.weights, 1)
            translate_ok = translate_ok and traj.state_at(t) == want

    # growth bounds on the flagship run, slack measured in floats
    sck = _flagship(k=5)
    con = TheoremConstants.from_scenario(sck)
    traj = simulate(sck)
    r0 = max(support_radius(sck.initial), con.R)
    worst_mass = 0.0
    worst_supp = 0.0
    for t in grid:
        st = traj.state_at(t)
        worst_mass = max(worst_mass, mass(st) - (con.mass0 + con.P * t))
        worst_supp = max(worst_supp, support_radius(st) - (r0 + con.M * t))
    bounds_ok = worst_mass <= 1e-12 and worst_supp <= 1e-12

    ok = reaction_ok and translate_ok and bounds_ok
    _verdict(
        capsys, 8, ok,
        f"exact regimes: reaction {'exact' if reaction_ok else 'BROKEN'}, "
        f"translation {'exact' if translate_ok else 'BROKEN'}, "
        f"mass/support slack {worst_mass:.3e} / {worst_supp:.3e}",
    )


def test_criterion_09_level_cauchy_decay(capsys):
    start = time.monotonic()
    rows = convergence_table(_flagship(), 4, 8)
    elapsed = time.monotonic() - start
    ratios = [r.ratio for r in rows[1:]]
    ratios_ok = all(r is not None and 0.3 <= r <= 0.7 for r in ratios)
    bound_ok = all(r.sup_distance <= r.bound for r in rows)
    ok = ratios_ok and bound_ok and elapsed <= 60.0
    shown = ", ".join("-" if r is None else f"{r:.3f}" for r in ratios)
    _verdict(
        capsys, 9, ok,
        f"level-to-level decay k=4..8: ratios [{shown}] in [0.3, 0.7], "
        f"sup under bound {bound_ok}, {elapsed:.1f}s",
    )


def test_criterion_10_continuous_dependence(capsys):
    bump = dirac([0.3], 0.01)
    rep = continuous_dependence_check(_flagship(), bump, k=8)
    ok = rep["max_ratio_plain"] <= 1.05 and rep["max_ratio_alt"] <= 1.05
    _verdict(
        capsys, 10, ok,
        f"perturbation growth at k=8 under both rate candidates: "
        f"max ratio {rep['max_ratio_plain']:.4f} (rate {rep['c1_plain']:.3f}) / "
        f"{rep['max_ratio_alt']:.4f} (rate {rep['c1_alt']:.3f}), "
        f"active {rep['active']}",
    )


def test_criterion_11_time_lipschitz_and_splitting(capsys):
    tl = time_lipschitz_check(_flagship(), k=6)
    taus = [2.0**-j for j in range(8, 3, -1)]
    split = splitting_order(_flagship(with_source=False), 12, 0.5, taus)
    ok = tl["pass"] and split["slope"] >= 1.8
    _verdict(
        capsys, 11, ok,
        f"time regularity at k=6 (max excess {tl['max_excess']:.3e}) and "
        f"splitting order vs k=12 reference (slope {split['slope']:.3f})",
    )


def test_criterion_12_report_determinism(capsys, tmp_path):
    def run(argv):
        code = cli.main(argv)
        return code, capsys.readouterr().out

    path = tmp_path / "flagship.json"
    path.write_text(
        json.dumps(
            {
                "initial": {
                    "dim": 1,
                    "atoms": [
                        {"x": [float(p[0])], "w": float(w)}
                        for p, w in zip(FLAG_INITIAL.positions, FLAG_INITIAL.weights)
                    ],
                },
                "velocity": {
                    "kind": "kernel",
                    "shape": "interaction",
                    "amplitude": 0.4,
                    "radius": 2.0,
                    "mass_cap": 5.0,
                },
                "source": {
                    "kind": "fixed",
                    "measure": {
                        "dim": 1,
                        "atoms": [
                            {"x": [-0.5], "w": 0.5},
                            {"x": [0.5], "w": -0.4},
                        ],
                    },
                },
                "norm": {"a": 1.0, "b": 1.0},
                "T": 1.0,
                "k": 3,
                "snapshots": list(FLAG_GRID),
            }
        )
    )
    prop_args = ["proptest", "--seed", "11", "--trials", "20"]
    conv_args = ["converge", str(path), "3", "5"]
    c1, prop_one = run(prop_args)
    c2, prop_two = run(prop_args)
    c3, conv_one = run(conv_args)
    c4, conv_two = run(conv_args)
    ok = (
        (c1, c2, c3, c4) == (0, 0, 0, 0)
        and prop_one == prop_two
        and conv_one == conv_two
        and len(prop_one) > 0
        and len(conv_one) > 0
    )
    _verdict(
        capsys, 12, ok,
        f"proptest and converge byte-identical on repeat: "
        f"{len(prop_one)} and {len(conv_one)} bytes",
    )
