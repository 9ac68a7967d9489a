"""Command-line front end.

Five subcommands: ``norm`` and ``distance`` answer one-off distance
queries on measure files, ``simulate`` runs a scenario file and writes
the trajectory, ``converge`` compares consecutive refinement levels
against the a priori bound, ``proptest`` runs the seeded property
suite. Everything is deterministic given the inputs and flags.

Exit codes are a stable contract:

* 0 success,
* 1 runtime failure,
* 2 usage or parse error,
* 3 verification failure (duality gap too large, a refinement row
  over its bound, or a failed property).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .analysis import (
    convergence_table,
    format_report_text,
    property_suite,
    report_to_json,
)
from .dynamics import (
    ConstantVelocity,
    FixedSource,
    IntegralDrivenSource,
    KernelVelocity,
    LinearVelocity,
    Scenario,
    ZeroSource,
    simulate,
)
from .flatnorm import NormParams, distance_report
from .measure import SignedMeasure, mass, measure_from_json, support_radius

__all__ = ["main", "CliInputError", "scenario_from_dict"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3

DUALITY_GAP_LIMIT = 1e-6
CONVERGENCE_HEADROOM = 1.05


class CliInputError(Exception):
    """Bad user input; the message names the offending file or field."""


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliInputError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _load_measure(path: str) -> SignedMeasure:
    obj = _load_json(path)
    try:
        return measure_from_json(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise CliInputError(f"{path}: {exc}") from exc


def _norm_params(args) -> NormParams:
    try:
        return NormParams(args.a, args.b)
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc


def velocity_from_dict(obj: dict, params: NormParams, dim: int, default_cap: float):
    kind = obj.get("kind")
    spec = {k: v for k, v in obj.items() if k != "kind"}
    try:
        if kind == "constant":
            return ConstantVelocity(np.asarray(spec.pop("c"), dtype=float))
        if kind == "linear":
            return LinearVelocity(
                np.asarray(spec.pop("A"), dtype=float),
                np.asarray(spec.pop("c"), dtype=float),
                float(spec.pop("cert_radius")),
            )
        if kind == "kernel":
            direction = spec.pop("direction", None)
            if direction is not None:
                direction = np.asarray(direction, dtype=float)
            return KernelVelocity(
                shape=spec.pop("shape"),
                amplitude=float(spec.pop("amplitude")),
                radius=float(spec.pop("radius")),
                mass_cap=float(spec.pop("mass_cap", default_cap)),
                params=params,
                dim=dim,
                direction=direction,
            )
    except KeyError as exc:
        raise CliInputError(f"velocity: missing field {exc.args[0]!r}") from exc
    except (ValueError, TypeError) as exc:
        raise CliInputError(f"velocity: {exc}") from exc
    raise CliInputError(f"velocity: unknown kind {kind!r}")


def source_from_dict(obj: dict, params: NormParams):
    kind = obj.get("kind")
    spec = {k: v for k, v in obj.items() if k != "kind"}
    try:
        if kind == "zero":
            return ZeroSource()
        if kind == "fixed":
            return FixedSource(measure_from_json(spec.pop("measure")))
        if kind == "lipschitz_map":
            return IntegralDrivenSource(
                site=np.asarray(spec.pop("site"), dtype=float),
                gain=float(spec.pop("gain")),
                saturation=float(spec.pop("saturation")),
                sensor_center=np.asarray(spec.pop("sensor_center"), dtype=float),
                sensor_radius=float(spec.pop("sensor_radius")),
                sensor_amplitude=float(spec.pop("sensor_amplitude")),
                params=params,
            )
    except KeyError as exc:
        raise CliInputError(f"source: missing field {exc.args[0]!r}") from exc
    except (ValueError, TypeError) as exc:
        raise CliInputError(f"source: {exc}") from exc
    raise CliInputError(f"source: unknown kind {kind!r}")


def scenario_from_dict(obj: dict) -> Scenario:
    """Build a Scenario from the scenario-file schema.

    Required keys: ``initial``, ``velocity``, ``source``, ``norm``,
    ``T``, ``k``, ``snapshots``. Optional: ``n_sub``, ``merge_radius``,
    ``constants_override`` (a diagnostics knob that replaces individual
    certified constants in the analysis bounds; overriding them with
    values the model does not actually satisfy makes ``converge``
    report a verification failure, which is the documented way to
    exercise that exit path).

    A kernel velocity without an explicit ``mass_cap`` is capped at
    ``mass(initial) + P * T``, the a priori mass bound, so the
    certificate covers the whole run by construction.
    """
    if not isinstance(obj, dict):
        raise CliInputError("scenario: expected a JSON object")
    missing = [
        key
        for key in ("initial", "velocity", "source", "norm", "T", "k", "snapshots")
        if key not in obj
    ]
    if missing:
        raise CliInputError(f"scenario: missing keys {missing}")
    norm = obj["norm"]
    if not isinstance(norm, dict) or "a" not in norm or "b" not in norm:
        raise CliInputError('scenario: "norm" must be an object with "a" and "b"')
    try:
        params = NormParams(float(norm["a"]), float(norm["b"]))
    except (ValueError, TypeError) as exc:
        raise CliInputError(f"norm: {exc}") from exc
    try:
        initial = measure_from_json(obj["initial"])
    except (ValueError, TypeError, KeyError) as exc:
        raise CliInputError(f"initial: {exc}") from exc
    try:
        horizon = float(obj["T"])
        level = int(obj["k"])
        snapshots = tuple(float(t) for t in obj["snapshots"])
    except (ValueError, TypeError) as exc:
        raise CliInputError(f"scenario: {exc}") from exc
    source = source_from_dict(obj["source"], params)
    default_cap = mass(initial) + source.mass_P * horizon
    velocity = velocity_from_dict(
        obj["velocity"], params, initial.dim, max(default_cap, 1e-9)
    )
    override = obj.get("constants_override")
    if override is not None and not isinstance(override, dict):
        raise CliInputError('scenario: "constants_override" must be an object')
    try:
        return Scenario(
            initial=initial,
            velocity=velocity,
            source=source,
            params=params,
            horizon_T=horizon,
            level_k=level,
            snapshot_times=snapshots,
            n_sub=int(obj.get("n_sub", 4)),
            merge_radius=float(obj.get("merge_radius", 0.0)),
            constants_override=override,
        )
    except (ValueError, TypeError) as exc:
        raise CliInputError(f"scenario: {exc}") from exc


def _load_scenario(path: str) -> Scenario:
    return scenario_from_dict(_load_json(path))


def cmd_norm(args) -> int:
    params = _norm_params(args)
    mu = _load_measure(args.measure)
    record = distance_report(
        mu, SignedMeasure.empty(mu.dim), params, check_dual=args.check_dual
    )
    print(json.dumps(record))
    if args.check_dual and record["duality_gap"] > DUALITY_GAP_LIMIT:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_distance(args) -> int:
    params = _norm_params(args)
    mu = _load_measure(args.measure_a)
    nu = _load_measure(args.measure_b)
    if mu.dim != nu.dim:
        raise CliInputError(
            f"dimension mismatch: {args.measure_a} is {mu.dim}-d, "
            f"{args.measure_b} is {nu.dim}-d"
        )
    record = distance_report(mu, nu, params, check_dual=args.check_dual)
    print(json.dumps(record))
    if args.check_dual and record["duality_gap"] > DUALITY_GAP_LIMIT:
        return EXIT_VERIFY
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    trajectory = simulate(scenario)
    trajectory.write(args.out, args.format)
    final = trajectory.snapshots[-1][1]
    print(
        f"steps={2 ** scenario.level_k} "
        f"final_mass={mass(final)!r} "
        f"final_support={support_radius(final)!r}"
    )
    return EXIT_OK


def cmd_converge(args) -> int:
    scenario = _load_scenario(args.scenario)
    try:
        rows = convergence_table(scenario, args.k_min, args.k_max)
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc
    dict_rows = [r.to_json_obj() for r in rows]
    sys.stdout.write(format_report_text(dict_rows))
    print(report_to_json(rows))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(rows) + "\n")
    worst = max(r.sup_distance - CONVERGENCE_HEADROOM * r.bound for r in rows)
    return EXIT_VERIFY if worst > 0.0 else EXIT_OK


def cmd_proptest(args) -> int:
    if args.trials < 1:
        raise CliInputError(f"trials must be >= 1, got {args.trials}")
    params = _norm_params(args)
    report = property_suite(args.seed, args.trials, params)
    sys.stdout.write(format_report_text(report))
    print(report_to_json(report))
    return EXIT_OK if all(r["pass"] for r in report) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signedot",
        description="Transport distances for signed atomic measures, "
        "and the splitting scheme built on them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    prices = argparse.ArgumentParser(add_help=False)
    prices.add_argument("--a", type=float, default=1.0, help="price per unit of created or destroyed mass")
    prices.add_argument("--b", type=float, default=1.0, help="price per unit of mass moved a unit distance")

    p_norm = sub.add_parser("norm", parents=[prices], help="flat norm of one measure file")
    p_norm.add_argument("measure", help="measure JSON file")
    p_norm.add_argument("--check-dual", action="store_true", help="also solve the potential LP and report the gap")
    p_norm.set_defaults(func=cmd_norm)

    p_dist = sub.add_parser("distance", parents=[prices], help="distance between two measure files")
    p_dist.add_argument("measure_a", help="first measure JSON file")
    p_dist.add_argument("measure_b", help="second measure JSON file")
    p_dist.add_argument("--check-dual", action="store_true", help="also solve the potential LP and report the gap")
    p_dist.set_defaults(func=cmd_distance)

    p_sim = sub.add_parser("simulate", help="run a scenario file and write the trajectory")
    p_sim.add_argument("scenario", help="scenario JSON file")
    p_sim.add_argument("--out", required=True, help="output path for the trajectory")
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv", help="trajectory file format")
    p_sim.set_defaults(func=cmd_simulate)

    p_conv = sub.add_parser("converge", help="compare consecutive refinement levels of a scenario")
    p_conv.add_argument("scenario", help="scenario JSON file")
    p_conv.add_argument("k_min", type=int, help="coarsest dyadic level")
    p_conv.add_argument("k_max", type=int, help="finest dyadic level")
    p_conv.add_argument("--out", help="also write the JSON report here")
    p_conv.set_defaults(func=cmd_converge)

    p_prop = sub.add_parser("proptest", parents=[prices], help="run the seeded property suite")
    p_prop.add_argument("--seed", type=int, default=0, help="generator seed")
    p_prop.add_argument("--trials", type=int, default=200, help="trials per property")
    p_prop.set_defaults(func=cmd_proptest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - the contract is an exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
