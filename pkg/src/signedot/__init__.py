"""Transport distances for signed atomic measures, and a splitting
scheme for nonlocal transport with sources built on top of them.

The layers, bottom up:

* :mod:`signedot.measure` — canonical signed atomic measures;
* :mod:`signedot.flatnorm` — the two-price transport distance, primal
  and dual solvers;
* :mod:`signedot.dynamics` — velocity/source models with certified
  constants, flows, the dyadic splitting scheme;
* :mod:`signedot.analysis` — convergence, stability and regularity
  checks against the a priori bounds, plus the property suite;
* :mod:`signedot.cli` — the ``signedot`` command.
"""

from .measure import (
    Atom,
    JordanPair,
    SignedMeasure,
    canonicalize,
    common_measure,
    dirac,
    jordan,
    linear_combine,
    mass,
    measure_from_json,
    measure_to_json,
    push_forward,
    read_measure,
    support_radius,
    write_measure,
)
from .flatnorm import (
    DualSolution,
    NormParams,
    TransportSolution,
    distance_report,
    dual_value,
    gw_distance,
    pairwise_distance_matrix,
    signed_distance,
    signed_norm,
    signed_transport,
    solve_transportation,
    w1_classic,
)
from .dynamics import (
    ConstantVelocity,
    FixedSource,
    FrozenField,
    IntegralDrivenSource,
    KernelVelocity,
    LinearVelocity,
    Scenario,
    SourceModel,
    Trajectory,
    VelocityModel,
    ZeroSource,
    eval_velocity,
    flow_map,
    flow_positions,
    freeze_velocity,
    merge_close_atoms,
    scheme_step,
    simulate,
)
from .analysis import (
    ConvergenceRow,
    TheoremConstants,
    continuous_dependence_check,
    convergence_table,
    property_suite,
    splitting_order,
    time_lipschitz_check,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "JordanPair",
    "SignedMeasure",
    "canonicalize",
    "common_measure",
    "dirac",
    "jordan",
    "linear_combine",
    "mass",
    "measure_from_json",
    "measure_to_json",
    "push_forward",
    "read_measure",
    "support_radius",
    "write_measure",
    "DualSolution",
    "NormParams",
    "TransportSolution",
    "distance_report",
    "dual_value",
    "gw_distance",
    "pairwise_distance_matrix",
    "signed_distance",
    "signed_norm",
    "signed_transport",
    "solve_transportation",
    "w1_classic",
    "ConstantVelocity",
    "FixedSource",
    "FrozenField",
    "IntegralDrivenSource",
    "KernelVelocity",
    "LinearVelocity",
    "Scenario",
    "SourceModel",
    "Trajectory",
    "VelocityModel",
    "ZeroSource",
    "eval_velocity",
    "flow_map",
    "flow_positions",
    "freeze_velocity",
    "merge_close_atoms",
    "scheme_step",
    "simulate",
    "ConvergenceRow",
    "TheoremConstants",
    "continuous_dependence_check",
    "convergence_table",
    "property_suite",
    "splitting_order",
    "time_lipschitz_check",
    "__version__",
]
