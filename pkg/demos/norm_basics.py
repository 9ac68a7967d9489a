"""
Norm of a signed atomic measure, by hand and by solver
======================================================

Two unit atoms with opposite signs can either be cancelled, at price
a each, or matched and moved, at price b per unit distance. Whichever
is cheaper wins, so the norm of delta_x - delta_y is min(2a, b|x-y|).
This script walks through that formula and a few consequences.
"""

import numpy as np

from signedot import NormParams, SignedMeasure, dirac, jordan, mass, signed_distance, signed_norm

p11 = NormParams(1.0, 1.0)

# Close atoms: moving one across 0.3 costs 0.3, cancelling both costs 2.
mu = dirac([0.0]) - dirac([0.3])
print("close pair   ", signed_norm(mu, p11), "  (expected 0.3)")

# Far atoms: moving would cost 7, cancellation wins at 2.
mu = dirac([0.0]) - dirac([7.0])
print("far pair     ", signed_norm(mu, p11), "  (expected 2.0)")

# The price knobs shift the crossover. With a = 0.05 cancellation is
# almost free and even the close pair prefers it.
cheap = NormParams(0.05, 1.0)
mu = dirac([0.0]) - dirac([0.3])
print("cheap cancel ", signed_norm(mu, cheap), "  (expected 0.1)")

# Adding the same measure to both sides never changes the distance.
rng = np.random.default_rng(3)
nu = SignedMeasure(rng.uniform(-2, 2, size=(6, 1)), rng.uniform(-1, 1, size=6), 1)
eta = SignedMeasure(rng.uniform(-2, 2, size=(4, 1)), rng.uniform(-1, 1, size=4), 1)
d_plain = signed_distance(mu, nu, p11)
d_shift = signed_distance(mu + eta, nu + eta, p11)
print("cancellation ", d_plain, "vs", d_shift)

# The norm always dominates a times the net mass imbalance: whatever
# transport does, the surplus sign has to be cancelled eventually.
parts = jordan(nu)
imbalance = abs(mass(parts.plus) - mass(parts.minus))
print("mass gap     ", signed_norm(nu, p11), ">=", imbalance)
