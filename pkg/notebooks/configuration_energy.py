"""
How often do random configurations nearly coincide?
===================================================

Draw two k-tuples from a measure and ask how often they are eps-close up
to rigid motion.  Divide that probability by eps^m, where m is the
dimension of the space of shapes.  For a measure of large enough dimension
this ratio stays bounded as eps shrinks.  A measure on a line gives it a
blow-up instead, since all collinear shapes form a thin set.

A reduced version of the contrast experiment is below.  The acceptance
suite runs the full-size one.
"""

import numpy as np

from fracconf import (
    RngSeed,
    chaos_game_sample,
    config_correlation,
    energy_sweep,
    epsset_haar_measure,
    make_cantor_like,
    segment_samples,
    semifinal_estimate,
    threshold,
)

d, k = 2, 3
print("dimension threshold for triangles in the plane:", threshold(d, k))

set_a = chaos_game_sample(make_cantor_like(d, 1.9, 3), 50_000, 64, RngSeed(1))
set_b = segment_samples(d, 50_000, RngSeed(2))
eps = 2.0 ** -np.arange(3, 6)

for name, s in (("dimension 1.9", set_a), ("segment", set_b)):
    rep = energy_sweep(s, k, eps, 200_000, RngSeed(3))
    print(f"{name:>14}: values {np.round(rep.values, 2)}  log-log slope {rep.slope:+.2f}")

# The same sweep as a CSV report, which is what the command-line runner
# writes to disk.
print(energy_sweep(set_a, k, eps, 20_000, RngSeed(3)).to_csv())

# Chain check: the correlation is bounded by a fixed multiple of an
# estimator that tests rotations one at a time.
for i, e in enumerate(eps):
    f = config_correlation(set_a, k, e, 200_000, RngSeed(4).child(i))
    s = semifinal_estimate(set_a, k, e, None, 1, 200_000, RngSeed(5).child(i))
    print(f"eps={e:.4f}  ratio {f.value / s.value:.4f}")

# For two nearby triangles, the rotations that align their edge vectors to
# within C_M * eps form a set of positive Haar measure.
y = np.array([[0.0, 0.0], [0.5, 0.1], [0.2, 0.6]])
z = y + 0.01
est = epsset_haar_measure(z, y, 0.05, None, 20_000, RngSeed(6))
print(f"aligning set: {est.value:.4f} +- {est.std_error:.4f} of O(2)")
