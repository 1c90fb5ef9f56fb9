"""
Uniformly random orthogonal matrices
====================================

Haar measure on O(d) is the distribution of a "uniformly random" rotation
or reflection.  It is sampled from the QR factorisation of a Gaussian
matrix.  Every draw comes from a named, reproducible random stream.
"""

import numpy as np

from fracconf import RngSeed, haar_batch, haar_check, sample_near

# Streams are addressed by (seed, stream, path).  Children give independent
# substreams, so parallel chunks of work stay reproducible.
root = RngSeed(2024)
q = haar_batch(3, 5, root.child(0))
print("det of five draws:", np.round(np.linalg.det(q), 12))

# The same address always reproduces the same matrices.
print("reproducible:", np.array_equal(q, haar_batch(3, 5, RngSeed(2024).child(0))))

# In the plane the first column is a uniform point on the circle, so its
# first coordinate squared averages 1/2.
col = haar_batch(2, 100_000, root.child(1))[:, :, 0]
print("E[q11^2] =", (col[:, 0] ** 2).mean())

# The built-in report runs the same battery used by the tests:
# orthogonality, the balance of the two components, first-column moments
# and a Kolmogorov-Smirnov check of invariance under a fixed rotation.
report = haar_check(3, 10_000, root.child(2))
for key in ("orthogonality_residual", "frac_det_plus", "ks_statistic", "ks_critical_1pct"):
    print(f"{key:>24}: {report[key]:.4g}")

# Local perturbations stay in the same component and within the requested
# Frobenius radius.
rho0 = haar_batch(3, 1, root.child(3))[0]
near = sample_near(rho0, 0.05, root.child(4))
print("Frobenius distance:", np.linalg.norm(near.entries - rho0))
