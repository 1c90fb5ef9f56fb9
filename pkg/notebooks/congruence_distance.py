"""
Distances between point configurations
======================================

Two k-point configurations are the same shape when a rotation, reflection
and translation carries one onto the other.  The distance between shapes is
the smallest Euclidean distance over all such motions.
"""

import numpy as np

from fracconf import Configuration, optimal_alignment, procrustes_distance

# A unit segment and a segment of length two.  Centred, they are
# (+-1/2, 0) and (+-1, 0), so the best alignment leaves 2 * (1/2)^2 of
# squared error.
x = Configuration([[0.0, 0.0], [1.0, 0.0]])
y = Configuration([[0.0, 0.0], [2.0, 0.0]])
print("segment distance:", procrustes_distance(x, y))

# Moving one configuration rigidly does not change anything.
theta = 0.7
rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
triangle = np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]])
moved = triangle @ rot.T + [5.0, -1.0]
print("rigid image:", procrustes_distance(triangle, moved))

# Mirror images are congruent too: reflections are part of the group.
mirrored = triangle * [-1.0, 1.0]
print("mirror image:", procrustes_distance(triangle, mirrored))

# The minimising motion is returned alongside the distance.  Applying it to
# the second configuration lands it on the first.
motion, dist = optimal_alignment(triangle, moved)
print("recovered rotation:\n", np.round(motion.rotation.entries, 6))
print("residual after alignment:", np.abs(motion.apply(moved) - triangle).max())

# A brute-force check: scan 3600 rotation angles and both reflection
# classes, centring both configurations first.
gen = np.random.default_rng(0)
a, b = gen.standard_normal((2, 5, 2))
t = np.arange(3600) * 2 * np.pi / 3600
best = np.inf
for flip in (1.0, -1.0):
    for c, s in zip(np.cos(t), np.sin(t)):
        r = np.array([[c, -s], [s, c]]) @ np.diag([1.0, flip])
        ac, bc = a - a.mean(0), b - b.mean(0)
        best = min(best, np.linalg.norm(ac - bc @ r.T))
print(f"closed form {procrustes_distance(a, b):.8f}   grid minimum {best:.8f}")
