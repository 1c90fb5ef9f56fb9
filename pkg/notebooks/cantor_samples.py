"""
Sampling self-similar sets
==========================

A product Cantor set in R^d keeps N evenly spaced sub-cubes per axis, each
scaled by r.  Its dimension solves N^d r^s = 1.  Picking r sets the
dimension to any target between 0 and d.
"""

import numpy as np

from fracconf import (
    RngSeed,
    box_counting_dimension,
    chaos_game_sample,
    make_cantor_like,
    similarity_dimension,
)

# The middle-thirds Cantor set: two pieces of ratio 1/3 in one dimension.
cantor = make_cantor_like(1, np.log(2) / np.log(3), 2)
print("middle thirds:", cantor.ratios, similarity_dimension(cantor))

# A planar set of dimension 1.9 from a 3 x 3 grid of pieces.
ifs = make_cantor_like(2, 1.9, 3)
info = ifs.describe()
print(f"{info['n_maps']} maps of ratio {info['ratios'][0]:.6f}, dimension {similarity_dimension(ifs):.6f}")

# The chaos game applies a random map at every step.  After a burn-in, the
# iterates are distributed by the natural self-similar measure.
samples = chaos_game_sample(ifs, 100_000, 64, RngSeed(42))
print("bounding box:", ifs.bounding_box)
print("sample diameter:", samples.diameter())

# Box counting over dyadic scales recovers the dimension roughly.  The
# finite sample undercounts the smallest boxes, so the estimate is only a
# sanity check.
sizes = 2.0 ** -np.arange(3, 9)
print("box-counting estimate:", box_counting_dimension(samples.points, sizes))

# Asking for more than the ambient dimension is refused with the feasible
# range.
try:
    make_cantor_like(2, 2.5, 3)
except ValueError as err:
    print("refused:", err)
