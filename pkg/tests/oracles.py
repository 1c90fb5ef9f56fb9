"""Brute-force reference computations, independent of the package code paths."""

import numpy as np


def rotation_grid(n=3600):
    """All grid rotations and reflections of the plane, shape (2n, 2, 2)."""
    t = np.arange(n) * 2 * np.pi / n
    c, s = np.cos(t), np.sin(t)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    refl = rot @ np.diag([1.0, -1.0])
    return np.concatenate([rot, refl])


def grid_distance(x, y, n=3600):
    """Congruence distance in the plane by exhaustive search over O(2)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xc = x - x.mean(0)
    yc = y - y.mean(0)
    moved = np.einsum("rab,jb->rja", rotation_grid(n), yc)
    return float(np.sqrt(((xc[None] - moved) ** 2).sum(axis=(1, 2))).min())


def grid_epsset_probability(z, y, tol, n=20000):
    """Fraction of the O(2) angle grid satisfying the difference-vector conditions."""
    z = np.asarray(z, float)
    y = np.asarray(y, float)
    dz = z[:1] - z[1:]
    dy = y[:1] - y[1:]
    moved = np.einsum("rab,jb->rja", rotation_grid(n), dy)
    ok = np.all(np.linalg.norm(dz[None] - moved, axis=-1) < tol, axis=-1)
    return float(ok.mean())


def random_rigid_motion(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if rng.random() < 0.5:
        q[0] *= -1
    return q, rng.standard_normal(d)
