"""Haar-distributed orthogonal matrices and reproducible random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .geometry import OrthogonalMatrix

__all__ = [
    "RngSeed",
    "SamplingError",
    "as_generator",
    "haar_batch",
    "sample_orthogonal",
    "sample_near",
    "frobenius_volume",
    "haar_check",
]

_MASK64 = (1 << 64) - 1


class SamplingError(RuntimeError):
    def __init__(self, message, attempts):
        super().__init__(f"{message} after {attempts} attempts")
        self.attempts = attempts


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream) pair naming a reproducible random stream.

    Generators are Philox (counter based) keyed through ``SeedSequence``, so a
    given seed, stream and child path always yields the same draws.  ``child``
    derives independent substreams for chunked or parallel work.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream, *self.path):
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"seed components must be 64-bit unsigned, got {v}")

    def child(self, i: int) -> RngSeed:
        return RngSeed(self.seed, self.stream, (*self.path, int(i)))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.path))
        return np.random.Generator(np.random.Philox(ss))

    def as_dict(self) -> dict:
        return {"seed": self.seed, "stream": self.stream, "path": list(self.path)}


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngSeed(int(rng)).generator()
    raise TypeError(f"cannot make a generator from {type(rng).__name__}")


def haar_batch(d: int, n: int, rng) -> np.ndarray:
    """``n`` independent Haar-distributed elements of O(d), shape ``(n, d, d)``."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    rng = as_generator(rng)
    g = rng.standard_normal((n, d, d))
    flips = rng.random(n) < 0.5
    q, r = np.linalg.qr(g)
    # positive diagonal of R makes Q Haar; signs of a zero pivot have measure zero
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    q = q * signs[:, None, :]
    q[flips, 0, :] *= -1.0
    return q


def sample_orthogonal(d: int, rng) -> OrthogonalMatrix:
    return OrthogonalMatrix(haar_batch(d, 1, rng)[0])


def _polar(a):
    u, _, vt = np.linalg.svd(a)
    return u @ vt


def sample_near(rho0, delta: float, rng, max_attempts: int = 1000) -> OrthogonalMatrix:
    """Random orthogonal matrix within Frobenius distance ``delta`` of ``rho0``.

    Proposals are Gaussian perturbations of ``rho0`` projected back onto O(d);
    proposals outside the ball or in the other component are rejected.
    """
    q0 = np.asarray(rho0, dtype=float)
    if not 0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 0.5], got {delta}")
    d = q0.shape[0]
    rng = as_generator(rng)
    det0 = np.sign(np.linalg.det(q0))
    scale = delta / np.sqrt(2.0 * d * d)
    for _ in range(max_attempts):
        q = _polar(q0 + scale * rng.standard_normal((d, d)))
        if np.sign(np.linalg.det(q)) == det0 and np.linalg.norm(q - q0) <= delta:
            return OrthogonalMatrix(q)
    raise SamplingError(f"no sample within Frobenius distance {delta}", max_attempts)


def frobenius_volume(d: int) -> float:
    """Total volume of O(d) under the Riemannian metric ``<A, B> = tr(A^T B)``.

    For d = 2 this is ``4 * sqrt(2) * pi``: two circles of Frobenius length
    ``2 * sqrt(2) * pi``.
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    # product of unit-sphere areas is the volume for the metric -tr(XY)/2;
    # Frobenius doubles the squared lengths
    vol = 1.0
    for j in range(2, d + 1):
        vol *= 2.0 * np.pi ** (j / 2) / special.gamma(j / 2)
    return 2.0 * vol * 2.0 ** (d * (d - 1) / 4)


def _zscore(diff, se):
    diff, se = np.broadcast_arrays(np.asarray(diff, float), np.asarray(se, float))
    # O(1) has a degenerate second moment: zero spread, zero deviation
    return np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(np.abs(diff) < 1e-12, 0.0, np.inf))


def haar_check(d: int, n: int, rng, fixed=None) -> dict:
    """Statistics checking that ``haar_batch`` looks Haar on O(d).

    Reports the worst orthogonality residual, determinant-component
    frequencies, z-scores of the first-column moments (mean 0, second moment
    ``1/d``) and a two-sample Kolmogorov-Smirnov statistic comparing the
    (1,1) entry of ``Q @ rho`` with that of an independent batch of ``rho``.
    """
    seed = rng if isinstance(rng, RngSeed) else None
    gen = as_generator(rng)
    qs = haar_batch(d, n, gen)
    if fixed is None:
        fixed = haar_batch(d, 1, gen)[0]
    fixed = np.asarray(fixed, dtype=float)
    others = haar_batch(d, n, gen)

    resid = np.abs(np.einsum("nji,njk->nik", qs, qs) - np.eye(d)).max()
    dets = np.linalg.det(qs)
    frac_pos = float(np.mean(dets > 0))

    col = qs[:, :, 0]
    z_mean = _zscore(col.mean(axis=0), col.std(axis=0, ddof=1) / np.sqrt(n))
    sq = col[:, 0] ** 2
    z_second = _zscore(sq.mean() - 1.0 / d, sq.std(ddof=1) / np.sqrt(n))

    ks = stats.ks_2samp((fixed @ qs)[:, 0, 0], others[:, 0, 0])
    # asymptotic two-sample critical value at the 1% level
    ks_crit = 1.628 * np.sqrt(2.0 / n)

    return {
        "d": d,
        "n": n,
        "seed": seed.as_dict() if seed is not None else None,
        "orthogonality_residual": float(resid),
        "det_deviation_max": float(np.abs(np.abs(dets) - 1).max()),
        "frac_det_plus": frac_pos,
        "frac_det_minus": 1.0 - frac_pos,
        "first_column_mean_z": [float(z) for z in z_mean],
        "first_column_second_moment_z": float(z_second),
        "ks_statistic": float(ks.statistic),
        "ks_critical_1pct": float(ks_crit),
    }
