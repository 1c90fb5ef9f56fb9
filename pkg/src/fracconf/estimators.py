"""Monte Carlo estimators for configuration energies of sampled measures.

Every estimator splits its draws into fixed-size chunks, each driven by its
own substream ``rng.child(i)``.  Chunk results are merged in chunk order, so
an estimate depends only on the seed and the chunk size, never on how the
chunks were scheduled across worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.spatial import cKDTree

from .fractal import SampleSet
from .geometry import Configuration, config_dim, procrustes_distance, procrustes_distance_batch
from .haar import RngSeed, frobenius_volume, haar_batch

__all__ = [
    "Estimate",
    "EnergySweepReport",
    "default_c_m",
    "riesz_energy",
    "config_correlation",
    "energy_sweep",
    "fit_loglog_slope",
    "semifinal_estimate",
    "nu_rho_density_at",
    "nu_rho_moment",
    "nu_rho_moment_trend",
    "epsset_haar_measure",
]

CHUNK = 100_000
BOUNDARY_MARGIN = 1e-8


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    n_samples: int
    seed: RngSeed | None = None
    hits: int | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"estimate value must be finite, got {self.value}")
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be non-negative, got {self.std_error}")

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "hits": self.hits,
            "flags": list(self.flags),
            "seed": self.seed.as_dict() if self.seed is not None else None,
        }


@dataclass(frozen=True)
class EnergySweepReport:
    d: int
    k: int
    m: int
    epsilons: np.ndarray
    estimates: tuple[Estimate, ...]
    slope: float
    slope_stderr: float
    seed: RngSeed | None = None
    slope_note: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.ndim != 1 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("epsilons must be positive and strictly decreasing")
        if len(self.estimates) != len(eps):
            raise ValueError("one estimate per epsilon is required")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "estimates", tuple(self.estimates))

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])

    def to_csv(self) -> str:
        def num(x):
            return "NA" if not math.isfinite(x) else f"{x:.17g}"

        seed = self.seed.as_dict() if self.seed is not None else {"seed": None, "stream": None}
        lines = [
            f"# d={self.d} k={self.k} m={self.m}",
            f"# seed={seed['seed']} stream={seed['stream']}",
            f"# slope={num(self.slope)} slope_stderr={num(self.slope_stderr)}",
        ]
        if self.slope_note:
            lines.append(f"# slope_note={self.slope_note}")
        for key in sorted(self.meta):
            lines.append(f"# {key}={self.meta[key]}")
        lines.append("epsilon,value,std_error,n_pairs,hits")
        for eps, est in zip(self.epsilons, self.estimates):
            lines.append(f"{eps:.17g},{est.value:.17g},{est.std_error:.17g},{est.n_samples},{est.hits}")
        return "\n".join(lines) + "\n"


def _as_seed(rng) -> RngSeed:
    if isinstance(rng, RngSeed):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngSeed(int(rng))
    if isinstance(rng, np.random.Generator):
        return RngSeed(int(rng.integers(0, 2**63)))
    raise TypeError(f"cannot derive a seed from {type(rng).__name__}")


def _run_chunks(n, seed: RngSeed, fn, chunk=CHUNK, workers=1):
    """Call ``fn(generator, size)`` on consecutive chunks; results in chunk order."""
    sizes = [min(chunk, n - start) for start in range(0, n, chunk)]
    jobs = [(seed.child(i), size) for i, size in enumerate(sizes)]

    def run(job):
        s, size = job
        return fn(s.generator(), size)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def _merge_moments(parts):
    """Combine per-chunk ``(count, mean, centered sum of squares)`` triples."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return mean, m2


def _binomial(hits, n, scale):
    p = hits / n
    return scale * p, scale * math.sqrt(p * (1.0 - p) / n)


def default_c_m(norm_bound: float) -> float:
    """``2 + 2 M``: the alignment tolerance constant for configurations of norm at most ``M``."""
    return 2.0 + 2.0 * norm_bound


def riesz_energy(samples: SampleSet, s: float, n_pairs: int = 100_000, cutoff=None, rng=0,
                 workers: int = 1) -> Estimate:
    """Monte Carlo estimate of the Riesz ``s``-energy of the sample measure.

    Averages ``max(|X - Y|, cutoff) ** -s`` over independent index pairs
    drawn with replacement, excluding pairs that repeat an index.  The
    ``cutoff`` (default ``1e-6`` times the sample diameter) keeps the atomic
    empirical measure from producing infinite terms; divergence of the true
    energy shows up as growth when ``cutoff`` shrinks.
    """
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    if n_pairs < 1000:
        raise ValueError(f"n_pairs must be at least 1000, got {n_pairs}")
    if samples.n < 2:
        raise ValueError("need at least two sample points")
    if cutoff is None:
        cutoff = 1e-6 * (samples.diameter() or 1.0)
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    seed = _as_seed(rng)
    pts = samples.points
    n = samples.n

    def chunk(gen, size):
        i = gen.integers(0, n, size)
        j = (i + gen.integers(1, n, size)) % n
        r = np.linalg.norm(pts[i] - pts[j], axis=1)
        v = np.maximum(r, cutoff) ** (-s)
        mu = v.mean()
        return size, mu, ((v - mu) ** 2).sum()

    parts = _run_chunks(n_pairs, seed, chunk, workers=workers)
    mean, m2 = _merge_moments(parts)
    var = m2 / (n_pairs - 1)
    flags = ()
    if s >= samples.d:
        flags = (f"s={s} >= d={samples.d}: energy is infinite for every measure on R^d",)
    return Estimate(mean, math.sqrt(var / n_pairs), n_pairs, seed, flags=flags)


def config_correlation(samples: SampleSet, k: int, epsilon: float, n_pairs: int = 100_000, rng=0,
                       workers: int = 1) -> Estimate:
    """``eps ** -m`` times the probability that two random k-tuples are ``eps``-congruent.

    Both k-tuples are ``k`` independent draws from the samples and ``m`` is
    the dimension of the configuration space.  Ties within ``1e-8`` of
    ``epsilon`` are counted in a ``boundary`` flag.
    """
    d = samples.d
    if k < d + 1:
        raise ValueError(f"need k >= d + 1 = {d + 1}, got k={k}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if samples.n < 2 * k:
        raise ValueError(f"need at least {2 * k} sample points, got {samples.n}")
    m = config_dim(d, k)
    seed = _as_seed(rng)
    pts = samples.points
    n = samples.n

    def chunk(gen, size):
        y = pts[gen.integers(0, n, (size, k))]
        z = pts[gen.integers(0, n, (size, k))]
        dist = procrustes_distance_batch(y, z)
        return int(np.count_nonzero(dist < epsilon)), int(np.count_nonzero(np.abs(dist - epsilon) < BOUNDARY_MARGIN))

    parts = _run_chunks(n_pairs, seed, chunk, workers=workers)
    hits = sum(p[0] for p in parts)
    boundary = sum(p[1] for p in parts)
    value, se = _binomial(hits, n_pairs, epsilon ** (-m))
    flags = []
    if hits == 0:
        flags.append("zero_hits: increase n_pairs")
    if boundary:
        flags.append(f"boundary={boundary}")
    return Estimate(value, se, n_pairs, seed, hits=hits, flags=tuple(flags))


def fit_loglog_slope(epsilons, values):
    """Least-squares slope of ``log(value)`` against ``log(epsilon)``.

    Non-positive values are dropped.  Returns ``(slope, stderr, note)``; the
    slope is ``nan`` with a reason when fewer than three points remain.
    """
    eps = np.asarray(epsilons, dtype=float)
    vals = np.asarray(values, dtype=float)
    keep = vals > 0
    if keep.sum() < 3:
        return math.nan, math.nan, f"only {int(keep.sum())} usable points (need 3)"
    x, y = np.log(eps[keep]), np.log(vals[keep])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xc
    dof = len(x) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, stderr, ""


def energy_sweep(samples: SampleSet, k: int, epsilons, n_pairs: int = 100_000, rng=0,
                 workers: int = 1) -> EnergySweepReport:
    """:func:`config_correlation` across a decreasing grid with a fitted log-log slope.

    Bounded energy as ``epsilon -> 0`` shows as a slope near zero; blow-up as
    a clearly negative slope.
    """
    eps = np.asarray(epsilons, dtype=float)
    if eps.ndim != 1 or len(eps) == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("epsilons must be positive and strictly decreasing")
    seed = _as_seed(rng)
    estimates = [
        config_correlation(samples, k, float(e), n_pairs, seed.child(i), workers=workers)
        for i, e in enumerate(eps)
    ]
    slope, stderr, note = fit_loglog_slope(eps, [e.value for e in estimates])
    return EnergySweepReport(samples.d, k, config_dim(samples.d, k), eps, tuple(estimates),
                             slope, stderr, seed, note)


def semifinal_estimate(samples: SampleSet, k: int, epsilon: float, C_prime=None, n_rho: int = 1,
                       n_pairs: int = 100_000, rng=0, workers: int = 1) -> Estimate:
    """Rotation-averaged difference-vector matching probability, scaled by ``eps ** -(d (k-1))``.

    For each pair of random k-tuples ``Y, Z`` and each of ``n_rho`` Haar
    rotations ``rho``, tests ``|(z_1 - z_j) - rho (y_1 - y_j)| < C' eps`` for
    all ``j > 1``.  ``C'`` defaults to ``2 + 2 M`` with ``M`` the largest
    sample norm.
    """
    d = samples.d
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if C_prime is None:
        C_prime = default_c_m(samples.norm_bound())
    if not C_prime > 0:
        raise ValueError(f"C_prime must be positive, got {C_prime}")
    if n_rho < 1:
        raise ValueError("n_rho must be positive")
    seed = _as_seed(rng)
    pts = samples.points
    n = samples.n
    tol = C_prime * epsilon
    chunk_pairs = max(1, CHUNK // n_rho)

    def chunk(gen, size):
        y = pts[gen.integers(0, n, (size, k))]
        z = pts[gen.integers(0, n, (size, k))]
        dy = y[:, :1] - y[:, 1:]
        dz = z[:, :1] - z[:, 1:]
        rho = haar_batch(d, size * n_rho, gen).reshape(size, n_rho, d, d)
        moved = np.einsum("prab,pjb->prja", rho, dy)
        ok = np.all(np.linalg.norm(dz[:, None] - moved, axis=-1) < tol, axis=-1)
        per_pair = ok.mean(axis=1)
        return int(ok.sum()), per_pair.sum(), (per_pair * per_pair).sum()

    parts = _run_chunks(n_pairs, seed, chunk, chunk=chunk_pairs, workers=workers)
    hits = sum(p[0] for p in parts)
    s1 = sum(p[1] for p in parts)
    s2 = sum(p[2] for p in parts)
    scale = epsilon ** (-d * (k - 1))
    mean = s1 / n_pairs
    var = max(s2 / n_pairs - mean * mean, 0.0) * n_pairs / max(n_pairs - 1, 1)
    flags = ("zero_hits: increase n_pairs",) if hits == 0 else ()
    return Estimate(scale * mean, scale * math.sqrt(var / n_pairs), n_pairs, seed, hits=hits, flags=flags)


def _unit_ball_volume(d):
    return math.pi ** (d / 2) / special.gamma(d / 2 + 1)


def _pair_counts(z, y, rho, u, h):
    """Number of pairs ``(i, j)`` with ``|u - (z_i - rho y_j)| < h`` for each row of ``u``."""
    ry = y @ rho.T
    r = np.nextafter(h, 0.0)
    if len(z) * len(ry) <= 4_000_000:
        diffs = (z[:, None, :] - ry[None, :, :]).reshape(-1, z.shape[1])
        return np.asarray(cKDTree(diffs).query_ball_point(u, r, return_length=True))
    tree = cKDTree(z)
    return np.array([tree.query_ball_point(ui + ry, r, return_length=True).sum() for ui in u])


def _self_pair_counts(z, rho, u, h):
    """Pairs ``(i, i)`` counted by ``_pair_counts(z, z, ...)``."""
    own = z - z @ rho.T
    return np.asarray(cKDTree(own).query_ball_point(u, np.nextafter(h, 0.0), return_length=True))


def _disjoint_halves(n, m, gen):
    """Two disjoint random index sets of size ``m`` (``m <= n // 2``)."""
    perm = gen.permutation(n)
    return perm[:m], perm[m:2 * m]


def nu_rho_density_at(samples: SampleSet, rho, u, bandwidth: float, max_points=None, rng=None):
    """Box-kernel density of ``z - rho y`` with ``z, y`` independent draws from the samples.

    Counts ordered sample pairs ``(i, j)``, ``i != j``, whose difference
    ``z_i - rho z_j`` lies within ``bandwidth`` of ``u``, divided by the
    number of pairs and the volume of the ``bandwidth``-ball.  With
    ``max_points`` the two sides are disjoint random subsets of that size.

    Returns a float for a single point ``u`` of shape ``(d,)`` and an array
    for a stack of points.
    """
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    pts = samples.points
    rho = np.asarray(rho, dtype=float).reshape(samples.d, samples.d)
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    vol = _unit_ball_volume(samples.d) * bandwidth**samples.d
    if max_points is not None and 2 * max_points <= samples.n:
        gen = (rng if isinstance(rng, np.random.Generator)
               else _as_seed(0 if rng is None else rng).generator())
        iz, iy = _disjoint_halves(samples.n, max_points, gen)
        counts = _pair_counts(pts[iz], pts[iy], rho, u, bandwidth)
        dens = counts / (max_points * max_points * vol)
    else:
        if samples.n < 2:
            raise ValueError("need at least two sample points")
        counts = _pair_counts(pts, pts, rho, u, bandwidth) - _self_pair_counts(pts, rho, u, bandwidth)
        dens = counts / (samples.n * (samples.n - 1) * vol)
    return float(dens[0]) if single else dens


def nu_rho_moment(samples: SampleSet, k: int, n_rho: int, bandwidth: float, n_eval: int, rng=0,
                  kde_points: int = 500) -> Estimate:
    """Estimate of the rotation average of ``integral nu_rho(u) ** k du``.

    Uses ``integral f ** k = E_{u ~ f}[f(u) ** (k-1)]``: for each Haar
    rotation, ``u`` is drawn as ``z - rho y`` from fresh sample pairs and the
    box-kernel density, built on two disjoint sets of ``kde_points`` samples,
    is raised to the power ``k - 1``.
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    if n_rho < 1 or n_eval < 1:
        raise ValueError("n_rho and n_eval must be positive")
    if samples.n < 2:
        raise ValueError("need at least two sample points")
    seed = _as_seed(rng)
    pts = samples.points
    n = samples.n
    m = min(kde_points, n // 2)
    vol = _unit_ball_volume(samples.d) * bandwidth**samples.d
    per_rho = []
    for i in range(n_rho):
        gen = seed.child(i).generator()
        rho = haar_batch(samples.d, 1, gen)[0]
        iz, iy = _disjoint_halves(n, m, gen)
        a = gen.integers(0, n, n_eval)
        b = (a + gen.integers(1, n, n_eval)) % n
        u = pts[a] - pts[b] @ rho.T
        dens = _pair_counts(pts[iz], pts[iy], rho, u, bandwidth) / (m * m * vol)
        per_rho.append(dens ** (k - 1))
    vals = np.array(per_rho)
    means = vals.mean(axis=1)
    if n_rho > 1:
        se = means.std(ddof=1) / math.sqrt(n_rho)
    else:
        se = vals.std(ddof=1) / math.sqrt(n_eval) if n_eval > 1 else 0.0
    return Estimate(float(means.mean()), float(se), n_rho * n_eval, seed)


def nu_rho_moment_trend(samples: SampleSet, k: int, n_rho: int, bandwidths, n_eval: int, rng=0,
                        kde_points: int = 500) -> dict:
    """Moment estimates over a shrinking bandwidth sequence, with a shared seed.

    A finite moment gives ratios between successive estimates near 1;
    a singular difference measure gives ratios growing like ``2 ** (d (k-1))``
    per halving.
    """
    ests = [nu_rho_moment(samples, k, n_rho, h, n_eval, rng, kde_points) for h in bandwidths]
    vals = [e.value for e in ests]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(vals, vals[1:])]
    return {"bandwidths": [float(h) for h in bandwidths], "estimates": ests, "ratios": ratios}


def epsset_haar_measure(z, y, epsilon: float, C_M=None, n_rho: int = 10_000, rng=0, M=None,
                        normalization: str = "probability") -> Estimate:
    """Haar measure of the rotations aligning the difference vectors of ``y`` with ``z``.

    Estimates the measure of ``{rho : |(z_1 - z_j) - rho (y_1 - y_j)| < C_M eps, 1 < j <= k}``
    by sampling ``n_rho`` Haar rotations.  Requires the configurations to be
    ``epsilon``-close in the congruence metric.  ``C_M`` defaults to
    ``2 + 2 M`` where ``M`` defaults to ``||y||``.

    ``normalization="probability"`` gives O(d) total mass 1;
    ``"frobenius"`` scales by the Riemannian volume of O(d) under the
    Frobenius metric (``4 sqrt(2) pi`` for d = 2).
    """
    z = z if isinstance(z, Configuration) else Configuration(z)
    y = y if isinstance(y, Configuration) else Configuration(y)
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    dist = procrustes_distance(z, y)
    if not dist < epsilon:
        raise ValueError(f"configurations are at distance {dist:.6g}, not below epsilon={epsilon}")
    if normalization == "probability":
        total = 1.0
    elif normalization == "frobenius":
        total = frobenius_volume(z.d)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if M is None:
        M = y.norm()
    if C_M is None:
        C_M = default_c_m(M)
    seed = _as_seed(rng)
    dz = z.points[:1] - z.points[1:]
    dy = y.points[:1] - y.points[1:]
    tol = C_M * epsilon

    def chunk(gen, size):
        rho = haar_batch(z.d, size, gen)
        moved = np.einsum("rab,jb->rja", rho, dy)
        ok = np.all(np.linalg.norm(dz[None] - moved, axis=-1) < tol, axis=-1)
        return int(ok.sum())

    hits = sum(_run_chunks(n_rho, seed, chunk))
    value, se = _binomial(hits, n_rho, total)
    return Estimate(value, se, n_rho, seed, hits=hits)
