"""Self-similar measures with a prescribed similarity dimension.

A :class:`SimilarityIFS` is a finite family of contracting similarities
``p -> ratio * Q @ p + t`` with selection weights.  Its attractor carries the
self-similar measure, sampled here by the chaos game.  Under the open set
condition the similarity dimension (the root of the Moran equation) equals
the Hausdorff dimension of the attractor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import OrthogonalMatrix
from .haar import RngSeed, as_generator

__all__ = [
    "InfeasibleSpecError",
    "Similarity",
    "SimilarityIFS",
    "SampleSet",
    "similarity_dimension",
    "make_cantor_like",
    "chaos_game_sample",
    "deterministic_cells",
    "box_counting_dimension",
    "uniform_box_samples",
    "segment_samples",
    "write_samples",
    "read_samples",
]

MAX_CELLS = 1 << 20


class InfeasibleSpecError(ValueError):
    """Raised when a fractal specification cannot be realised without overlap."""

    def __init__(self, message, feasible_range):
        super().__init__(f"{message}; feasible target_dim range is ({feasible_range[0]}, {feasible_range[1]}]")
        self.feasible_range = feasible_range


@dataclass(frozen=True, eq=False)
class Similarity:
    ratio: float
    orthogonal: OrthogonalMatrix
    translation: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"contraction ratio must lie in (0, 1), got {self.ratio}")
        if not isinstance(self.orthogonal, OrthogonalMatrix):
            object.__setattr__(self, "orthogonal", OrthogonalMatrix(self.orthogonal))
        t = np.array(self.translation, dtype=float).reshape(-1)
        if t.shape[0] != self.orthogonal.d:
            raise ValueError("translation length must match the orthogonal part")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @property
    def d(self) -> int:
        return self.orthogonal.d

    @property
    def linear(self) -> np.ndarray:
        return self.ratio * self.orthogonal.entries

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.linear.T + self.translation


@dataclass(frozen=True, eq=False)
class SimilarityIFS:
    maps: tuple[Similarity, ...]
    weights: np.ndarray = None

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) < 2:
            raise ValueError(f"an IFS needs at least 2 maps, got {len(maps)}")
        if len({m.d for m in maps}) != 1:
            raise ValueError("all maps must act on the same dimension")
        if self.weights is None:
            w = np.full(len(maps), 1.0 / len(maps))
        else:
            w = np.array(self.weights, dtype=float)
        if w.shape != (len(maps),) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector, one entry per map")
        w.setflags(write=False)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.maps[0].d

    @property
    def ratios(self) -> np.ndarray:
        return np.array([m.ratio for m in self.maps])

    @cached_property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box containing the attractor.

        Starts from a ball that every map sends into itself and shrinks by
        replacing the box with the bounding box of its images.  Every iterate
        contains the attractor.
        """
        lin = np.stack([m.linear for m in self.maps])
        t = np.stack([m.translation for m in self.maps])
        fixed = np.linalg.solve(np.eye(self.d) - lin, t[:, :, None])[:, :, 0]
        c = fixed.mean(axis=0)
        moved = np.linalg.norm(lin @ c + t - c, axis=1)
        radius = float(np.max(moved / (1.0 - self.ratios)))
        lo, hi = c - radius, c + radius
        corner_sel = np.array(list(itertools.product((0, 1), repeat=self.d)), dtype=bool)
        for _ in range(10_000):
            corners = np.where(corner_sel, hi, lo)
            images = np.einsum("mab,cb->mca", lin, corners) + t[:, None, :]
            new_lo = images.min(axis=(0, 1))
            new_hi = images.max(axis=(0, 1))
            new_lo, new_hi = np.maximum(new_lo, lo), np.minimum(new_hi, hi)
            if np.allclose(new_lo, lo, rtol=0, atol=1e-15) and np.allclose(new_hi, hi, rtol=0, atol=1e-15):
                break
            lo, hi = new_lo, new_hi
        return lo, hi

    @property
    def diameter(self) -> float:
        lo, hi = self.bounding_box
        return float(np.linalg.norm(hi - lo))

    def describe(self) -> dict:
        return {
            "d": self.d,
            "n_maps": len(self.maps),
            "ratios": [float(r) for r in self.ratios],
            "translations": [[float(c) for c in m.translation] for m in self.maps],
            "orthogonal": [m.orthogonal.entries.tolist() for m in self.maps],
            "weights": [float(w) for w in self.weights],
        }


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Points drawn from a probability measure on ``R^d``, plus provenance."""

    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"samples must form an (n, d) array, got shape {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def norm_bound(self) -> float:
        return float(np.linalg.norm(self.points, axis=1).max())

    def diameter(self) -> float:
        return float(np.linalg.norm(self.points.max(axis=0) - self.points.min(axis=0)))


def similarity_dimension(ifs: SimilarityIFS, tol: float = 1e-12) -> float:
    """Root ``s`` of ``sum(ratio_i ** s) == 1``."""
    r = ifs.ratios
    if np.all(r == r[0]):
        return float(np.log(len(r)) / np.log(1.0 / r[0]))

    def excess(s):
        return float(np.sum(r**s)) - 1.0

    lo, hi = 0.0, 1.0
    while excess(hi) > 0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_cantor_like(d: int, target_dim: float, n_per_axis: int) -> SimilarityIFS:
    """Product Cantor set in ``[0, 1]^d`` of similarity dimension ``target_dim``.

    Each axis carries ``n_per_axis`` equally spaced copies scaled by
    ``r = n_per_axis ** (-d / target_dim)``; the full IFS is their product.
    """
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if n_per_axis < 2:
        raise ValueError(f"n_per_axis must be at least 2, got {n_per_axis}")
    if not target_dim > 0:
        raise InfeasibleSpecError(f"target_dim must be positive, got {target_dim}", (0, d))
    r = float(n_per_axis) ** (-d / target_dim)
    if r * n_per_axis > 1.0 + 1e-12:
        raise InfeasibleSpecError(
            f"target_dim {target_dim} needs ratio {r:.6g} with {n_per_axis} pieces per axis, "
            "which overlap",
            (0, d),
        )
    r = min(r, 1.0 / n_per_axis)
    offsets = np.arange(n_per_axis) * (1.0 - r) / (n_per_axis - 1)
    ident = OrthogonalMatrix.identity(d)
    maps = tuple(
        Similarity(r, ident, np.array(t)) for t in itertools.product(offsets, repeat=d)
    )
    return SimilarityIFS(maps)


def chaos_game_sample(ifs: SimilarityIFS, n: int, burn_in: int = 64, rng=0) -> SampleSet:
    """Random-iteration samples from the self-similar measure of ``ifs``.

    Starts at a uniform point of the attractor's bounding box, applies maps
    chosen independently by weight, drops ``burn_in`` iterates and keeps the
    next ``n``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if burn_in < 32:
        raise ValueError(f"burn_in must be at least 32, got {burn_in}")
    seed = rng if isinstance(rng, RngSeed) else None
    gen = as_generator(rng)
    lo, hi = ifs.bounding_box
    x = lo + (hi - lo) * gen.random(ifs.d)
    choice = gen.choice(len(ifs.maps), size=burn_in + n, p=ifs.weights)

    lin = [m.linear for m in ifs.maps]
    trans = [m.translation for m in ifs.maps]
    diagonal = all(np.array_equal(a, np.diag(np.diag(a))) for a in lin)
    out = np.empty((n, ifs.d))
    if diagonal:
        # axis-aligned maps: iterate on scalars, much faster than matmul
        scale = [np.diag(a).copy() for a in lin]
        for t, i in enumerate(choice):
            x = scale[i] * x + trans[i]
            if t >= burn_in:
                out[t - burn_in] = x
    else:
        for t, i in enumerate(choice):
            x = lin[i] @ x + trans[i]
            if t >= burn_in:
                out[t - burn_in] = x
    meta = {
        "ifs": ifs.describe(),
        "similarity_dimension": similarity_dimension(ifs),
        "seed": seed.as_dict() if seed is not None else None,
        "burn_in": burn_in,
        "n": n,
    }
    return SampleSet(out, meta)


def deterministic_cells(ifs: SimilarityIFS, depth: int, max_cells: int = MAX_CELLS):
    """Images of the bounding box under all ``depth``-fold compositions.

    Returns
    -------
    centers : ndarray, shape (N**depth, d)
    radii : ndarray, shape (N**depth,)
        Circumradius of each image box (product of ratios times the box's
        half-diagonal).
    weights : ndarray, shape (N**depth,)
        Product of map weights, i.e. the self-similar mass of each cell.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    count = len(ifs.maps) ** depth
    if count > max_cells:
        raise ValueError(f"{count} cells at depth {depth} exceeds the cap of {max_cells}")
    lo, hi = ifs.bounding_box
    centers = ((lo + hi) / 2)[None, :]
    radii = np.array([np.linalg.norm(hi - lo) / 2])
    weights = np.ones(1)
    lin = np.stack([m.linear for m in ifs.maps])
    trans = np.stack([m.translation for m in ifs.maps])
    for _ in range(depth):
        # apply every map to every existing cell (prefix composition)
        centers = (np.einsum("mab,cb->mca", lin, centers) + trans[:, None, :]).reshape(-1, ifs.d)
        radii = (ifs.ratios[:, None] * radii[None, :]).reshape(-1)
        weights = (ifs.weights[:, None] * weights[None, :]).reshape(-1)
    return centers, radii, weights


def box_counting_dimension(points, sizes) -> float:
    """Least-squares slope of ``log N(size)`` against ``log(1/size)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    sizes = np.asarray(sizes, dtype=float)
    origin = pts.min(axis=0)
    counts = []
    for s in sizes:
        idx = np.floor((pts - origin) / s).astype(np.int64)
        counts.append(len(np.unique(idx, axis=0)))
    slope, _ = np.polyfit(np.log(1.0 / sizes), np.log(counts), 1)
    return float(slope)


def uniform_box_samples(d: int, n: int, rng=0) -> SampleSet:
    """Uniform samples from ``[0, 1]^d``."""
    seed = rng if isinstance(rng, RngSeed) else None
    pts = as_generator(rng).random((n, d))
    return SampleSet(pts, {"kind": "uniform_box", "d": d, "n": n, "similarity_dimension": float(d),
                           "seed": seed.as_dict() if seed is not None else None})


def segment_samples(d: int, n: int, rng=0) -> SampleSet:
    """Uniform samples on the unit segment along the first axis of ``R^d``."""
    seed = rng if isinstance(rng, RngSeed) else None
    pts = np.zeros((n, d))
    pts[:, 0] = as_generator(rng).random(n)
    return SampleSet(pts, {"kind": "segment", "d": d, "n": n, "similarity_dimension": 1.0,
                           "seed": seed.as_dict() if seed is not None else None})


def write_samples(path, samples: SampleSet, seed: int | None = None):
    """Write the plain-text sample format: a ``# d= n= seed=`` header, then points."""
    if seed is None:
        s = samples.meta.get("seed")
        seed = s["seed"] if isinstance(s, dict) else s
    lines = [f"# d={samples.d} n={samples.n} seed={seed}\n"]
    dim = samples.meta.get("similarity_dimension")
    if dim is not None:
        lines.append(f"# similarity_dimension={float(dim):.17g}\n")
    for p in samples.points:
        lines.append(" ".join(f"{c:.17g}" for c in p) + "\n")
    Path(path).write_text("".join(lines))


def read_samples(path) -> SampleSet:
    """Read a file written by :func:`write_samples`."""
    meta = {}
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            for tok in s[1:].split():
                key, sep, val = tok.partition("=")
                if sep:
                    meta[key] = val
            continue
        try:
            rows.append([float(t) for t in s.split()])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse coordinates {s!r}") from None
    if not rows:
        raise ValueError(f"{path}: no sample points")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: inconsistent point dimensions")
    pts = np.array(rows)
    if "d" in meta and int(meta["d"]) != pts.shape[1]:
        raise ValueError(f"{path}: header says d={meta['d']} but points have {pts.shape[1]} coordinates")
    if "n" in meta and int(meta["n"]) != pts.shape[0]:
        raise ValueError(f"{path}: header says n={meta['n']} but file has {pts.shape[0]} points")
    parsed = {"d": pts.shape[1], "n": pts.shape[0], "path": str(path)}
    if meta.get("seed") not in (None, "None"):
        parsed["seed"] = int(meta["seed"])
    if "similarity_dimension" in meta:
        parsed["similarity_dimension"] = float(meta["similarity_dimension"])
    return SampleSet(pts, parsed)
