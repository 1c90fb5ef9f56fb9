"""k-point configurations in R^d and the metric on their congruence classes.

Two configurations are identified when a rigid motion (rotation, reflection
and translation) carries one onto the other.  The distance between classes
is the minimum Euclidean distance over all such motions, computed here by
centroid matching followed by an orthogonal Procrustes solve.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "Centering",
    "Configuration",
    "CenteredConfiguration",
    "OrthogonalMatrix",
    "RigidMotion",
    "center",
    "procrustes_distance",
    "procrustes_distance_batch",
    "optimal_alignment",
    "config_dim",
    "threshold",
    "configuration_rank",
    "affine_reduce",
    "parse_configurations",
    "read_configurations",
    "format_configuration",
]

ORTHO_TOL = 1e-12
DET_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Centering(enum.Enum):
    FIRST_POINT = "first_point"
    CENTROID = "centroid"


@dataclass(frozen=True, eq=False)
class Configuration:
    """An ordered tuple of ``k`` points in ``R^d``, stored as a ``(k, d)`` array."""

    points: np.ndarray
    k: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a (k, d) array, got shape {pts.shape}")
        if pts.shape[0] < 2 or pts.shape[1] < 1:
            raise ValueError(f"need k >= 2 points with d >= 1 coordinates, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("configuration coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "k", pts.shape[0])
        object.__setattr__(self, "d", pts.shape[1])

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )

    def __hash__(self):
        return hash((self.points.shape, self.points.tobytes()))

    def norm(self) -> float:
        """Euclidean norm on the direct sum of ``k`` copies of ``R^d``."""
        return float(np.linalg.norm(self.points))

    def transformed(self, motion: RigidMotion) -> Configuration:
        return Configuration(motion.apply(self.points))


@dataclass(frozen=True, eq=False)
class CenteredConfiguration:
    """Translation-free representative of a configuration.

    With ``FIRST_POINT`` the rows are ``x_j - x_1`` for ``j = 2..k``; with
    ``CENTROID`` they are all ``k`` points minus their mean.
    """

    diffs: np.ndarray
    convention: Centering

    def __post_init__(self):
        object.__setattr__(self, "diffs", _frozen(self.diffs))
        if self.convention is Centering.CENTROID:
            scale = max(1.0, float(np.abs(self.diffs).max(initial=0.0)))
            if np.abs(self.diffs.sum(axis=0)).max(initial=0.0) > 1e-12 * scale * len(self.diffs):
                raise ValueError("centroid-centered vectors must sum to zero")


@dataclass(frozen=True, eq=False)
class OrthogonalMatrix:
    """An element of O(d)."""

    entries: np.ndarray

    def __post_init__(self):
        q = _frozen(self.entries)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError(f"orthogonal matrix must be square, got shape {q.shape}")
        resid = np.abs(q.T @ q - np.eye(q.shape[0])).max()
        if not resid < ORTHO_TOL:
            raise ValueError(f"matrix is not orthogonal (residual {resid:.3g})")
        det = np.linalg.det(q)
        if abs(abs(det) - 1.0) > DET_TOL:
            raise ValueError(f"orthogonal matrix determinant {det} is not +-1")
        object.__setattr__(self, "entries", q)

    @classmethod
    def identity(cls, d: int) -> OrthogonalMatrix:
        return cls(np.eye(d))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def det(self) -> int:
        return 1 if np.linalg.det(self.entries) > 0 else -1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class RigidMotion:
    """``p -> rotation @ p + translation``."""

    rotation: OrthogonalMatrix
    translation: np.ndarray

    def __post_init__(self):
        t = _frozen(self.translation).reshape(-1)
        if t.shape[0] != self.rotation.d:
            raise ValueError("translation length must match rotation dimension")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, d: int) -> RigidMotion:
        return cls(OrthogonalMatrix.identity(d), np.zeros(d))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.entries.T + self.translation

    def compose(self, other: RigidMotion) -> RigidMotion:
        """``self o other``."""
        q = self.rotation.entries
        return RigidMotion(
            OrthogonalMatrix(q @ other.rotation.entries),
            q @ other.translation + self.translation,
        )


def _as_config(x) -> Configuration:
    return x if isinstance(x, Configuration) else Configuration(x)


def _check_compatible(x: Configuration, y: Configuration):
    if (x.k, x.d) != (y.k, y.d):
        raise ValueError(
            f"configurations differ in shape: (k={x.k}, d={x.d}) vs (k={y.k}, d={y.d})"
        )


def center(x, convention: Centering = Centering.FIRST_POINT) -> CenteredConfiguration:
    x = _as_config(x)
    if convention is Centering.FIRST_POINT:
        diffs = x.points[1:] - x.points[0]
    else:
        diffs = x.points - x.points.mean(axis=0)
    return CenteredConfiguration(diffs, convention)


def _nuclear_norm(m: np.ndarray) -> np.ndarray:
    """Sum of singular values of a stack of square matrices."""
    d = m.shape[-1]
    if d == 1:
        return np.abs(m[..., 0, 0])
    if d == 2:
        # (s1 + s2)^2 = |M|_F^2 + 2 |det M|
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        return np.sqrt((m * m).sum(axis=(-2, -1)) + 2.0 * np.abs(det))
    return np.linalg.svd(m, compute_uv=False).sum(axis=-1)


def _best_orthogonal(h: np.ndarray) -> np.ndarray:
    """Orthogonal R maximising trace(H R^T), batched over leading axes."""
    u, _, vt = np.linalg.svd(h)
    return u @ vt


def procrustes_distance_batch(x, y) -> np.ndarray:
    """Congruence distance between stacks of configurations.

    Parameters
    ----------
    x, y : array_like, shape (..., k, d)
        Broadcast-compatible stacks of point tuples.

    Returns
    -------
    ndarray, shape (...)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-2:] != y.shape[-2:]:
        raise ValueError(f"configuration shapes differ: {x.shape[-2:]} vs {y.shape[-2:]}")
    x, y = np.broadcast_arrays(x, y)
    lead = x.shape[:-2]
    x = x.reshape(-1, *x.shape[-2:])
    y = y.reshape(-1, *y.shape[-2:])
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)
    xx = (xc * xc).sum(axis=(1, 2))
    yy = (yc * yc).sum(axis=(1, 2))
    h = np.einsum("nja,njb->nab", xc, yc)
    sq = np.maximum(xx + yy - 2.0 * _nuclear_norm(h), 0.0)

    # the closed form cancels catastrophically near zero; recompute the
    # residual explicitly there
    near = sq <= 1e-6 * (xx + yy)
    if np.any(near):
        xs, ys = xc[near], yc[near]
        r = _best_orthogonal(h[near])
        resid = xs - np.einsum("nab,njb->nja", r, ys)
        sq[near] = (resid * resid).sum(axis=(1, 2))
        sq[near & np.all(xc == yc, axis=(1, 2))] = 0.0
    return np.sqrt(sq).reshape(lead)


def procrustes_distance(x, y) -> float:
    """Minimum over rigid motions ``g`` of ``||x - g.y||``."""
    x, y = _as_config(x), _as_config(y)
    _check_compatible(x, y)
    return float(procrustes_distance_batch(x.points, y.points))


def optimal_alignment(x, y) -> tuple[RigidMotion, float]:
    """Rigid motion ``g`` minimising ``||x - g.y||`` and the attained distance.

    Reflections are allowed.  For rank-deficient configurations the minimiser
    is not unique and any one of them is returned.
    """
    x, y = _as_config(x), _as_config(y)
    _check_compatible(x, y)
    xm, ym = x.points.mean(axis=0), y.points.mean(axis=0)
    xc, yc = x.points - xm, y.points - ym
    r = np.eye(x.d) if np.array_equal(xc, yc) else _best_orthogonal(xc.T @ yc)
    motion = RigidMotion(OrthogonalMatrix(r), xm - r @ ym)
    return motion, procrustes_distance(x, y)


def config_dim(d: int, k: int) -> int:
    """Dimension ``d*k - d(d+1)/2`` of the maximal-rank part of the quotient."""
    if d < 2:
        raise ValueError(f"need d >= 2, got d={d}")
    if k <= d:
        raise ValueError(f"dimension formula needs k >= d + 1, got d={d}, k={k}")
    return d * k - d * (d + 1) // 2


def threshold(d: int, k: int) -> Fraction:
    """Dimension above which k-point configurations of a set are non-null."""
    if d < 2:
        raise ValueError(f"need d >= 2, got d={d}")
    if k < 3:
        raise ValueError(f"need k >= 3, got k={k}")
    if k >= d + 1:
        return d - Fraction(d - 1, k)
    return d - Fraction(k - 2, k)


def configuration_rank(x, tol: float = 1e-9) -> int:
    """Rank of the first-point difference matrix, relative to its top singular value."""
    x = _as_config(x)
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = np.linalg.svd(center(x).diffs, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def affine_reduce(x, tol: float = 1e-9) -> Configuration:
    """Express ``k <= d`` points in an orthonormal basis of their affine span.

    The result lives in ``R^(k-1)``; when the span has lower dimension the
    trailing coordinates are zero.
    """
    x = _as_config(x)
    if x.k > x.d:
        raise ValueError(f"affine reduction needs k <= d, got k={x.k}, d={x.d}")
    diffs = center(x).diffs
    _, s, vt = np.linalg.svd(diffs, full_matrices=False)
    rank = 0 if s[0] == 0.0 else int(np.count_nonzero(s > tol * s[0]))
    coords = np.zeros((x.k, x.k - 1))
    coords[1:, :rank] = diffs @ vt[:rank].T
    return Configuration(coords)


def parse_configurations(text: str) -> list[Configuration]:
    """Parse whitespace-separated points; blank lines separate configurations.

    Lines starting with ``#`` are ignored.
    """
    blocks: list[list[list[float]]] = [[]]
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("#"):
            continue
        if not s:
            if blocks[-1]:
                blocks.append([])
            continue
        try:
            blocks[-1].append([float(t) for t in s.split()])
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse coordinates {s!r}") from None
    out = []
    for block in blocks:
        if not block:
            continue
        widths = {len(p) for p in block}
        if len(widths) != 1:
            raise ValueError(f"inconsistent point dimensions {sorted(widths)}")
        out.append(Configuration(np.array(block)))
    return out


def read_configurations(path) -> list[Configuration]:
    return parse_configurations(Path(path).read_text())


def format_configuration(x) -> str:
    x = _as_config(x)
    return "".join(" ".join(f"{c:.17g}" for c in p) + "\n" for p in x.points)
