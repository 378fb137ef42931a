"""Domain types shared by every module: points, subsets, distributions,
perturbations, and deterministic randomness.

Points live in {-1,+1}^n with 1 <= n <= 30. A single point is a length-n
int8 array; a batch is an (m, n) int8 matrix with one point per row. Subsets
of coordinates are n-bit masks where bit (i-1) stands for coordinate i
(coordinates are 1-based everywhere user-facing).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidDistributionError,
    InvalidParameterError,
)

MAX_DIMENSION = 30
EMPIRICAL_WEIGHT_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# points and subsets
# ---------------------------------------------------------------------------

def check_dimension(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_DIMENSION:
        raise InvalidDimensionError(
            f"dimension must be an integer in [1, {MAX_DIMENSION}], got {n!r}"
        )
    return int(n)


def as_point_batch(xs: Union[np.ndarray, Sequence[Sequence[int]]], n: int) -> np.ndarray:
    """Validate and coerce a batch of points to an (m, n) int8 matrix."""
    arr = np.asarray(xs, dtype=np.int8)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise InvalidDimensionError(
            f"point batch must have shape (m, {n}), got {arr.shape}"
        )
    if not np.all(np.abs(arr) == 1):
        raise InvalidParameterError("point entries must be exactly -1 or +1")
    return arr


def subset_cardinality(mask: int) -> int:
    return int(mask).bit_count()


def subset_members(mask: int) -> tuple[int, ...]:
    """1-based coordinates of a mask, ascending."""
    out = []
    i = 1
    m = int(mask)
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


def subset_from_members(coords: Iterable[int], n: int | None = None) -> int:
    mask = 0
    for c in coords:
        if c < 1 or (n is not None and c > n):
            raise InvalidParameterError(f"coordinate {c} out of range")
        mask |= 1 << (c - 1)
    return mask


def format_subset(mask: int) -> str:
    if mask == 0:
        return "{}"
    return "{" + ",".join(str(c) for c in subset_members(mask)) + "}"


def subset_order(n: int) -> list[int]:
    """The fixed enumeration order of all 2^n masks: cardinality, then mask."""
    return sorted(range(1 << n), key=lambda m: (m.bit_count(), m))


def enumerate_points(n: int) -> np.ndarray:
    """All 2^n points as a (2^n, n) int8 matrix.

    Row index b encodes the point whose coordinate i is -1 when bit (i-1) of
    b is set and +1 otherwise; row 0 is the all-ones point.
    """
    check_dimension(n)
    idx = np.arange(1 << n, dtype=np.uint32)
    bits = (idx[:, None] >> np.arange(n, dtype=np.uint32)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def point_index(xs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`enumerate_points` row encoding, vectorized."""
    n = xs.shape[1]
    bits = (xs < 0).astype(np.int64)
    return bits @ (1 << np.arange(n, dtype=np.int64))


# ---------------------------------------------------------------------------
# randomness
# ---------------------------------------------------------------------------

@dataclass
class RandomSource:
    """Deterministic, splittable randomness.

    A source owns one lazily created numpy generator; ``split()`` derives an
    independent child keyed by (seed, split counter), so equal seeds and equal
    split paths reproduce draws exactly, across runs and platforms.
    """

    seed: int
    _splits: int = field(default=0, repr=False)
    _gen: np.random.Generator | None = field(default=None, repr=False)

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.default_rng(np.random.SeedSequence(self.seed))
        return self._gen

    def split(self) -> "RandomSource":
        self._splits += 1
        child = np.random.SeedSequence(entropy=self.seed, spawn_key=(self._splits,))
        return RandomSource(seed=int(child.generate_state(1, np.uint64)[0]))


def as_random_source(rng: Union[RandomSource, int, None]) -> RandomSource:
    if isinstance(rng, RandomSource):
        return rng
    return RandomSource(seed=0 if rng is None else int(rng))


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    """Uniform distribution on {-1,+1}^n."""

    n: int

    def __post_init__(self):
        check_dimension(self.n)

    @property
    def biases(self) -> np.ndarray:
        return np.zeros(self.n)

    def sample(self, m: int, rng: RandomSource) -> np.ndarray:
        g = rng.generator()
        return (1 - 2 * g.integers(0, 2, size=(m, self.n))).astype(np.int8)


@dataclass(frozen=True)
class Product:
    """Independent coordinates with E[x_i] = biases[i] in [-1, 1]."""

    biases: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.biases, dtype=float)
        check_dimension(b.shape[0] if b.ndim == 1 else 0)
        if b.ndim != 1:
            raise InvalidParameterError("bias vector must be one-dimensional")
        if np.any(np.abs(b) > 1):
            raise InvalidParameterError("biases must lie in [-1, 1]")
        object.__setattr__(self, "biases", b)

    @property
    def n(self) -> int:
        return int(self.biases.shape[0])

    def sample(self, m: int, rng: RandomSource) -> np.ndarray:
        g = rng.generator()
        p_plus = (1.0 + self.biases) / 2.0
        u = g.random((m, self.n))
        return np.where(u < p_plus[None, :], 1, -1).astype(np.int8)


@dataclass(frozen=True)
class Empirical:
    """Finite weighted support: atoms (k, n) with positive weights summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int8)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidDistributionError("empirical support must be non-empty")
        check_dimension(pts.shape[1])
        if not np.all(np.abs(pts) == 1):
            raise InvalidParameterError("support entries must be exactly -1 or +1")
        if w.shape != (pts.shape[0],) or np.any(w <= 0):
            raise InvalidParameterError("weights must be strictly positive, one per atom")
        if abs(float(w.sum()) - 1.0) > EMPIRICAL_WEIGHT_TOLERANCE:
            raise InvalidParameterError(
                f"weights must sum to 1 within {EMPIRICAL_WEIGHT_TOLERANCE}, "
                f"got {float(w.sum())!r}"
            )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.points.shape[1])

    def sample(self, m: int, rng: RandomSource) -> np.ndarray:
        g = rng.generator()
        idx = g.choice(self.points.shape[0], size=m, p=self.weights)
        return self.points[idx]


DistributionSpec = Union[Uniform, Product, Empirical]


def is_product_form(dist: DistributionSpec) -> bool:
    """True when coordinates are independent (Uniform or Product)."""
    return isinstance(dist, (Uniform, Product))


def dist_biases(dist: DistributionSpec) -> np.ndarray:
    if isinstance(dist, Uniform):
        return np.zeros(dist.n)
    if isinstance(dist, Product):
        return np.asarray(dist.biases, dtype=float)
    raise InvalidParameterError("biases are defined for Uniform/Product only")


def group_probability(dist: DistributionSpec, coordinate: int) -> float:
    """P[x_A = +1] for the sensitive coordinate A (1-based).

    Exact for Uniform/Product; the weighted atom mass for Empirical.
    """
    if coordinate < 1 or coordinate > dist.n:
        raise InvalidParameterError(f"coordinate {coordinate} out of range")
    if isinstance(dist, Empirical):
        col = dist.points[:, coordinate - 1]
        return float(dist.weights[col == 1].sum())
    return float((1.0 + dist_biases(dist)[coordinate - 1]) / 2.0)


def sample(dist: DistributionSpec, rng: RandomSource, m: int = 1) -> np.ndarray:
    """Draw m points from the distribution as an (m, n) int8 matrix."""
    if m < 1:
        raise InvalidParameterError("sample count must be >= 1")
    return dist.sample(m, rng)


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Flip:
    """Keep each coordinate independently with probability (1+rho)/2."""

    rho: float

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidParameterError(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class FlipL:
    """Pick l distinct coordinates uniformly, apply the Flip rule to them only."""

    rho: float
    l: int

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidParameterError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.l < 1:
            raise InvalidParameterError(f"l must be >= 1, got {self.l}")


PerturbationSpec = Union[Flip, FlipL]


def perturb(xs: np.ndarray, spec: PerturbationSpec, rng: RandomSource) -> np.ndarray:
    """Perturb a batch of points; one independent draw per row."""
    xs = np.asarray(xs, dtype=np.int8)
    if xs.ndim == 1:
        xs = xs.reshape(1, -1)
    m, n = xs.shape
    g = rng.generator()
    keep_prob = (1.0 + spec.rho) / 2.0
    if isinstance(spec, Flip):
        keep = g.random((m, n)) < keep_prob
    else:
        if spec.l > n:
            raise InvalidParameterError(f"l={spec.l} exceeds dimension {n}")
        # choose an l-subset per row without replacement, then flip-rule on it
        chosen_cols = np.argsort(g.random((m, n)), axis=1)[:, : spec.l]
        touched = np.zeros((m, n), dtype=bool)
        touched[np.arange(m)[:, None], chosen_cols] = True
        keep = np.where(touched, g.random((m, n)) < keep_prob, True)
    return np.where(keep, xs, -xs).astype(np.int8)
