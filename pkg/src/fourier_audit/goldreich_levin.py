"""Adaptive bucket-tree search for tau-significant Fourier coefficients.

The bucket B(S, k) holds every subset that agrees with S on coordinates
1..k; its weight W is the sum of the members' squared coefficients. The
search walks the split tree breadth-first (depth, then mask), estimates
bucket weights with paired queries sharing a suffix, prunes below tau^2/2,
and re-estimates the surviving depth-n singletons with fresh samples.

Sampling is pooled per tree level: one paired pool (2m queries) serves every
bucket on that level through psi reweighting, which is what makes budgeted
runs (and the restricted-run-is-a-subset invariant) possible: pools are keyed
by (seed, level), so a restricted search sees byte-identical estimates. The
public ``estimate_bucket_weight`` keeps the one-bucket fresh-sample contract.

Requires Uniform or Product distributions: the paired estimator needs
coordinate independence to factor the suffix out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DistributionSpec,
    RandomSource,
    as_random_source,
    dist_biases,
    is_product_form,
    sample,
)
from .errors import (
    BudgetExceededError,
    InvalidParameterError,
    PartialEstimateError,
)
from .models import AuditBudget

WEIGHT_SLACK = 0.25  # report range for bucket weights is [-slack, 1+slack]
TREE_BUDGET_FRACTION = 0.75  # budgeted runs: tree pools vs leaf re-estimation


@dataclass
class Bucket:
    """A prefix node of the split tree."""

    prefix: int          # mask over coordinates 1..depth
    depth: int
    weight_estimate: float = 0.0
    samples_used: int = 0


@dataclass(frozen=True)
class SpectrumEntry:
    subset: int
    square: float
    samples: int


@dataclass
class SpectrumList:
    """Recovered subsets with squared-coefficient estimates, sorted descending."""

    entries: list[SpectrumEntry]
    tau: float
    delta: float
    queries_used: int = 0
    incomplete: bool = False
    restrict_to: int | None = None

    def __post_init__(self):
        seen = {e.subset for e in self.entries}
        if len(seen) != len(self.entries):
            raise InvalidParameterError("spectrum entries must be unique by subset")
        self.entries = sorted(self.entries, key=lambda e: -e.square)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def subsets(self) -> list[int]:
        return [e.subset for e in self.entries]

    def square(self, subset: int) -> float:
        for e in self.entries:
            if e.subset == subset:
                return e.square
        return 0.0


def pruning_radius(tau: float) -> float:
    """The confidence radius coupled to the significance threshold: tau^2/4."""
    return tau * tau / 4.0


def bucket_sample_schedule(tau: float, delta: float, n: int) -> int:
    """Per-bucket paired-sample count: two-sided Hoeffding on a [-1,1]
    statistic, union-bounded over the worst-case 2n/tau^2 x n tested buckets."""
    if not 0.0 < tau <= 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1], got {tau}")
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    tested = 2.0 * n * (2.0 / (tau * tau)) / delta
    return math.ceil(8.0 / tau**4 * math.log(tested))


def _require_product_form(dist: DistributionSpec) -> None:
    if not is_product_form(dist):
        raise InvalidParameterError(
            "the paired bucket-weight estimator needs independent coordinates; "
            "Uniform or Product distributions only"
        )


def _psi_transform(xs: np.ndarray, biases: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Per-coordinate centered factors; column products give psi_S values."""
    return (xs.astype(np.float64) - biases[None, :]) / sigmas[None, :]


def _mask_product(t: np.ndarray, mask: int, cache: dict[int, np.ndarray]) -> np.ndarray:
    if mask == 0:
        return np.ones(t.shape[0])
    hit = cache.get(mask)
    if hit is not None:
        return hit
    low = mask & (-mask)
    out = _mask_product(t, mask ^ low, cache) * t[:, low.bit_length() - 1]
    cache[mask] = out
    return out


def estimate_bucket_weight(
    model,
    bucket: Bucket,
    dist: DistributionSpec,
    m: int,
    rng: RandomSource | int | None = None,
    budget: AuditBudget | None = None,
) -> float:
    """Unbiased paired-query estimate of one bucket's weight, fresh samples.

    Draws prefix halves x, x' independently and a shared suffix z; averages
    h(x:z) h(x':z) psi_S(x) psi_S(x') over m pairs. Budget death mid-way
    raises with the number of completed pairs. The raw mean is stored on the
    bucket for diagnostics; the returned value is clamped to the report range.
    """
    _require_product_form(dist)
    if m < 1:
        raise InvalidParameterError("sample count must be >= 1")
    n = dist.n
    prefix, depth = bucket.prefix, bucket.depth
    if not 0 <= depth <= n:
        raise InvalidParameterError(f"depth must lie in [0, {n}]")
    if prefix >> depth:
        raise InvalidParameterError("prefix mask must live on coordinates 1..depth")
    if depth == 0:
        bucket.weight_estimate = 1.0
        return 1.0  # the root bucket is the whole power set
    rng = as_random_source(rng)
    biases = dist_biases(dist)
    sigmas = np.sqrt(np.maximum(0.0, 1.0 - biases**2))
    if np.any(sigmas[[i for i in range(n) if (prefix >> i) & 1]] == 0.0):
        bucket.weight_estimate = 0.0
        return 0.0  # psi_S is the zero function under a degenerate coordinate

    total = 0.0
    done = 0
    chunk = 8192
    r_x1, r_x2, r_z = rng.split(), rng.split(), rng.split()
    while done < m:
        take = min(chunk, m - done)
        x1 = sample(dist, r_x1, take)
        x2 = sample(dist, r_x2, take)
        z = sample(dist, r_z, take)
        q1 = np.concatenate([x1[:, :depth], z[:, depth:]], axis=1)
        q2 = np.concatenate([x2[:, :depth], z[:, depth:]], axis=1)
        try:
            y1 = model.query_batch(q1, budget).astype(np.float64)
            y2 = model.query_batch(q2, budget).astype(np.float64)
        except BudgetExceededError as exc:
            raise PartialEstimateError(
                f"budget died after {done} of {m} pairs", samples_completed=done
            ) from exc
        t1 = _psi_transform(x1, biases, sigmas)
        t2 = _psi_transform(x2, biases, sigmas)
        psi1 = _mask_product(t1, prefix, {})
        psi2 = _mask_product(t2, prefix, {})
        total += float(np.sum(y1 * psi1 * y2 * psi2))
        done += take
    raw = total / m
    bucket.weight_estimate = raw
    bucket.samples_used = m
    return float(np.clip(raw, -WEIGHT_SLACK, 1.0 + WEIGHT_SLACK))


@dataclass
class GLDiagnostics:
    """Side-channel outputs of the search used by the parity estimator."""

    mean_label: float = 0.0          # pooled sample mean of h (empty-set coefficient)
    signed: dict[int, float] = field(default_factory=dict)  # leaf signed estimates
    leaf_samples: int = 0
    level_samples: int = 0
    levels_completed: int = 0


def goldreich_levin(
    model,
    dist: DistributionSpec,
    tau: float,
    delta: float,
    budget: AuditBudget | int | None = None,
    rng: RandomSource | int | None = None,
    restrict_to: int | None = None,
    early_stop: bool = False,
) -> SpectrumList:
    """Breadth-first significant-coefficient search; see module docstring.

    ``restrict_to=A`` discards the branch excluding A at A's depth, so only
    subsets containing A are searched. ``early_stop`` truncates the reported
    list once its accumulated weight exceeds 1 - tau^2 (the dynamic variant's
    halting rule); off by default because it can only drop mass.
    """
    spectrum, _ = _gl_search(
        model, dist, tau, delta, budget=budget, rng=rng,
        restrict_to=restrict_to, early_stop=early_stop,
    )
    return spectrum


def _gl_search(
    model,
    dist: DistributionSpec,
    tau: float,
    delta: float,
    budget: AuditBudget | int | None = None,
    rng: RandomSource | int | None = None,
    restrict_to: int | None = None,
    early_stop: bool = False,
) -> tuple[SpectrumList, GLDiagnostics]:
    if tau <= 0.0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    if tau > 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1], got {tau}")
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    _require_product_form(dist)
    n = dist.n
    if model.n != n:
        raise InvalidParameterError("model and distribution dimensions differ")
    if restrict_to is not None and not 1 <= restrict_to <= n:
        raise InvalidParameterError(f"restrict_to coordinate {restrict_to} out of range")
    if isinstance(budget, int):
        budget = AuditBudget(budget)
    rng = as_random_source(rng)

    schedule = bucket_sample_schedule(tau, delta, n)
    if budget is None:
        m_level = m_leaf = schedule
    else:
        q = budget.remaining
        m_level = min(schedule, max(1, int(q * TREE_BUDGET_FRACTION) // (2 * n)))
        m_leaf = min(schedule, max(1, (q - 2 * n * m_level) // 2))

    # split streams up front in a fixed order so restricted runs share pools
    level_rngs = [rng.split() for _ in range(n)]
    leaf_rng_1, leaf_rng_2 = rng.split(), rng.split()

    biases = dist_biases(dist)
    sigmas = np.sqrt(np.maximum(0.0, 1.0 - biases**2))
    prune_at = tau * tau / 2.0
    max_buckets = math.ceil(4.0 / (tau * tau))

    diagnostics = GLDiagnostics(level_samples=m_level)
    queries = 0
    incomplete = False
    frontier: list[Bucket] = [Bucket(prefix=0, depth=0, weight_estimate=1.0)]

    for k in range(1, n + 1):
        if not frontier:
            break
        if budget is not None:
            try:
                budget.charge(2 * m_level)
            except BudgetExceededError:
                incomplete = True
                frontier = []
                break
        r = level_rngs[k - 1]
        x1 = sample(dist, r.split(), m_level)
        x2 = sample(dist, r.split(), m_level)
        z = sample(dist, r.split(), m_level)
        q1 = np.concatenate([x1[:, :k], z[:, k:]], axis=1)
        q2 = np.concatenate([x2[:, :k], z[:, k:]], axis=1)
        y1 = model.query_batch(q1).astype(np.float64)
        y2 = model.query_batch(q2).astype(np.float64)
        queries += 2 * m_level
        t1 = _psi_transform(x1, biases, sigmas)
        t2 = _psi_transform(x2, biases, sigmas)
        cache1: dict[int, np.ndarray] = {}
        cache2: dict[int, np.ndarray] = {}

        bit = 1 << (k - 1)
        next_frontier: list[Bucket] = []
        for parent in frontier:
            children = [parent.prefix, parent.prefix | bit]
            if restrict_to is not None and k == restrict_to:
                children = [parent.prefix | bit]
            for child in children:
                if sigmas[k - 1] == 0.0 and (child & bit):
                    continue  # degenerate coordinate: that half carries no basis mass
                p1 = y1 * _mask_product(t1, child, cache1)
                p2 = y2 * _mask_product(t2, child, cache2)
                w = float(np.mean(p1 * p2))
                if w >= prune_at:
                    next_frontier.append(
                        Bucket(prefix=child, depth=k, weight_estimate=w, samples_used=m_level)
                    )
        next_frontier.sort(key=lambda b: (-b.weight_estimate, b.prefix))
        frontier = next_frontier[:max_buckets]
        diagnostics.levels_completed = k

    # leaf re-estimation with fresh pools (the tree estimates are selection-biased)
    entries: list[SpectrumEntry] = []
    if frontier and diagnostics.levels_completed == n:
        leaf_budget_ok = True
        if budget is not None:
            try:
                budget.charge(2 * m_leaf)
            except BudgetExceededError:
                incomplete = True
                leaf_budget_ok = False
        if leaf_budget_ok:
            p1 = sample(dist, leaf_rng_1, m_leaf)
            p2 = sample(dist, leaf_rng_2, m_leaf)
            l1 = model.query_batch(p1).astype(np.float64)
            l2 = model.query_batch(p2).astype(np.float64)
            queries += 2 * m_leaf
            t1 = _psi_transform(p1, biases, sigmas)
            t2 = _psi_transform(p2, biases, sigmas)
            cache1, cache2 = {}, {}
            diagnostics.mean_label = float((np.mean(l1) + np.mean(l2)) / 2.0)
            diagnostics.leaf_samples = m_leaf
            for leaf in frontier:
                mean1 = float(np.mean(l1 * _mask_product(t1, leaf.prefix, cache1)))
                mean2 = float(np.mean(l2 * _mask_product(t2, leaf.prefix, cache2)))
                square = mean1 * mean2
                diagnostics.signed[leaf.prefix] = (mean1 + mean2) / 2.0
                if square >= prune_at:
                    entries.append(
                        SpectrumEntry(
                            subset=leaf.prefix,
                            square=float(np.clip(square, 0.0, 1.0 + WEIGHT_SLACK)),
                            samples=m_leaf,
                        )
                    )
        else:
            # best effort: report the selection-biased tree estimates
            for leaf in frontier:
                entries.append(
                    SpectrumEntry(
                        subset=leaf.prefix,
                        square=float(np.clip(leaf.weight_estimate, 0.0, 1.0 + WEIGHT_SLACK)),
                        samples=leaf.samples_used,
                    )
                )
    elif frontier:
        incomplete = True

    spectrum = SpectrumList(
        entries=entries,
        tau=tau,
        delta=delta,
        queries_used=queries,
        incomplete=incomplete,
        restrict_to=restrict_to,
    )
    if early_stop:
        kept: list[SpectrumEntry] = []
        running = 0.0
        for e in spectrum.entries:
            if running > 1.0 - tau * tau:
                break
            kept.append(e)
            running += e.square
        spectrum.entries = kept
    return spectrum, diagnostics
