"""Brute-force ground truth for every property on small n.

Perturbation kernels are integrated analytically per coordinate (the Flip
kernel factorizes), so robustness needs one O(n 2^n) smoothing pass instead
of enumerating pairs; the l-coordinate variant averages the restricted kernel
over all C(n, l) coordinate subsets. Group-conditional quantities come from
weighted enumeration.

Two distinct influence enumerations are exposed on purpose:

- ``exact_flip_influence``: the coupled pair (x, x with the sensitive
  coordinate forced to the other group) — the quantity that equals the
  squared-coefficient mass on subsets containing A under Uniform.
- ``exact_cross_group_disagreement``: an independent pair conditioned to
  opposite groups — the quantity the group-fairness quadratic consumes.

They differ in general (Majority-of-3, A=1: 0.5 vs 0.625), so conflating
them silently corrupts either the identity checks or the quadratic.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    DistributionSpec,
    Empirical,
    dist_biases,
    enumerate_points,
    is_product_form,
    point_index,
)
from .errors import (
    DegenerateGroupError,
    InvalidParameterError,
    TooLargeError,
)

ROBUSTNESS_MAX_N = 8
GROUP_MAX_N = 12


@dataclass
class ExactResult:
    property_name: str
    value: float
    correlation: float | None
    enumeration_size: int
    wall_ms: float
    method: str = "Exact"


def _require(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise TooLargeError(
            f"exact {what} enumerates 2^{n} states; n <= {cap} required "
            "(harness.mc_reference is the Monte-Carlo fallback)"
        )


def _point_weights(dist: DistributionSpec, n: int) -> np.ndarray:
    """D(x) over the full enumerate_points(n) order."""
    if isinstance(dist, Empirical):
        w = np.zeros(1 << n)
        np.add.at(w, point_index(dist.points), dist.weights)
        return w
    biases = dist_biases(dist)
    w = np.ones(1 << n)
    for i in range(n):
        view = w.reshape(-1, 2, 1 << i)
        view[:, 0, :] *= (1.0 + biases[i]) / 2.0
        view[:, 1, :] *= (1.0 - biases[i]) / 2.0
    return w


def _smooth(h: np.ndarray, coords: tuple[int, ...], rho: float) -> np.ndarray:
    """(T h)(x) = E[h(y)] for the Flip(rho) kernel on the given 0-based coords."""
    keep = (1.0 + rho) / 2.0
    g = h.astype(np.float64)
    for i in coords:
        view = g.reshape(-1, 2, 1 << i)
        plus, minus = view[:, 0, :].copy(), view[:, 1, :].copy()
        view[:, 0, :] = keep * plus + (1.0 - keep) * minus
        view[:, 1, :] = keep * minus + (1.0 - keep) * plus
        g = view.reshape(-1)
    return g


def _full_labels(model) -> np.ndarray:
    return model.query_batch(enumerate_points(model.n)).astype(np.float64)


def exact_property(model, dist: DistributionSpec, prop) -> ExactResult:
    """Exact property value by enumeration. See module docstring for caps."""
    from .estimators import IndividualFairness, Multicalibration, Robustness, StatisticalParity

    start = time.perf_counter()
    n = model.n
    if n != dist.n:
        raise InvalidParameterError("model and distribution dimensions differ")

    if isinstance(prop, (Robustness, IndividualFairness)):
        _require(n, ROBUSTNESS_MAX_N, "perturbation analysis")
        if model.arity != 2:
            raise InvalidParameterError("perturbation properties need binary labels")
        h = _full_labels(model)
        weights = _point_weights(dist, n)
        if isinstance(prop, Robustness):
            smoothed = _smooth(h, tuple(range(n)), prop.rho)
            corr = float(weights @ (h * smoothed))
            size = 1 << n
        else:
            if prop.l > n:
                raise InvalidParameterError(f"l={prop.l} exceeds dimension {n}")
            total = 0.0
            count = 0
            for subset in itertools.combinations(range(n), prop.l):
                smoothed = _smooth(h, subset, prop.rho)
                total += float(weights @ (h * smoothed))
                count += 1
            corr = total / count
            size = count * (1 << n)
        value = (1.0 - corr) / 2.0
        name = "robustness" if isinstance(prop, Robustness) else "individual-fairness"
        return ExactResult(name, value, corr, size, (time.perf_counter() - start) * 1e3)

    if isinstance(prop, StatisticalParity):
        _require(n, GROUP_MAX_N, "group analysis")
        if model.arity != 2:
            raise InvalidParameterError(
                "statistical parity needs binary labels; use Multicalibration for K >= 3"
            )
        rates = exact_group_rates(model, dist, prop.sensitive)
        value = abs(rates.g_plus - rates.g_minus)
        return ExactResult(
            "statistical-parity", value, None, 1 << n, (time.perf_counter() - start) * 1e3
        )

    if isinstance(prop, Multicalibration):
        _require(n, GROUP_MAX_N, "group analysis")
        labels, weights = _labels_and_weights(model, dist)
        plus, minus = _group_masses(dist, weights, prop.sensitive)
        values = sorted(set(labels.tolist()))
        worst = 0.0
        for y in values:
            sel = labels == y
            p_plus = float((weights * plus)[sel].sum()) / float((weights * plus).sum())
            p_minus = float((weights * minus)[sel].sum()) / float((weights * minus).sum())
            worst = max(worst, abs(p_plus - p_minus))
        return ExactResult(
            "multicalibration", worst, None, labels.size, (time.perf_counter() - start) * 1e3
        )

    raise InvalidParameterError(f"unknown property {prop!r}")


def _labels_and_weights(model, dist: DistributionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Labels and D-weights over the relevant enumeration."""
    if isinstance(dist, Empirical):
        return model.query_batch(dist.points).astype(np.int64), dist.weights.copy()
    xs = enumerate_points(model.n)
    return model.query_batch(xs).astype(np.int64), _point_weights(dist, model.n)


def _group_masses(dist: DistributionSpec, weights: np.ndarray, sensitive: int) -> tuple[np.ndarray, np.ndarray]:
    """Indicator vectors (as 0/1 floats) for x_A = +1 and x_A = -1."""
    if isinstance(dist, Empirical):
        col = dist.points[:, sensitive - 1]
    else:
        n = int(np.log2(weights.size))
        col = enumerate_points(n)[:, sensitive - 1]
    plus = (col == 1).astype(np.float64)
    alpha = float((weights * plus).sum())
    if alpha <= 0.0 or alpha >= 1.0:
        raise DegenerateGroupError(
            f"group x_{sensitive}=+1 has probability {alpha}; both groups must be present"
        )
    return plus, 1.0 - plus


@dataclass(frozen=True)
class GroupRates:
    """Exact group-conditional positive rates and their aggregates."""

    alpha: float      # P[x_A = +1]
    p: float          # P[h = +1]
    g_plus: float     # P[h = +1 | x_A = +1]
    g_minus: float    # P[h = +1 | x_A = -1]


def exact_group_rates(model, dist: DistributionSpec, sensitive: int) -> GroupRates:
    if sensitive < 1 or sensitive > model.n:
        raise InvalidParameterError(f"sensitive coordinate {sensitive} out of range")
    _require(model.n, GROUP_MAX_N, "group analysis")
    labels, weights = _labels_and_weights(model, dist)
    plus, minus = _group_masses(dist, weights, sensitive)
    alpha = float((weights * plus).sum())
    positive = (labels == 1).astype(np.float64)
    g_plus = float((weights * plus * positive).sum()) / alpha
    g_minus = float((weights * minus * positive).sum()) / (1.0 - alpha)
    p = float((weights * positive).sum())
    return GroupRates(alpha=alpha, p=p, g_plus=g_plus, g_minus=g_minus)


def exact_flip_influence(model, dist: DistributionSpec, sensitive: int) -> float:
    """P[h(x) != h(x with coordinate A forced to the opposite group)],
    x drawn from D conditioned on x_A = +1 (the coupled pair)."""
    _require(model.n, GROUP_MAX_N, "group analysis")
    labels, weights = _labels_and_weights(model, dist)
    plus, _ = _group_masses(dist, weights, sensitive)
    if isinstance(dist, Empirical):
        flipped = dist.points.copy()
        flipped[:, sensitive - 1] *= -1
        flipped_labels = model.query_batch(flipped).astype(np.int64)
    else:
        n = model.n
        idx = np.arange(1 << n)
        flipped_labels = labels[idx ^ (1 << (sensitive - 1))]
    alpha = float((weights * plus).sum())
    differs = (labels != flipped_labels).astype(np.float64)
    return float((weights * plus * differs).sum()) / alpha


def exact_cross_group_disagreement(model, dist: DistributionSpec, sensitive: int) -> float:
    """P[h(x) != h(y)] for independent x ~ D|x_A=+1 and y ~ D|x_A=-1,
    by direct double enumeration."""
    _require(model.n, ROBUSTNESS_MAX_N, "pair enumeration")
    labels, weights = _labels_and_weights(model, dist)
    plus, minus = _group_masses(dist, weights, sensitive)
    alpha = float((weights * plus).sum())
    w_plus = (weights * plus) / alpha
    w_minus = (weights * minus) / (1.0 - alpha)
    differs = labels[:, None] != labels[None, :]
    return float(w_plus @ differs @ w_minus)


def exact_pair_restricted_sp(
    model, dist: DistributionSpec, label_a: int, label_b: int, sensitive: int
) -> float:
    """|P[h=a | x_A=+1, h in {a,b}] - P[h=a | x_A=-1, h in {a,b}]| exactly."""
    _require(model.n, GROUP_MAX_N, "group analysis")
    labels, weights = _labels_and_weights(model, dist)
    keep = (labels == label_a) | (labels == label_b)
    if not np.any(keep):
        raise DegenerateGroupError(f"labels {label_a}/{label_b} never occur")
    plus, minus = _group_masses(dist, weights, sensitive)
    w_plus = weights * plus * keep
    w_minus = weights * minus * keep
    if w_plus.sum() <= 0 or w_minus.sum() <= 0:
        raise DegenerateGroupError(
            f"restricted domain for labels ({label_a},{label_b}) misses a group"
        )
    hit = (labels == label_a).astype(np.float64)
    return abs(float((w_plus * hit).sum() / w_plus.sum())
               - float((w_minus * hit).sum() / w_minus.sum()))
