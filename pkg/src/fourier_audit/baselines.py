"""Plain i.i.d. sampling estimators used as the comparison baseline.

Robustness and individual fairness are estimated by drawing pairs
(x, perturbed x) and counting disagreements; parity properties by sampling
each sensitive group to its quota and differencing conditional rates. No
spectrum is involved, so these provide the reference curve that the
spectral estimators are compared against in sweeps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    DistributionSpec,
    Flip,
    FlipL,
    PerturbationSpec,
    RandomSource,
    as_random_source,
    perturb,
    sample,
)
from .errors import InvalidParameterError, StarvedGroupError
from .estimators import (
    AuditReport,
    IndividualFairness,
    Multicalibration,
    PropertySpec,
    Robustness,
    StatisticalParity,
)
from .models import AuditBudget, ModelOracle

RETRY_FACTOR = 100  # group sampling gives up after RETRY_FACTOR * m draws


@dataclass(frozen=True)
class BaselineSpec:
    """What to estimate and how many samples to spend."""

    property: PropertySpec
    m: int
    perturbation: PerturbationSpec | None = None

    def __post_init__(self):
        if self.m < 1:
            raise InvalidParameterError(f"sample count must be >= 1, got {self.m}")

    def resolved_perturbation(self) -> PerturbationSpec:
        if self.perturbation is not None:
            return self.perturbation
        if isinstance(self.property, Robustness):
            return Flip(self.property.rho)
        if isinstance(self.property, IndividualFairness):
            return FlipL(self.property.rho, self.property.l)
        raise InvalidParameterError(
            f"{self.property.name} takes no perturbation; it is a group property"
        )


def _disagreement_estimate(
    model: ModelOracle,
    dist: DistributionSpec,
    spec: BaselineSpec,
    rng: RandomSource,
    budget: AuditBudget | None,
) -> AuditReport:
    xs = sample(dist, rng.split(), spec.m)
    ys = perturb(xs, spec.resolved_perturbation(), rng.split())
    labels_x = model.query_batch(xs, budget)
    labels_y = model.query_batch(ys, budget)
    freq = float(np.mean(labels_x != labels_y))
    return AuditReport(
        property=spec.property,
        method="Uniform",
        estimate=freq,
        companions={"correlation": 1.0 - 2.0 * freq},
        details={"m": float(spec.m)},
        queries_used=2 * spec.m,
    )


def _group_conditional_labels(
    model: ModelOracle,
    dist: DistributionSpec,
    sensitive: int,
    per_group: int,
    rng: RandomSource,
    budget: AuditBudget | None,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Sample labels for each sensitive group up to its quota.

    Draws from the distribution are free; only accepted points are queried.
    Returns (labels in group +1, labels in group -1, queries, observed alpha).
    """
    col = sensitive - 1
    kept = {+1: [], -1: []}
    seen = {+1: 0, -1: 0}
    drawn = 0
    cap = RETRY_FACTOR * 2 * per_group
    chunk = max(64, min(8192, 4 * per_group))
    while drawn < cap and (len(kept[+1]) < per_group or len(kept[-1]) < per_group):
        xs = sample(dist, rng.split(), chunk)
        drawn += chunk
        for grp in (+1, -1):
            rows = xs[xs[:, col] == grp]
            seen[grp] += rows.shape[0]
            short = per_group - len(kept[grp])
            if short > 0 and rows.shape[0] > 0:
                kept[grp].extend(rows[:short])
    for grp in (+1, -1):
        if len(kept[grp]) == 0:
            raise StarvedGroupError(
                f"group x_{sensitive}={grp:+d} never appeared in "
                f"{drawn} draws",
                group=grp,
            )
    queries = 0
    labels = {}
    for grp in (+1, -1):
        pts = np.stack(kept[grp])
        labels[grp] = model.query_batch(pts, budget)
        queries += pts.shape[0]
    alpha = seen[+1] / max(1, seen[+1] + seen[-1])
    return labels[+1], labels[-1], queries, alpha


def uniform_estimate(
    model: ModelOracle,
    dist: DistributionSpec,
    spec: BaselineSpec,
    rng: RandomSource | int | None = None,
    budget: AuditBudget | None = None,
) -> AuditReport:
    """The baseline estimate for any property, by direct frequency counting.

    Robustness and individual fairness report the disagreement frequency over
    m perturbed pairs (flip probability primary, correlation companion).
    Parity properties sample each group to a quota of ceil(m/2) and report
    the conditional-rate gap; multiclass takes the max over labels.
    """
    rng = as_random_source(rng)
    start = time.perf_counter()
    if isinstance(spec.property, (Robustness, IndividualFairness)):
        report = _disagreement_estimate(model, dist, spec, rng, budget)
    elif isinstance(spec.property, StatisticalParity):
        per_group = max(1, (spec.m + 1) // 2)
        plus, minus, queries, alpha = _group_conditional_labels(
            model, dist, spec.property.sensitive, per_group, rng, budget
        )
        g_plus = float(np.mean(plus == 1))
        g_minus = float(np.mean(minus == 1))
        report = AuditReport(
            property=spec.property,
            method="Uniform",
            estimate=abs(g_plus - g_minus),
            companions={"g_plus": g_plus, "g_minus": g_minus},
            details={"alpha_observed": alpha, "m": float(spec.m)},
            queries_used=queries,
        )
    elif isinstance(spec.property, Multicalibration):
        per_group = max(1, (spec.m + 1) // 2)
        plus, minus, queries, alpha = _group_conditional_labels(
            model, dist, spec.property.sensitive, per_group, rng, budget
        )
        gaps = {}
        for label in range(model.arity):
            gaps[label] = abs(
                float(np.mean(plus == label)) - float(np.mean(minus == label))
            )
        best = max(gaps, key=lambda y: (gaps[y], -y))
        report = AuditReport(
            property=spec.property,
            method="Uniform",
            estimate=gaps[best],
            companions={"arg_label": float(best)},
            details={"alpha_observed": alpha, "m": float(spec.m)},
            queries_used=queries,
        )
    else:
        raise InvalidParameterError(f"unknown property {spec.property!r}")
    report.wall_ms = (time.perf_counter() - start) * 1000.0
    return report
