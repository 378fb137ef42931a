"""Property estimators over recovered spectra.

Robustness and individual fairness reduce to weighted sums of squared
coefficients: each property has a characteristic factor per subset, the
property's correlation form is sum(char(S) * square(S)), and the flip
probability is (1 - correlation) / 2. Statistical parity instead solves a
quadratic in the group-rate gap whose inputs (group balance, positive rate,
sensitive-coordinate influence) all come from the recovered spectrum.

Both correlation and flip-probability surfaces are always reported: the
definitions in circulation disagree on which one "robustness" names, so the
report carries the pair and the primary value is the correlation.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DistributionSpec,
    Empirical,
    RandomSource,
    as_random_source,
    dist_biases,
    group_probability,
    is_product_form,
    sample,
)
from .errors import (
    BudgetExceededError,
    DegenerateGroupError,
    InvalidParameterError,
    NoValidPairError,
    PartialEstimateError,
    UnsupportedPropertyError,
)
from .goldreich_levin import SpectrumList, _gl_search
from .models import AuditBudget, ModelOracle

MEAN_POOL_CAP = 4096  # fallback sample count for a standalone mean estimate


@dataclass(frozen=True)
class Robustness:
    """Stability under independent per-coordinate noise with correlation rho."""

    rho: float
    name: str = field(default="robustness", init=False)

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidParameterError(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class IndividualFairness:
    """Stability when exactly l uniformly chosen coordinates get rho-noise."""

    rho: float
    l: int
    name: str = field(default="individual-fairness", init=False)

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidParameterError(f"rho must lie in [-1, 1], got {self.rho}")
        if self.l < 1:
            raise InvalidParameterError(f"l must be >= 1, got {self.l}")


@dataclass(frozen=True)
class StatisticalParity:
    """Gap between positive rates across the two sensitive-coordinate groups."""

    sensitive: int
    name: str = field(default="statistical-parity", init=False)

    def __post_init__(self):
        if self.sensitive < 1:
            raise InvalidParameterError(
                f"sensitive coordinate must be >= 1, got {self.sensitive}"
            )


@dataclass(frozen=True)
class Multicalibration:
    """Max over labels of the group-conditional probability gap (K >= 3 labels)."""

    sensitive: int
    name: str = field(default="multicalibration", init=False)

    def __post_init__(self):
        if self.sensitive < 1:
            raise InvalidParameterError(
                f"sensitive coordinate must be >= 1, got {self.sensitive}"
            )


PropertySpec = Robustness | IndividualFairness | StatisticalParity | Multicalibration


def characteristic(prop: PropertySpec, subset: int, n: int) -> float:
    """Per-subset weight of the property's correlation form.

    Robustness: rho^|S|. Individual fairness: the expectation of rho^|S & F|
    over a uniformly random l-subset F, a hypergeometric average. Parity
    properties have no characteristic; they use the quadratic path.
    """
    if n < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {n}")
    if subset >> n:
        raise InvalidParameterError("subset mask exceeds the dimension")
    size = subset.bit_count()
    if isinstance(prop, Robustness):
        return float(prop.rho**size)
    if isinstance(prop, IndividualFairness):
        if prop.l > n:
            raise InvalidParameterError(f"l={prop.l} exceeds dimension {n}")
        total = math.comb(n, prop.l)
        acc = 0.0
        for j in range(0, min(size, prop.l) + 1):
            ways = math.comb(size, j) * math.comb(n - size, prop.l - j)
            if ways:
                acc += ways * prop.rho**j
        return acc / total
    raise UnsupportedPropertyError(
        f"{prop.name} has no characteristic function; use its parity path"
    )


@dataclass(frozen=True)
class GFQuadratic:
    """Coefficients of the group-rate-gap quadratic.

    With group balance alpha, overall positive rate p, and sensitive-flip
    influence inf_a, the gap X solves
    2 alpha (1-alpha) X^2 + (1-2p)(1-2alpha) X - inf_a + 2 p (1-p) = 0.
    """

    alpha: float
    p: float
    inf_a: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DegenerateGroupError(
                f"group balance must lie strictly in (0, 1), got {self.alpha}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError(f"positive rate must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.inf_a <= 1.0:
            raise InvalidParameterError(
                f"influence must lie in [0, 1], got {self.inf_a}"
            )

    @property
    def a(self) -> float:
        return 2.0 * self.alpha * (1.0 - self.alpha)

    @property
    def b(self) -> float:
        return (1.0 - 2.0 * self.p) * (1.0 - 2.0 * self.alpha)

    @property
    def c(self) -> float:
        return -self.inf_a + 2.0 * self.p * (1.0 - self.p)

    @property
    def discriminant(self) -> float:
        a, p = self.alpha, self.p
        return (
            4.0 * a * a + 4.0 * p * p - 4.0 * a - 4.0 * p + 1.0
            + 8.0 * a * (1.0 - a) * self.inf_a
        )


def _gf_root(q: GFQuadratic) -> tuple[float, list[str]]:
    """Smallest nonnegative root with clamp bookkeeping.

    A valid gap is a nonnegative root of the quadratic. When both roots
    qualify the smaller one is reported: the spurious companion root
    -b/a - gap exceeds the gap in every enumerated feasible case where the
    two differ and the constant term is zero (independent models whose
    positive rate is not one half), and in most two-positive-root cases.
    If neither root is nonnegative the inputs are inconsistent (estimation
    noise); the root nearest zero is folded back by absolute value.
    """
    flags: list[str] = []
    disc = q.discriminant
    if disc < 0.0:
        flags.append("discriminant-clamped")
        disc = 0.0
    half_width = math.sqrt(disc) / (2.0 * q.a)
    center = -q.b / (2.0 * q.a)
    roots = (center - half_width, center + half_width)
    nonneg = [r for r in roots if r >= -1e-12]
    root = min(nonneg) if nonneg else max(roots)
    value = abs(root)
    if value > 1.0:
        flags.append("root-out-of-range")
        value = 1.0
    return value, flags


def solve_gf_quadratic(q: GFQuadratic) -> float:
    """The group-rate gap: smallest nonnegative root, absolute, clamped to [0, 1]."""
    value, _ = _gf_root(q)
    return value


@dataclass
class AuditReport:
    """One property estimate with its companions and accounting."""

    property: PropertySpec
    method: str                      # "AFA" | "Uniform" | "Exact"
    estimate: float
    companions: dict[str, float] = field(default_factory=dict)
    details: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    queries_used: int = 0
    epsilon: float | None = None
    delta: float | None = None
    spectrum: SpectrumList | None = None
    wall_ms: float = 0.0


def format_report(report: AuditReport) -> str:
    """Stable-key-order text rendition used by the command line."""
    lines = [
        f"property: {report.property.name}",
        f"method: {report.method}",
        f"estimate: {report.estimate:.9f}",
    ]
    for key in sorted(report.companions):
        lines.append(f"companion.{key}: {report.companions[key]:.9f}")
    for key in sorted(report.details):
        lines.append(f"detail.{key}: {report.details[key]:.9f}")
    if report.epsilon is not None:
        lines.append(f"epsilon: {report.epsilon:.9f}")
    if report.delta is not None:
        lines.append(f"delta: {report.delta:.9f}")
    lines.append(f"flags: {','.join(report.flags) if report.flags else 'none'}")
    lines.append(f"queries: {report.queries_used}")
    if report.spectrum is not None:
        shown = ",".join(
            f"{e.subset:#x}:{e.square:.6f}" for e in report.spectrum.entries
        )
        lines.append(f"spectrum: {shown if shown else 'empty'}")
    return "\n".join(lines)


def estimate_squared_coefficient(
    model: ModelOracle,
    subset: int,
    dist: DistributionSpec,
    m1: int,
    m2: int,
    rng: RandomSource | int | None = None,
    budget: AuditBudget | None = None,
) -> float:
    """Two-independent-sample product estimate of one squared coefficient.

    The average of h(x) psi_S(x) over the first sample times the same average
    over the second is unbiased for the squared coefficient because the two
    factors are independent.
    """
    if m1 < 1 or m2 < 1:
        raise InvalidParameterError("sample counts must be >= 1")
    if not is_product_form(dist):
        raise InvalidParameterError(
            "squared-coefficient sampling needs Uniform or Product distributions"
        )
    if subset >> dist.n:
        raise InvalidParameterError("subset mask exceeds the dimension")
    rng = as_random_source(rng)
    biases = dist_biases(dist)
    sigmas = np.sqrt(np.maximum(0.0, 1.0 - biases**2))
    cols = [i for i in range(dist.n) if (subset >> i) & 1]
    if any(sigmas[i] == 0.0 for i in cols):
        return 0.0

    means = []
    done_pools = 0
    for m, r in ((m1, rng.split()), (m2, rng.split())):
        xs = sample(dist, r, m)
        try:
            ys = model.query_batch(xs, budget).astype(np.float64)
        except BudgetExceededError as exc:
            raise PartialEstimateError(
                f"budget died after {done_pools} of 2 sample pools",
                samples_completed=done_pools * m1,
            ) from exc
        psi = np.ones(m)
        for i in cols:
            psi *= (xs[:, i].astype(np.float64) - biases[i]) / sigmas[i]
        means.append(float(np.mean(ys * psi)))
        done_pools += 1
    return means[0] * means[1]


def estimate_spectral_property(
    prop: PropertySpec, spectrum: SpectrumList, n: int
) -> AuditReport:
    """Plug a recovered spectrum into the property's correlation form."""
    if not isinstance(prop, (Robustness, IndividualFairness)):
        raise UnsupportedPropertyError(
            f"spectral plug-in covers robustness and individual fairness, not {prop.name}"
        )
    if len(spectrum) == 0:
        raise InvalidParameterError("spectrum list is empty; nothing to plug in")
    start = time.perf_counter()
    raw = 0.0
    for entry in spectrum:
        raw += characteristic(prop, entry.subset, n) * entry.square
    corr = float(np.clip(raw, -1.0, 1.0))
    flip = (1.0 - corr) / 2.0
    flags = ["incomplete"] if spectrum.incomplete else []
    if corr != raw:
        flags.append("clamped")
    report = AuditReport(
        property=prop,
        method="AFA",
        estimate=corr,
        companions={"flip_probability": flip},
        details={"tau": spectrum.tau, "delta": spectrum.delta},
        flags=flags,
        queries_used=spectrum.queries_used,
        delta=spectrum.delta,
        spectrum=spectrum,
    )
    report.wall_ms = (time.perf_counter() - start) * 1000.0
    return report


def membership_influence(spectrum: SpectrumList, sensitive: int) -> float:
    """Spectral mass on subsets containing the sensitive coordinate, in [0, 1]."""
    if sensitive < 1:
        raise InvalidParameterError("sensitive coordinate must be >= 1")
    bit = 1 << (sensitive - 1)
    mass = sum(e.square for e in spectrum if e.subset & bit)
    return float(np.clip(mass, 0.0, 1.0))


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _assemble_parity_report(
    prop: PropertySpec,
    alpha: float,
    g_plus: float,
    g_minus: float,
    queries: int,
    flags: list[str],
    details: dict[str, float],
    spectrum: SpectrumList | None,
    delta: float | None,
) -> AuditReport:
    """Build the quadratic from group rates and report its gap root.

    With rates estimated jointly, p = alpha g+ + (1-alpha) g- and
    inf_a = g+ + g- - 2 g+ g-, and |g+ - g-| is exactly a nonnegative root
    of the quadratic, so it is reported as the estimate. Rates may arrive
    slightly outside [0, 1] from spectral reconstruction noise; the gap is
    taken before clamping because the reconstruction noise on the mean
    label cancels in the difference, while clamping one boundary rate
    would push that noise back in. The quadratic is assembled with the
    advantaged group on the +1 side (swapping alpha for 1-alpha leaves p
    and inf_a unchanged and negates the roots) and its generic solve is
    carried as a cross-check companion.
    """
    p = _clamp01(alpha * g_plus + (1.0 - alpha) * g_minus)
    inf_a = _clamp01(g_plus + g_minus - 2.0 * g_plus * g_minus)
    oriented_alpha = alpha if g_plus >= g_minus else 1.0 - alpha
    quad = GFQuadratic(alpha=oriented_alpha, p=p, inf_a=inf_a)
    value = _clamp01(abs(g_plus - g_minus))
    solver_value, clamp_flags = _gf_root(quad)
    details = dict(details)
    details.update(
        {
            "alpha": alpha,
            "alpha_oriented": oriented_alpha,
            "p": p,
            "inf_a": inf_a,
            "g_plus": _clamp01(g_plus),
            "g_minus": _clamp01(g_minus),
        }
    )
    return AuditReport(
        property=prop,
        method="AFA",
        estimate=value,
        companions={"quadratic_root": solver_value},
        details=details,
        flags=flags + clamp_flags,
        queries_used=queries,
        delta=delta,
        spectrum=spectrum,
    )


def estimate_statistical_parity(
    model: ModelOracle,
    dist: DistributionSpec,
    sensitive: int,
    tau: float,
    delta: float,
    budget: AuditBudget | int | None = None,
    rng: RandomSource | int | None = None,
) -> AuditReport:
    """Group-rate gap via a restricted coefficient search.

    Runs the search restricted to subsets containing the sensitive coordinate,
    reads the mean label (empty-set coefficient) and the signed singleton
    coefficient off the leaf pools, reconstructs both group-conditional
    positive rates, and solves the quadratic. Under Uniform the root equals
    the singleton coefficient's magnitude; that shortcut is reported as a
    cross-check companion.
    """
    if isinstance(dist, Empirical):
        raise InvalidParameterError(
            "the restricted search needs independent coordinates; "
            "use exact_oracle.exact_property for Empirical distributions"
        )
    n = dist.n
    if not 1 <= sensitive <= n:
        raise InvalidParameterError(f"sensitive coordinate {sensitive} out of range")
    alpha = group_probability(dist, sensitive)
    if not 0.0 < alpha < 1.0:
        raise DegenerateGroupError(
            f"group x_{sensitive}=1 has probability {alpha}; both groups must occur"
        )
    if isinstance(budget, int):
        budget = AuditBudget(budget)
    rng = as_random_source(rng)
    start = time.perf_counter()

    spectrum, diag = _gl_search(
        model, dist, tau, delta, budget=budget, rng=rng, restrict_to=sensitive
    )
    queries = spectrum.queries_used
    flags = ["incomplete"] if spectrum.incomplete else []

    if diag.leaf_samples > 0:
        h_empty = diag.mean_label
        mean_samples = 2 * diag.leaf_samples
    else:
        # search died before the leaf pools: buy a standalone mean estimate
        m = MEAN_POOL_CAP
        if budget is not None:
            m = min(m, budget.remaining)
            if m < 1:
                raise PartialEstimateError(
                    "budget too small to estimate the mean label",
                    samples_completed=queries,
                )
            budget.charge(m)
        xs = sample(dist, rng.split(), m)
        h_empty = float(np.mean(model.query_batch(xs).astype(np.float64)))
        mean_samples = m
        queries += m

    bit = 1 << (sensitive - 1)
    in_list = any(e.subset == bit for e in spectrum)
    coef_a = diag.signed.get(bit, 0.0) if in_list else 0.0

    beta = float(dist_biases(dist)[sensitive - 1])
    sigma = math.sqrt(max(0.0, 1.0 - beta * beta))
    psi_plus = (1.0 - beta) / sigma
    psi_minus = -(1.0 + beta) / sigma
    g_plus = (1.0 + h_empty + coef_a * psi_plus) / 2.0
    g_minus = (1.0 + h_empty + coef_a * psi_minus) / 2.0

    details: dict[str, float] = {
        "h_empty": h_empty,
        "coef_sensitive": coef_a,
        "mean_samples": float(mean_samples),
        "tau": tau,
        "delta": delta,
        "influence_mass": membership_influence(spectrum, sensitive),
    }
    report = _assemble_parity_report(
        StatisticalParity(sensitive), alpha, g_plus, g_minus,
        queries, flags, details, spectrum, delta,
    )
    if beta == 0.0:
        report.companions["uniform_shortcut"] = abs(coef_a)
    report.wall_ms = (time.perf_counter() - start) * 1000.0
    return report


def _pair_group_rates(
    model: ModelOracle,
    dist: DistributionSpec,
    labels: tuple[int, int],
    sensitive: int,
    draws: int,
    rng: RandomSource,
    budget: AuditBudget | None,
) -> tuple[float, float, float, int] | None:
    """Rejection-sample the domain where the model emits one of two labels.

    Returns (alpha, g+, g-) for the restricted binary function that maps the
    first label to +1 and the second to -1, plus queries spent, or None when
    either group never shows up in the restricted support.
    """
    keep_hi, keep_lo = labels
    bit_col = sensitive - 1
    counts = {(+1, +1): 0, (+1, -1): 0, (-1, +1): 0, (-1, -1): 0}
    spent = 0
    chunk = 2048
    while spent < draws:
        take = min(chunk, draws - spent)
        xs = sample(dist, rng.split(), take)
        try:
            ys = model.query_batch(xs, budget)
        except BudgetExceededError:
            break
        spent += take
        for grp in (+1, -1):
            in_group = xs[:, bit_col] == grp
            counts[(grp, +1)] += int(np.sum(in_group & (ys == keep_hi)))
            counts[(grp, -1)] += int(np.sum(in_group & (ys == keep_lo)))
    total_plus = counts[(+1, +1)] + counts[(+1, -1)]
    total_minus = counts[(-1, +1)] + counts[(-1, -1)]
    if total_plus == 0 or total_minus == 0:
        return None
    g_plus = counts[(+1, +1)] / total_plus
    g_minus = counts[(-1, +1)] / total_minus
    alpha = total_plus / (total_plus + total_minus)
    return alpha, g_plus, g_minus, spent


def estimate_multiclass_sp(
    model: ModelOracle,
    dist: DistributionSpec,
    sensitive: int,
    tau: float,
    delta: float,
    budget: AuditBudget | int | None = None,
    rng: RandomSource | int | None = None,
) -> AuditReport:
    """Max group-rate gap over pairwise label restrictions of a K-ary model.

    Each unordered label pair restricts the domain to points receiving one of
    the two labels (rejection sampling against the oracle), recodes them to a
    binary function, and solves the same quadratic from directly estimated
    conditional rates. Pairs whose restricted support misses a group are
    skipped with a warning; if every pair is skipped there is no estimand.
    """
    if model.arity < 3:
        raise InvalidParameterError(
            f"multiclass parity needs >= 3 labels, got {model.arity}"
        )
    n = dist.n
    if not 1 <= sensitive <= n:
        raise InvalidParameterError(f"sensitive coordinate {sensitive} out of range")
    if not 0.0 < tau <= 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1], got {tau}")
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError(f"delta must lie in (0, 1), got {delta}")
    if isinstance(budget, int):
        budget = AuditBudget(budget)
    rng = as_random_source(rng)
    start = time.perf_counter()

    k = model.arity
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    per_pair = None
    if budget is not None:
        per_pair = max(1, budget.remaining // len(pairs))
    draws_default = 20000

    best: AuditReport | None = None
    best_pair: tuple[int, int] | None = None
    pair_values: dict[str, float] = {}
    skipped: list[str] = []
    queries = 0
    for pair in pairs:
        draws = per_pair if per_pair is not None else draws_default
        rates = _pair_group_rates(model, dist, pair, sensitive, draws, rng.split(), budget)
        tag = f"{pair[0]}v{pair[1]}"
        if rates is None:
            skipped.append(tag)
            warnings.warn(
                f"label pair {pair} skipped: a sensitive group never appears "
                "in its restricted support",
                stacklevel=2,
            )
            continue
        alpha, g_plus, g_minus, spent = rates
        queries += spent
        if not 0.0 < alpha < 1.0:
            skipped.append(tag)
            continue
        sub = _assemble_parity_report(
            Multicalibration(sensitive), alpha, g_plus, g_minus,
            spent, [], {}, None, delta,
        )
        pair_values[tag] = sub.estimate
        if best is None or sub.estimate > best.estimate:
            best, best_pair = sub, pair
    if best is None or best_pair is None:
        raise NoValidPairError(
            "every label pair was skipped; no restricted domain has both groups"
        )
    details = {f"pair_{tag}": value for tag, value in sorted(pair_values.items())}
    details.update({"tau": tau, "delta": delta})
    report = AuditReport(
        property=Multicalibration(sensitive),
        method="AFA",
        estimate=best.estimate,
        companions={
            "arg_pair_low": float(best_pair[0]),
            "arg_pair_high": float(best_pair[1]),
        },
        details=details,
        flags=[f"skipped:{tag}" for tag in skipped],
        queries_used=queries,
        delta=delta,
    )
    report.wall_ms = (time.perf_counter() - start) * 1000.0
    return report
