"""Sample-size calculators and the manipulation-proof spectrum family.

The sample sizes answer "how many queries buy an (epsilon, delta) estimate"
for each property kind. The manipulation-proof family shows why parity
audits resist gaming: every spectrum that agrees with a reference on the
empty set and on every subset containing the sensitive coordinate yields
byte-identical quadratic inputs, hence the identical parity value, no matter
how the remaining coefficients are signed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .basis import ExactSpectrum
from .core import RandomSource, as_random_source
from .errors import DegenerateGroupError, InvalidParameterError
from .estimators import GFQuadratic

KIND_CHARACTERISTIC = "characteristic"  # robustness / individual fairness
KIND_PARITY = "parity"                  # statistical parity / multicalibration
GF_SAMPLE_CONSTANT = 1.0  # explicit choice; the bound's constant is unspecified


@dataclass(frozen=True)
class SampleSizeQuery:
    """Inputs of the sample-size bounds.

    ``char_covered`` is the characteristic mass on the recovered list and
    ``char_rest`` the mass on its complement; both are ignored for the
    parity kind.
    """

    kind: str
    epsilon: float
    delta: float
    char_covered: float = 1.0
    char_rest: float = 0.0

    def __post_init__(self):
        if self.kind not in (KIND_CHARACTERISTIC, KIND_PARITY):
            raise InvalidParameterError(
                f"kind must be {KIND_CHARACTERISTIC!r} or {KIND_PARITY!r}, "
                f"got {self.kind!r}"
            )
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParameterError(
                f"epsilon must lie in (0, 1), got {self.epsilon}"
            )
        if not 0.0 < self.delta <= 1.0:
            raise InvalidParameterError(f"delta must lie in (0, 1], got {self.delta}")
        if self.char_covered < 0.0 or self.char_rest < 0.0:
            raise InvalidParameterError("characteristic masses must be >= 0")


def sample_size(q: SampleSizeQuery) -> int:
    """Queries sufficient for an (epsilon, delta) estimate, floored at 1.

    Characteristic kind: ceil(8 sqrt(2) charL (1 - 4 charLbar) / epsilon
    * sqrt(ln(2/delta))). Parity kind: ceil(ln(4/delta) / epsilon^2) with
    an explicit constant of 1.
    """
    if q.kind == KIND_CHARACTERISTIC:
        raw = (
            8.0 * math.sqrt(2.0)
            * q.char_covered
            * (1.0 - 4.0 * q.char_rest)
            / q.epsilon
            * math.sqrt(math.log(2.0 / q.delta))
        )
    else:
        raw = GF_SAMPLE_CONSTANT / (q.epsilon * q.epsilon) * math.log(4.0 / q.delta)
    return max(1, math.ceil(raw))


def reconstruction_gap_bound(disagreement: float, alpha: float) -> float:
    """Parity error budget bought by reconstruction accuracy.

    If a surrogate disagrees with the audited model on a ``disagreement``
    fraction of the domain, the two parity values differ by at most
    disagreement / min(alpha, 1 - alpha), capped at 1.
    """
    if not 0.0 <= disagreement <= 1.0:
        raise InvalidParameterError(
            f"disagreement must lie in [0, 1], got {disagreement}"
        )
    if alpha in (0.0, 1.0):
        raise DegenerateGroupError("group balance 0 or 1 leaves no gap to bound")
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return min(1.0, disagreement / min(alpha, 1.0 - alpha))


@dataclass(frozen=True)
class MPSubclassMember:
    """One spectrum of the manipulation-proof family.

    ``coefficients`` maps subset masks to coefficient values; ``flipped``
    records which free subsets had their sign inverted relative to the
    reference.
    """

    coefficients: dict[int, float]
    flipped: frozenset[int] = field(default_factory=frozenset)


def free_subsets(n: int, sensitive: int) -> list[int]:
    """Masks that parity audits cannot pin down: nonempty and avoiding A."""
    if not 1 <= sensitive <= n:
        raise InvalidParameterError(f"sensitive coordinate {sensitive} out of range")
    bit = 1 << (sensitive - 1)
    return [mask for mask in range(1, 1 << n) if not mask & bit]


def mp_subclass(
    reference: ExactSpectrum,
    sensitive: int,
    count: int,
    rng: RandomSource | int | None = None,
) -> list[MPSubclassMember]:
    """Distinct sign-flip variants of a reference spectrum.

    The first member is always the reference itself (empty flip pattern);
    the rest flip a random distinct pattern of free coefficients each.
    Constrained coefficients (empty set, any subset containing the sensitive
    coordinate) are copied verbatim.
    """
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    n = reference.n
    free = free_subsets(n, sensitive)
    limit = 1 << len(free) if len(free) < 63 else None
    if limit is not None and count > limit:
        raise InvalidParameterError(
            f"count {count} exceeds the {limit} distinct flip patterns "
            f"on {len(free)} free subsets"
        )
    rng = as_random_source(rng)
    gen = rng.generator()
    base = {mask: float(reference.coefficient(mask)) for mask in range(1 << n)}

    patterns: list[frozenset[int]] = [frozenset()]
    seen = {frozenset()}
    while len(patterns) < count:
        picks = gen.random(len(free)) < 0.5
        pattern = frozenset(mask for mask, hit in zip(free, picks) if hit)
        if pattern in seen:
            continue
        seen.add(pattern)
        patterns.append(pattern)

    members = []
    for pattern in patterns:
        coeffs = dict(base)
        for mask in pattern:
            coeffs[mask] = -coeffs[mask]
        members.append(MPSubclassMember(coefficients=coeffs, flipped=pattern))
    return members


def quadratic_inputs(
    coefficients: dict[int, float], sensitive: int, alpha: float
) -> GFQuadratic:
    """Parity-quadratic inputs read off a coefficient map.

    The positive rate comes from the empty-set coefficient, p = (1 + c0) / 2;
    the influence is the squared mass on subsets containing the sensitive
    coordinate. Members of one manipulation-proof family produce bit-equal
    inputs because only constrained coefficients enter.
    """
    if sensitive < 1:
        raise InvalidParameterError("sensitive coordinate must be >= 1")
    bit = 1 << (sensitive - 1)
    c0 = coefficients.get(0, 0.0)
    p = (1.0 + c0) / 2.0
    inf_a = 0.0
    for mask in sorted(coefficients):
        if mask & bit:
            c = coefficients[mask]
            inf_a += c * c
    p = min(1.0, max(0.0, p))
    inf_a = min(1.0, max(0.0, inf_a))
    return GFQuadratic(alpha=alpha, p=p, inf_a=inf_a)
