"""Orthonormal parity bases under a distribution, and exact Fourier spectra.

Under Uniform the basis is the raw parities chi_S. Under a Product
distribution the Gram-Schmidt result has the closed form
psi_S(x) = prod_{i in S} (x_i - beta_i) / sqrt(1 - beta_i^2), because the
fixed enumeration order (cardinality, then mask) processes every proper
subset of S first and the centered factors are already orthogonal. Empirical
distributions get a numeric Gram-Schmidt over their support, with expansions
over chi tracked sparsely; directions that collapse (residual squared norm
below VANISHING_THRESHOLD) are flagged as the zero function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    DistributionSpec,
    Empirical,
    Product,
    Uniform,
    dist_biases,
    enumerate_points,
    subset_order,
)
from .errors import (
    InvalidDistributionError,
    InvalidParameterError,
    OracleError,
    TransportError,
)

GRAM_SCHMIDT_MAX_N = 14
SPECTRUM_MAX_N = 12
VANISHING_THRESHOLD = 1e-10
RECONSTRUCTION_TOLERANCE = 1e-9


def parity_eval(mask: int, x: np.ndarray) -> int:
    """chi_S(x) = prod_{i in S} x_i; +1 for the empty set."""
    return int(parity_eval_batch(mask, np.asarray(x).reshape(1, -1))[0])


def parity_eval_batch(mask: int, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs)
    if mask == 0:
        return np.ones(xs.shape[0], dtype=np.int8)
    cols = [i for i in range(xs.shape[1]) if (mask >> i) & 1]
    return xs[:, cols].prod(axis=1, dtype=np.int64).astype(np.int8)


def _chi_table(points: np.ndarray, n: int) -> np.ndarray:
    """Values of every chi_S on the given points: (2^n, len(points)) floats."""
    k = points.shape[0]
    table = np.empty((1 << n, k), dtype=np.float64)
    table[0] = 1.0
    for mask in range(1, 1 << n):
        low = mask & (-mask)
        table[mask] = table[mask ^ low] * points[:, low.bit_length() - 1]
    return table


@dataclass
class OrthonormalBasis:
    """psi_S expansions over raw parities, plus evaluation helpers.

    ``expansion(S)`` returns {chi-mask: coefficient}; ``zero_flags`` names the
    masks whose psi is the zero function (degenerate distributions).
    """

    n: int
    dist: DistributionSpec
    kind: str  # "product" (covers uniform) or "empirical"
    biases: np.ndarray | None = None
    sigmas: np.ndarray | None = None
    _expansions: dict[int, dict[int, float]] = field(default_factory=dict, repr=False)
    zero_flags: frozenset[int] = frozenset()
    support_values: np.ndarray | None = field(default=None, repr=False)

    def is_zero(self, mask: int) -> bool:
        return mask in self.zero_flags

    def expansion(self, mask: int) -> Mapping[int, float]:
        if mask in self._expansions:
            return self._expansions[mask]
        if self.kind != "product":
            return {}  # vanished empirical direction
        if self.is_zero(mask):
            exp: dict[int, float] = {}
        else:
            exp = {mask: 1.0}
            scale = 1.0
            for i in range(self.n):
                if not (mask >> i) & 1:
                    continue
                scale /= self.sigmas[i]
                beta = self.biases[i]
                if beta == 0.0:
                    continue
                # multiply the running product by (chi_i - beta)
                nxt: dict[int, float] = {}
                for t, c in exp.items():
                    nxt[t] = nxt.get(t, 0.0) + c  # keeps the chi_i factor
                    nxt[t ^ (1 << i)] = nxt.get(t ^ (1 << i), 0.0) - c * beta
                exp = nxt
            exp = {t: c * scale for t, c in exp.items() if c != 0.0}
        self._expansions[mask] = exp
        return exp

    def psi_batch(self, mask: int, xs: np.ndarray) -> np.ndarray:
        """Evaluate psi_S on a batch of points (any points, not only support)."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim == 1:
            xs = xs.reshape(1, -1)
        if self.is_zero(mask):
            return np.zeros(xs.shape[0])
        if self.kind == "product":
            out = np.ones(xs.shape[0])
            for i in range(self.n):
                if (mask >> i) & 1:
                    out *= (xs[:, i] - self.biases[i]) / self.sigmas[i]
            return out
        out = np.zeros(xs.shape[0])
        for t, c in self.expansion(mask).items():
            out += c * parity_eval_batch(t, xs).astype(np.float64)
        return out

    def as_table(self) -> dict[int, dict[int, float]]:
        """Materialized expansion table in the fixed enumeration order."""
        return {mask: dict(self.expansion(mask)) for mask in subset_order(self.n)}


def gram_schmidt_basis(dist: DistributionSpec, n: int | None = None) -> OrthonormalBasis:
    """Orthonormal basis under ``dist`` in the fixed (cardinality, mask) order."""
    if n is None:
        n = dist.n
    if n != dist.n:
        raise InvalidParameterError(f"dimension {n} does not match distribution {dist.n}")
    if n > GRAM_SCHMIDT_MAX_N:
        raise InvalidParameterError(
            f"basis construction enumerates the support; n <= {GRAM_SCHMIDT_MAX_N} required"
        )
    if isinstance(dist, (Uniform, Product)):
        biases = dist_biases(dist)
        sigmas = np.sqrt(np.maximum(0.0, 1.0 - biases**2))
        degenerate = [i for i in range(n) if sigmas[i] < np.sqrt(VANISHING_THRESHOLD)]
        zero = frozenset(
            mask for mask in range(1 << n) if any((mask >> i) & 1 for i in degenerate)
        )
        return OrthonormalBasis(
            n=n, dist=dist, kind="product", biases=biases, sigmas=sigmas, zero_flags=zero
        )
    if dist.points.shape[0] == 0:  # unreachable through the public constructor
        raise InvalidDistributionError("empirical distribution has empty support")
    return _empirical_gram_schmidt(dist, n)


def _empirical_gram_schmidt(dist: Empirical, n: int) -> OrthonormalBasis:
    support = dist.points.astype(np.float64)
    w = dist.weights
    chi = _chi_table(support, n)
    values = np.zeros(((1 << n), support.shape[0]))
    expansions: dict[int, dict[int, float]] = {}
    zero: set[int] = set()
    basis_rows: list[int] = []
    for mask in subset_order(n):
        v = chi[mask].copy()
        exp = {mask: 1.0}
        for _ in range(2):  # second pass keeps orthogonality at 1e-9
            if basis_rows:
                b_vals = values[basis_rows]
                coefs = b_vals @ (w * v)
                v -= coefs @ b_vals
                for row, c in zip(basis_rows, coefs):
                    if c == 0.0:
                        continue
                    for t, e in expansions[row].items():
                        exp[t] = exp.get(t, 0.0) - c * e
        norm_sq = float(w @ (v * v))
        if norm_sq < VANISHING_THRESHOLD:
            zero.add(mask)
            continue
        norm = np.sqrt(norm_sq)
        values[mask] = v / norm
        expansions[mask] = {t: c / norm for t, c in exp.items() if c != 0.0}
        basis_rows.append(mask)
    return OrthonormalBasis(
        n=n,
        dist=dist,
        kind="empirical",
        _expansions=expansions,
        zero_flags=frozenset(zero),
        support_values=values,
    )


@dataclass
class ExactSpectrum:
    """All 2^n coefficients of a model under a basis, indexed by mask."""

    n: int
    coefficients: np.ndarray
    basis: OrthonormalBasis
    max_reconstruction_error: float = 0.0

    def coefficient(self, mask: int) -> float:
        return float(self.coefficients[mask])

    def squared(self, mask: int) -> float:
        return float(self.coefficients[mask] ** 2)

    def parseval_total(self) -> float:
        return float(np.sum(self.coefficients**2))

    def nonzero(self, tol: float = 1e-12) -> dict[int, float]:
        out = {}
        for mask in subset_order(self.n):
            c = float(self.coefficients[mask])
            if abs(c) > tol:
                out[mask] = c
        return out

    def bucket_weight(self, prefix: int, depth: int) -> float:
        """Exact W for the bucket of subsets extending ``prefix`` past ``depth``."""
        low = (1 << depth) - 1
        masks = np.arange(1 << self.n)
        members = (masks & low) == (prefix & low)
        return float(np.sum(self.coefficients[members] ** 2))


def _labels_by_chunks(model, xs: np.ndarray, budget=None, chunk: int = 4096) -> np.ndarray:
    out = np.empty(xs.shape[0], dtype=np.int64)
    done = 0
    try:
        for start in range(0, xs.shape[0], chunk):
            block = xs[start : start + chunk]
            out[start : start + block.shape[0]] = model.query_batch(block, budget)
            done += block.shape[0]
    except TransportError as exc:
        raise OracleError(
            f"oracle failed after {done + exc.acknowledged} of {xs.shape[0]} points: {exc}",
            points_labeled=done + exc.acknowledged,
        ) from exc
    return out


def exact_fourier_spectrum(
    model,
    dist: DistributionSpec,
    basis: OrthonormalBasis | None = None,
    budget=None,
    verify: bool = True,
) -> ExactSpectrum:
    """Full spectrum by enumeration; n <= 12.

    For Uniform/Product the coefficients come from n per-coordinate
    contraction passes over the full truth table (O(n 2^n)); for Empirical
    they are weighted sums over the support.
    """
    n = model.n
    if n != dist.n:
        raise InvalidParameterError("model and distribution dimensions differ")
    if n > SPECTRUM_MAX_N:
        raise InvalidParameterError(f"exact spectra require n <= {SPECTRUM_MAX_N}")
    if getattr(model, "arity", 2) != 2:
        raise InvalidParameterError("exact spectra are defined for binary (+-1) models")
    if basis is None:
        basis = gram_schmidt_basis(dist)

    if basis.kind == "product":
        xs = enumerate_points(n)
        h = _labels_by_chunks(model, xs, budget).astype(np.float64)
        coeffs = _product_transform(h, basis)
        recon_pts = xs
        target = h
        weights = None
    else:
        support = dist.points
        h = _labels_by_chunks(model, support, budget).astype(np.float64)
        coeffs = basis.support_values @ (dist.weights * h)
        recon_pts = support
        target = h
        weights = dist.weights

    err = 0.0
    if verify:
        if basis.kind == "product":
            recon = _product_reconstruct(coeffs, basis)
        else:
            recon = basis.support_values.T @ coeffs
        err = float(np.max(np.abs(recon - target))) if target.size else 0.0
    spec = ExactSpectrum(n=n, coefficients=coeffs, basis=basis, max_reconstruction_error=err)
    return spec


def _psi_endpoints(basis: OrthonormalBasis) -> tuple[np.ndarray, np.ndarray]:
    safe = np.where(basis.sigmas > 0, basis.sigmas, 1.0)
    psi_plus = np.where(basis.sigmas > 0, (1.0 - basis.biases) / safe, 0.0)
    psi_minus = np.where(basis.sigmas > 0, (-1.0 - basis.biases) / safe, 0.0)
    return psi_plus, psi_minus


def _product_transform(h_table: np.ndarray, basis: OrthonormalBasis) -> np.ndarray:
    """h values on enumerate_points(n) -> coefficients indexed by mask.

    Per-coordinate contraction: index bit i of the input distinguishes
    x_i = +1 (0) from x_i = -1 (1); the same bit of the output distinguishes
    i not in S (0) from i in S (1).
    """
    d_plus = (1.0 + basis.biases) / 2.0
    d_minus = (1.0 - basis.biases) / 2.0
    psi_plus, psi_minus = _psi_endpoints(basis)
    g = h_table.astype(np.float64)
    for i in range(basis.n):
        view = g.reshape(-1, 2, 1 << i)
        plus, minus = view[:, 0, :], view[:, 1, :]
        absent = d_plus[i] * plus + d_minus[i] * minus
        present = d_plus[i] * psi_plus[i] * plus + d_minus[i] * psi_minus[i] * minus
        g = np.stack([absent, present], axis=1).reshape(-1)
    return g


def _product_reconstruct(coeffs: np.ndarray, basis: OrthonormalBasis) -> np.ndarray:
    """Coefficients -> values on enumerate_points(n) (inverse contraction)."""
    psi_plus, psi_minus = _psi_endpoints(basis)
    g = coeffs.astype(np.float64)
    for i in range(basis.n):
        view = g.reshape(-1, 2, 1 << i)
        absent, present = view[:, 0, :], view[:, 1, :]
        val_plus = absent + psi_plus[i] * present
        val_minus = absent + psi_minus[i] * present
        g = np.stack([val_plus, val_minus], axis=1).reshape(-1)
    return g
