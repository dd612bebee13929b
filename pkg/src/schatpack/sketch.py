"""Johnson-Lindenstrauss sketches for traces and packing inner products.

A sketch is a k x d Gaussian matrix Q with entries of variance 1/k, so
E[Q'Q] = I and quadratic forms through Q are unbiased trace estimators:

    Tr[M^p]        ~ sum_l q_l' M^p q_l
    <A_i, M^{p-1}> ~ sum_l (M^{(p-1)/2} q_l)' A_i (M^{(p-1)/2} q_l)

The second line is why odd p is required wherever M enters through half
powers. Operators are passed as ``apply(v) -> ndarray`` callables and are
assumed PSD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UnsupportedOrderError

__all__ = ["JlSketch", "jl_trace_estimate", "jl_inner_products"]


@dataclass(frozen=True)
class JlSketch:
    """A seeded k x d Gaussian projection with row count k."""

    k: int
    projection: np.ndarray
    seed: int

    @staticmethod
    def rows_for_accuracy(n: int, d: int, eps: float, c_jl: float = 16.0) -> int:
        """Row count ceil(c_jl * log(n d / eps) / eps^2)."""
        if n < 1 or d < 1:
            raise InvalidInputError("n and d must be positive")
        if not (0.0 < eps < 1.0):
            raise InvalidInputError(f"eps must be in (0, 1), got {eps}")
        if c_jl <= 0.0:
            raise InvalidInputError("c_jl must be positive")
        return math.ceil(c_jl * math.log(n * d / eps) / eps**2)

    @classmethod
    def from_accuracy(
        cls, d: int, n: int, eps: float, seed: int, c_jl: float = 16.0
    ) -> "JlSketch":
        return cls.with_rows(d, cls.rows_for_accuracy(n, d, eps, c_jl), seed)

    @classmethod
    def with_rows(cls, d: int, k: int, seed: int) -> "JlSketch":
        if k < 1 or d < 1:
            raise InvalidInputError("k and d must be positive")
        rng = np.random.default_rng(seed)
        proj = rng.standard_normal((k, d)) / math.sqrt(k)
        return cls(k=k, projection=proj, seed=seed)


def _half_power_block(apply_m, sketch: JlSketch, half: int) -> np.ndarray:
    """Columns M^half q_l, one per sketch row, shape d x k."""
    h = np.ascontiguousarray(sketch.projection.T)
    for _ in range(half):
        nxt = np.empty_like(h)
        for j in range(h.shape[1]):
            nxt[:, j] = apply_m(h[:, j])
        h = nxt
    return h


def jl_trace_estimate(apply_m, sketch: JlSketch, p: int) -> float:
    """Unbiased estimate of Tr[M^p] for a PSD operator, p a positive integer.

    Uses (p+1)/2 rounded applications per sketch row: the quadratic form is
    split as (M^h q)' M^r (M^h q) with h = floor(p/2), r = p - 2h.
    """
    if p < 1 or int(p) != p:
        raise InvalidInputError(f"p must be a positive integer, got {p}")
    p = int(p)
    half = p // 2
    h = _half_power_block(apply_m, sketch, half)
    if p % 2 == 0:
        return float(np.sum(h * h))
    total = 0.0
    for j in range(h.shape[1]):
        total += float(h[:, j] @ apply_m(h[:, j]))
    return total


def jl_inner_products(samples, apply_m, sketch: JlSketch, p: int) -> np.ndarray:
    """Estimates of <A_i, M^{p-1}> for every packing matrix A_i at once.

    ``samples`` is either an n x d array of rows x_i (A_i = x_i x_i') or an
    n x d x d stack of dense symmetric matrices. Odd p only: the estimator
    routes M through its half power M^{(p-1)/2}, which costs (p-1)/2
    applications per sketch row and is exact in expectation:

        E sum_l (M^{(p-1)/2} q_l)' A_i (M^{(p-1)/2} q_l) = <A_i, M^{p-1}>.
    """
    if p < 1 or int(p) != p or p % 2 == 0:
        raise UnsupportedOrderError(
            f"inner-product sketching needs odd integer p, got {p}"
        )
    p = int(p)
    samples = np.asarray(samples, dtype=np.float64)
    h = _half_power_block(apply_m, sketch, (p - 1) // 2)
    if samples.ndim == 2:
        proj = samples @ h
        return np.einsum("ik,ik->i", proj, proj)
    if samples.ndim == 3 and samples.shape[1] == samples.shape[2]:
        n, d, _ = samples.shape
        gram = h @ h.T
        return samples.reshape(n, d * d) @ gram.reshape(d * d)
    raise InvalidInputError(f"samples must be n x d or n x d x d, got {samples.shape}")
