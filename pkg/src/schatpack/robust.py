"""Robust direction recovery from eps-corrupted sub-Gaussian samples.

Two algorithms share the same contract: given n rows of which an unknown
eps fraction was replaced adversarially, return a unit direction whose true
variance is close to the largest. pca_filter is the quadratic-time
baseline: it reweights samples, repeatedly removing mass from the tail of
the current top direction until the weighted variance stops exceeding a
robust one-dimensional estimate. robust_pca_fast is the nearly-linear
path: a boxed Schatten packing solve caps every sample's weight, saturating
the corruption's influence, and candidate directions are read off a matrix
power of the weighted second moment and scored robustly.

The one-dimensional estimator both algorithms lean on is the mean of the
smallest floor((1 - 2 eps) n) squared projections. Corrupted points can
only inflate the top 2 eps n order statistics, so the trimmed mean is
stable under corruption; for Gaussian data it concentrates near a known
constant kappa(eps) times the true directional variance (about 0.623 at
eps = 0.05), and the filter's termination constant absorbs that factor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .boxed import BoxedOptimizeResult, boxed_schatten_optimize
from .errors import ConvergenceFailureError, InvalidInputError
from .linalg import simultaneous_power_iteration, weighted_gram_apply

__all__ = [
    "one_d_robust_variance",
    "downweight",
    "weighted_covariance",
    "prune_heavy_tails",
    "PcaFilterResult",
    "pca_filter",
    "RobustPcaConfig",
    "CandidateSet",
    "RobustPcaResult",
    "robust_pca_fast",
]


def _validate_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidInputError(f"samples must be a nonempty n x d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("samples contain nonfinite entries")
    return np.ascontiguousarray(x)


def _validate_eps(eps: float, n: int) -> int:
    if not (0.0 <= eps < 0.5):
        raise InvalidInputError(f"eps must lie in [0, 0.5), got {eps}")
    m = int(math.floor((1.0 - 2.0 * eps) * n))
    if m < 1:
        raise InvalidInputError(
            f"trimming 2*eps of n={n} samples leaves nothing; need (1-2 eps) n >= 1"
        )
    return m


def one_d_robust_variance(samples, direction, eps: float) -> float:
    """Trimmed second moment along a direction.

    Mean of the smallest floor((1 - 2 eps) n) values of <x_i, u>^2. No
    rescaling is applied, so for clean unit-variance Gaussian data the
    expectation is kappa(eps) < 1, not 1; callers comparing against
    untrimmed quantities must account for that factor themselves.
    """
    x = _validate_samples(samples)
    m = _validate_eps(eps, x.shape[0])
    u = np.asarray(direction, dtype=np.float64)
    if u.shape != (x.shape[1],):
        raise InvalidInputError(f"direction must have shape ({x.shape[1]},), got {u.shape}")
    proj = (x @ u) ** 2
    proj.sort()
    return float(proj[:m].mean())


def downweight(w: np.ndarray, scores: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Scale w on the given indices by (1 - score / max score).

    The highest-scoring index drops to weight zero, so repeated calls make
    strict progress. Nonpositive max score means there is nothing to blame;
    that case warns and returns w unchanged.
    """
    w = np.asarray(w, dtype=np.float64).copy()
    scores = np.asarray(scores, dtype=np.float64)
    indices = np.asarray(indices, dtype=np.intp)
    if scores.shape != indices.shape:
        raise InvalidInputError("scores and indices must align")
    if scores.size == 0 or scores.max() <= 0.0:
        warnings.warn("downweight called with no positive scores; weights unchanged")
        return w
    w[indices] = w[indices] * (1.0 - scores / scores.max())
    return w


def weighted_covariance(samples, w: np.ndarray, d_dense_cap: int = 2048) -> np.ndarray:
    """Dense second-moment matrix sum_i w_i x_i x_i'. Weights are used as
    given and not renormalized. Refuses dimensions above d_dense_cap, where
    materializing d x d is the wrong tool; apply weighted_gram_apply to
    vectors instead."""
    x = _validate_samples(samples)
    if x.shape[1] > d_dense_cap:
        raise InvalidInputError(
            f"d = {x.shape[1]} exceeds the dense cap {d_dense_cap}; "
            "use weighted_gram_apply for an O(nd) operator instead"
        )
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (x.shape[0],):
        raise InvalidInputError("w must have one entry per sample")
    m = x.T @ (x * w[:, None])
    return (m + m.T) / 2.0


def prune_heavy_tails(samples, eps: float, delta: float = 0.01, c_tail: float = 20.0):
    """Boolean keep-mask for samples whose norm is explainable by the bulk.

    The robust trace estimate sums the trimmed variance over coordinate
    directions; a sample is dropped when its squared norm exceeds
    c_tail * log(n / delta) times that estimate. Clean sub-Gaussian rows
    survive with overwhelming probability.
    """
    x = _validate_samples(samples)
    _validate_eps(eps, x.shape[0])
    if not (0.0 < delta < 1.0):
        raise InvalidInputError(f"delta must be in (0, 1), got {delta}")
    n, d = x.shape
    eye = np.eye(d)
    trace_hat = sum(one_d_robust_variance(x, eye[k], eps) for k in range(d))
    threshold = c_tail * math.log(n / delta) * trace_hat
    norms = np.einsum("ij,ij->i", x, x)
    keep = norms <= threshold
    if not keep.any():
        raise InvalidInputError(
            "tail pruning removed every sample; the scale estimate "
            f"{trace_hat:.3g} is inconsistent with the data"
        )
    return keep, trace_hat, threshold


def _warn_small_sample(n: int, d: int, eps: float, delta: float) -> None:
    """Heuristic sample-size floor 10 (d + log(1/delta)) / (eps log(1/eps))^2.

    Purely advisory: the asymptotic theory needs roughly this many samples,
    but desk-scale recovery often succeeds below it.
    """
    denom = (eps * math.log(1.0 / eps)) ** 2
    n_min = 10.0 * (d + math.log(1.0 / delta)) / denom
    if n < n_min:
        warnings.warn(
            f"n = {n} is below the heuristic floor {n_min:.0f} for d = {d}, "
            f"eps = {eps:g}; recovery quality is not guaranteed at this size"
        )


@dataclass
class PcaFilterResult:
    """Filter output. direction is unit length; weights are the final
    sub-probability weights (zeros on pruned or fully filtered samples).
    terminated distinguishes a clean certificate stop from the round cap;
    ratio is the final weighted-to-robust variance ratio along direction."""

    direction: np.ndarray
    weights: np.ndarray
    iterations: int
    terminated: bool
    ratio: float
    removed_tail: np.ndarray
    trace: List[dict] = field(default_factory=list)


def _top_eigvec(x: np.ndarray, w: np.ndarray, accuracy: float, seed: int) -> np.ndarray:
    """Power iteration for the top eigenvector of sum_i w_i x_i x_i'."""
    d = x.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    cap = int(math.ceil(12.0 / accuracy)) + 20
    rayleigh_prev = -math.inf
    calm = 0
    for _ in range(cap):
        mv = weighted_gram_apply(x, w, v)
        nrm = float(np.linalg.norm(mv))
        if nrm == 0.0:
            return v
        v = mv / nrm
        rayleigh = float(v @ weighted_gram_apply(x, w, v))
        if rayleigh - rayleigh_prev <= accuracy * max(rayleigh, 1e-300) / 8.0:
            calm += 1
            if calm >= 2:
                break
        else:
            calm = 0
        rayleigh_prev = rayleigh
    return v


def pca_filter(
    samples,
    eps: float,
    delta: float = 0.01,
    c_filter: float = 5.0,
    c_tail: float = 20.0,
    c_iter: float = 10.0,
    seed: int = 0,
    record_trace: bool = False,
) -> PcaFilterResult:
    """Soft-filtering robust PCA.

    Each round takes the top direction u of the weighted second moment and
    compares the weighted variance against the trimmed one-dimensional
    estimate along u. Inflation beyond 1 + c_filter * eps * log(1/eps)
    means corrupted mass is propping u up; the round then downweights the
    minimal suffix of the projection order statistics carrying 2 eps mass.
    Weights only ever decrease, and because the trimmed estimate ignores
    the largest projections, the removed mass is mostly corrupted. Rounds
    are capped at c_iter * d * log(n / delta); hitting the cap returns the
    best round seen with terminated=False.
    """
    x = _validate_samples(samples)
    n, d = x.shape
    _validate_eps(eps, n)
    if eps == 0.0:
        raise InvalidInputError("eps = 0 means no corruption; use a plain eigensolver")
    _warn_small_sample(n, d, eps, delta)

    keep, _, _ = prune_heavy_tails(x, eps, delta=delta, c_tail=c_tail)
    removed_tail = np.flatnonzero(~keep)
    w = np.full(n, 1.0 / n)
    w[~keep] = 0.0

    threshold = 1.0 + c_filter * eps * math.log(1.0 / eps)
    accuracy = eps * math.log(1.0 / eps) / 10.0
    cap = int(math.ceil(c_iter * d * math.log(n / delta)))

    best = None
    trace: List[dict] = []
    if record_trace:
        trace.append({"iteration": 0, "weights": w.copy()})

    rounds = 0
    while rounds < cap:
        u = _top_eigvec(x, w, accuracy, seed + rounds)
        quad = float(u @ weighted_gram_apply(x, w, u))
        sigma_rob = one_d_robust_variance(x, u, eps)
        ratio = quad / max(sigma_rob, 1e-300)
        if best is None or ratio < best[0]:
            best = (ratio, u, w.copy(), rounds)
        if record_trace:
            trace.append(
                {
                    "iteration": rounds + 1,
                    "quad": quad,
                    "sigma_robust": sigma_rob,
                    "ratio": ratio,
                    "weights": None,
                }
            )
        if quad <= threshold * sigma_rob:
            if record_trace:
                trace[-1]["weights"] = w.copy()
            return PcaFilterResult(
                direction=u, weights=w, iterations=rounds + 1, terminated=True,
                ratio=ratio, removed_tail=removed_tail, trace=trace,
            )

        taus = (x @ u) ** 2
        taus[w == 0.0] = 0.0
        order = np.argsort(taus, kind="stable")
        rev_mass = np.cumsum(w[order][::-1])[::-1]
        if rev_mass[0] < 2.0 * eps:
            warnings.warn("remaining weight mass fell below 2 eps; stopping the filter")
            break
        ell = int(np.max(np.flatnonzero(rev_mass >= 2.0 * eps)))
        suffix = order[ell:]
        # the minimal suffix overshoots 2 eps by at most one weight, and
        # weights never exceed their uniform start
        suffix_mass = float(rev_mass[ell])
        if suffix_mass > max(3.0 * eps, 2.0 * eps + 1.0 / n) + 1e-12:
            raise AssertionError(
                f"suffix mass {suffix_mass:.6g} exceeds its bound; weights were corrupted"
            )
        w = downweight(w, taus[suffix], suffix)
        if record_trace:
            trace[-1]["weights"] = w.copy()
            trace[-1]["suffix_size"] = int(suffix.size)
        rounds += 1

    ratio, u, w_best, at = best
    return PcaFilterResult(
        direction=u, weights=w_best, iterations=rounds, terminated=False,
        ratio=ratio, removed_tail=removed_tail, trace=trace,
    )


@dataclass(frozen=True)
class RobustPcaConfig:
    """Knobs for robust_pca_fast. The defaults match the analysis constants;
    candidates and block_pad only add cheap redundancy, and descend_budget
    caps each scale probe of the weight solve."""

    c_prime: float = 1.0
    c_tail: float = 20.0
    delta: float = 0.01
    c_pow: float = 10.0
    block_pad: int = 2
    candidates: int = 3
    descend_budget: Optional[int] = 20000
    seed: int = 0


@dataclass
class CandidateSet:
    """Candidate directions (rows) with their trimmed variance scores."""

    directions: np.ndarray
    scores: np.ndarray
    best: int


@dataclass
class RobustPcaResult:
    direction: np.ndarray
    weights: np.ndarray
    candidates: CandidateSet
    p: int
    eps_tilde: float
    optimize: BoxedOptimizeResult
    removed_tail: np.ndarray
    power_converged: bool


def robust_pca_fast(samples, eps: float, config: Optional[RobustPcaConfig] = None) -> RobustPcaResult:
    """Nearly-linear robust PCA via boxed Schatten packing.

    Pipeline: prune obvious tail outliers, solve for simplex weights whose
    box cap (1 + eps)^2 / n stops any eps fraction of samples from
    dominating while minimizing the Schatten p-norm of the weighted second
    moment, then extract candidate top directions from a power of that
    matrix (applied only through O(nd) sample products) and keep the one
    with the largest trimmed variance. The Schatten order grows like
    sqrt(log d / eps_tilde), large enough that the p-norm tracks the top
    eigenvalue but small enough for fast powering.
    """
    cfg = config if config is not None else RobustPcaConfig()
    x = _validate_samples(samples)
    n, d = x.shape
    _validate_eps(eps, n)
    if eps == 0.0:
        raise InvalidInputError("eps = 0 means no corruption; use a plain eigensolver")
    _warn_small_sample(n, d, eps, cfg.delta)

    keep, _, _ = prune_heavy_tails(x, eps, delta=cfg.delta, c_tail=cfg.c_tail)
    removed_tail = np.flatnonzero(~keep)
    xk = np.ascontiguousarray(x[keep])
    nk = xk.shape[0]

    eps_tilde = cfg.c_prime * eps * math.log(1.0 / eps)
    p = max(3, int(math.ceil((2.0 / 7.0) * math.sqrt(math.log(3.0 * d) / eps_tilde))))
    if p % 2 == 0:
        p += 1

    opt = boxed_schatten_optimize(
        xk, alpha=eps, eps=eps, p=p, c_box=1.0, strategy="descend",
        descend_budget=cfg.descend_budget,
    )
    wk = opt.x

    def apply_m(v: np.ndarray) -> np.ndarray:
        return weighted_gram_apply(xk, wk, v)

    t = max(1, min(d, cfg.candidates))
    power_converged = True
    try:
        zs = simultaneous_power_iteration(
            apply_m, d, t, p, eps_tilde, seed=cfg.seed, c_pow=cfg.c_pow,
            block_pad=cfg.block_pad,
        )
    except ConvergenceFailureError as err:
        zs = err.partial
        power_converged = False

    half = (p - 1) // 2
    directions = np.empty((zs.shape[1], d))
    scores = np.empty(zs.shape[1])
    for j in range(zs.shape[1]):
        y = zs[:, j]
        for _ in range(half):
            y = apply_m(y)
        nrm = float(np.linalg.norm(y))
        y = y / nrm if nrm > 0.0 else zs[:, j]
        directions[j] = y
        scores[j] = one_d_robust_variance(xk, y, eps)
    best = int(np.argmax(scores))

    weights = np.zeros(n)
    weights[keep] = wk
    return RobustPcaResult(
        direction=directions[best],
        weights=weights,
        candidates=CandidateSet(directions=directions, scores=scores, best=best),
        p=p,
        eps_tilde=eps_tilde,
        optimize=opt,
        removed_tail=removed_tail,
        power_converged=power_converged,
    )
