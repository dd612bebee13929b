"""Synthetic corrupted datasets with ground-truth bookkeeping.

Samples are mean-zero i.i.d. draws from a chosen sub-Gaussian family with a
known covariance; an adversary then replaces exactly ceil(eps n) uniformly
chosen rows. The replaced index set and the true covariance ride along in
the returned record so evaluation code can score recovery, while the
algorithms under test see only the sample matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .linalg import require_symmetric

__all__ = [
    "DistributionSpec",
    "AdversaryStrategy",
    "CorruptedDataset",
    "make_spiked_covariance",
    "sample_dataset",
    "corrupt",
    "make_corrupted_dataset",
    "pair_difference",
]

_FAMILIES = ("gaussian", "bounded-rademacher-mixture")


@dataclass(frozen=True)
class DistributionSpec:
    """A mean-zero sub-Gaussian sampling family with covariance ``covariance``.

    gaussian draws are exactly N(0, covariance). The bounded family rotates
    independent Rademacher signs through the covariance square root, giving
    the same second moment with bounded support. proxy_scale records the
    sub-Gaussian proxy multiplier (1 means the proxy equals the covariance,
    which holds for both built-in families).
    """

    covariance: np.ndarray
    family: str = "gaussian"
    proxy_scale: float = 1.0

    def __post_init__(self):
        cov = require_symmetric(self.covariance)
        lam = np.linalg.eigvalsh(cov)
        if lam[0] < -1e-10 * max(1.0, float(np.abs(lam).max())):
            raise InvalidInputError(f"covariance has negative eigenvalue {lam[0]:.6g}")
        if self.family not in _FAMILIES:
            raise InvalidInputError(f"family must be one of {_FAMILIES}, got {self.family!r}")
        if self.proxy_scale < 1.0:
            raise InvalidInputError(f"proxy_scale must be >= 1, got {self.proxy_scale}")
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def sqrt(self) -> np.ndarray:
        lam, u = np.linalg.eigh(self.covariance)
        return (u * np.sqrt(np.maximum(lam, 0.0))) @ u.T


def make_spiked_covariance(
    d: int, top: float, rest: float = 1.0, t: int = 1, family: str = "gaussian"
) -> DistributionSpec:
    """Spec with covariance rest * I plus (top - rest) on the first t axes.

    The top eigenvalue is ``top`` with multiplicity t, all others ``rest``,
    so the relative eigengap is controlled exactly. top == rest gives an
    isotropic spec.
    """
    if d < 1 or not (0.0 < rest <= top):
        raise InvalidInputError(
            f"need d >= 1 and 0 < rest <= top, got d={d}, top={top}, rest={rest}"
        )
    if not (1 <= t <= d):
        raise InvalidInputError(f"spike count t must be in [1, d], got {t}")
    cov = rest * np.eye(d)
    for j in range(t):
        cov[j, j] = top
    return DistributionSpec(covariance=cov, family=family)


def _sample_rows(spec: DistributionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    root = spec.sqrt()
    if spec.family == "gaussian":
        z = rng.standard_normal((n, spec.dim))
    else:
        z = rng.integers(0, 2, size=(n, spec.dim)).astype(np.float64) * 2.0 - 1.0
    return z @ root.T


def sample_dataset(spec: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """n i.i.d. mean-zero rows with covariance spec.covariance, deterministic
    per seed."""
    if n < 1:
        raise InvalidInputError(f"n must be at least 1, got {n}")
    return _sample_rows(spec, n, np.random.default_rng(seed))


@dataclass(frozen=True)
class AdversaryStrategy:
    """How the replaced rows are constructed.

    direction-spike plants magnitude * unit(v) at every bad index;
    clustered-copies plants verbatim copies of one point; mirror-good
    negates the existing row scaled by ``scale`` (second moments are
    preserved at scale 1, making this adversary invisible to covariance
    methods); none records the index draw without touching the data.
    """

    kind: str
    direction: Optional[np.ndarray] = None
    magnitude: float = 0.0
    point: Optional[np.ndarray] = None
    scale: float = 1.0

    @classmethod
    def direction_spike(cls, direction, magnitude: float) -> "AdversaryStrategy":
        v = np.asarray(direction, dtype=np.float64)
        nrm = float(np.linalg.norm(v))
        if v.ndim != 1 or nrm == 0.0 or not np.all(np.isfinite(v)):
            raise InvalidInputError("spike direction must be a finite nonzero vector")
        return cls(kind="direction-spike", direction=v / nrm, magnitude=float(magnitude))

    @classmethod
    def clustered_copies(cls, point) -> "AdversaryStrategy":
        pt = np.asarray(point, dtype=np.float64)
        if pt.ndim != 1 or not np.all(np.isfinite(pt)):
            raise InvalidInputError("cluster point must be a finite vector")
        return cls(kind="clustered-copies", point=pt)

    @classmethod
    def mirror_good(cls, scale: float = 1.0) -> "AdversaryStrategy":
        if not math.isfinite(scale):
            raise InvalidInputError("mirror scale must be finite")
        return cls(kind="mirror-good", scale=float(scale))

    @classmethod
    def none(cls) -> "AdversaryStrategy":
        return cls(kind="none")


@dataclass
class CorruptedDataset:
    """Samples plus evaluation-only ground truth. bad_indices is sorted;
    rows outside it are bitwise identical to the clean draw."""

    samples: np.ndarray
    bad_indices: np.ndarray
    eps: float
    seed: int
    strategy_kind: str
    covariance: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def good_indices(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n), self.bad_indices)


def _corrupt_rows(
    samples: np.ndarray,
    eps: float,
    strategy: AdversaryStrategy,
    rng: np.random.Generator,
    seed: int,
    covariance: Optional[np.ndarray],
) -> CorruptedDataset:
    n, d = samples.shape
    if not (0.0 <= eps < 1.0):
        raise InvalidInputError(f"eps must lie in [0, 1), got {eps}")
    b_count = int(math.ceil(eps * n))
    if b_count >= n:
        raise InvalidInputError(f"ceil(eps n) = {b_count} leaves no good samples out of {n}")
    out = samples.copy()
    bad = np.sort(rng.choice(n, size=b_count, replace=False)) if b_count else np.zeros(0, dtype=np.intp)

    if strategy.kind == "direction-spike":
        if strategy.direction.shape != (d,):
            raise InvalidInputError("spike direction dimension does not match the data")
        out[bad] = strategy.magnitude * strategy.direction
    elif strategy.kind == "clustered-copies":
        if strategy.point.shape != (d,):
            raise InvalidInputError("cluster point dimension does not match the data")
        out[bad] = strategy.point
    elif strategy.kind == "mirror-good":
        out[bad] = -strategy.scale * samples[bad]
    elif strategy.kind != "none":
        raise InvalidInputError(f"unknown adversary kind {strategy.kind!r}")

    return CorruptedDataset(
        samples=out, bad_indices=bad.astype(np.intp), eps=eps, seed=seed,
        strategy_kind=strategy.kind, covariance=covariance,
    )


def corrupt(
    samples,
    eps: float,
    strategy: AdversaryStrategy,
    seed: int,
    covariance: Optional[np.ndarray] = None,
) -> CorruptedDataset:
    """Replace exactly ceil(eps n) uniformly chosen rows per the strategy.

    Index choice is uniform rather than worst-case; none of the algorithms
    inspect index identity, so this loses no generality for evaluation.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError(f"samples must be 2d, got shape {x.shape}")
    return _corrupt_rows(x, eps, strategy, np.random.default_rng(seed), seed, covariance)


def make_corrupted_dataset(
    spec: DistributionSpec,
    n: int,
    eps: float,
    strategy: AdversaryStrategy,
    seed: int,
) -> CorruptedDataset:
    """Sample and corrupt in one deterministic stream from one seed."""
    rng = np.random.default_rng(seed)
    clean = _sample_rows(spec, n, rng)
    return _corrupt_rows(clean, eps, strategy, rng, seed, spec.covariance)


def pair_difference(samples) -> np.ndarray:
    """Pair consecutive rows and subtract, for data whose mean may be nonzero.

    Halves n (dropping a trailing odd row) and doubles the covariance; the
    result is mean-zero whenever rows are i.i.d.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InvalidInputError("need at least two rows to pair")
    m = (x.shape[0] // 2) * 2
    return x[0:m:2] - x[1:m:2]
