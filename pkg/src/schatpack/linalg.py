"""Spectral primitives: Schatten norms, dual witnesses, power iteration.

All matrix arguments are dense symmetric float64 arrays. Inputs that are
symmetric only up to roundoff are resymmetrized on entry; anything worse
raises :class:`~schatpack.errors.InvalidInputError`. Operators that never
materialize a matrix (weighted Gram application, block power iteration)
accept a callable ``apply(v) -> ndarray`` instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailureError,
    DegenerateInputError,
    InvalidInputError,
)

__all__ = [
    "symmetrize",
    "require_symmetric",
    "schatten_norm",
    "schatten_dual_witness",
    "SpectralDecomposition",
    "spectral_decomposition",
    "simultaneous_power_iteration",
    "weighted_gram_apply",
]

_SYM_TOL = 1e-10
_SIGN_TOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the symmetric part (m + m.T) / 2 as a float64 array."""
    m = np.asarray(m, dtype=np.float64)
    return (m + m.T) / 2.0


def require_symmetric(m, tol: float = _SYM_TOL) -> np.ndarray:
    """Validate a square symmetric matrix and return its symmetrized copy.

    Raises InvalidInputError for non-square shapes, non-finite entries, or
    asymmetry beyond ``tol`` relative to the largest entry.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > tol * scale:
        raise InvalidInputError("matrix is not symmetric within tolerance")
    return symmetrize(m)


def _check_order(p) -> float:
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise InvalidInputError(f"Schatten order must satisfy p >= 1, got {p}")
    return p


def _lp_of_spectrum(lam: np.ndarray, p: float) -> float:
    """l_p norm of an eigenvalue vector, scaled against overflow."""
    a = np.abs(lam)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    if math.isinf(p):
        return top
    return top * float(np.sum((a / top) ** p)) ** (1.0 / p)


def schatten_norm(m, p) -> float:
    """Schatten-p norm: the l_p norm of the eigenvalue spectrum.

    ``p`` may be any real >= 1 or ``inf`` (spectral norm). ``p = 1`` is the
    trace norm. The spectrum is computed with a dense symmetric eigensolve,
    so this is intended for desk-scale matrices.
    """
    p = _check_order(p)
    m = require_symmetric(m)
    lam = np.linalg.eigvalsh(m)
    return _lp_of_spectrum(lam, p)


def schatten_dual_witness(m, p) -> np.ndarray:
    """Dual certificate N for the Schatten-p norm of ``m``.

    Returns a symmetric N with Schatten-q norm 1 (q the Hoelder conjugate)
    and inner product <N, m> equal to the Schatten-p norm. Built from the
    spectral decomposition: sign(lambda_j) |lambda_j|^{p-1} on the
    eigenvectors, normalized by ||m||_p^{p-1}. For p = inf the limit form is
    the signed projector onto a top eigenvector.

    Raises DegenerateInputError for the zero matrix.
    """
    p = _check_order(p)
    if p == 1.0:
        raise InvalidInputError("dual witness requires p > 1")
    m = require_symmetric(m)
    lam, vecs = np.linalg.eigh(m)
    a = np.abs(lam)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        raise DegenerateInputError("zero matrix has no dual witness")
    if math.isinf(p):
        j = int(np.argmax(a))
        v = vecs[:, j]
        return math.copysign(1.0, lam[j]) * np.outer(v, v)
    # work with the spectrum scaled by its max so large p cannot overflow
    scaled = (a / top) ** (p - 1.0)
    norm_scaled = float(np.sum((a / top) ** p)) ** ((p - 1.0) / p)
    coeff = np.sign(lam) * scaled / norm_scaled
    return symmetrize((vecs * coeff) @ vecs.T)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order with matching eigenvector columns.

    Each eigenvector is sign-normalized so that its first coordinate larger
    than 1e-12 (relative to the vector's max entry) is positive, which makes
    repeated decompositions of the same matrix comparable.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        v = out[:, j]
        big = np.abs(v) > _SIGN_TOL * max(float(np.abs(v).max()), 1e-300)
        if not big.any():
            continue
        lead = int(np.argmax(big))
        if v[lead] < 0.0:
            out[:, j] = -v
    return out


def spectral_decomposition(m) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition with deterministic ordering."""
    m = require_symmetric(m)
    lam, vecs = np.linalg.eigh(m)
    order = np.argsort(lam)[::-1]
    return SpectralDecomposition(
        eigenvalues=lam[order].copy(),
        eigenvectors=_fix_signs(vecs[:, order]),
    )


def weighted_gram_apply(samples, weights, v) -> np.ndarray:
    """Apply the weighted Gram matrix sum_i w_i x_i x_i^T to ``v`` in O(nd).

    ``samples`` is the n x d row matrix. The d x d matrix is never formed.
    """
    samples = np.asarray(samples, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if samples.ndim != 2:
        raise InvalidInputError("samples must be a 2-d array")
    n, d = samples.shape
    if weights.shape != (n,) or v.shape != (d,):
        raise InvalidInputError(
            f"shape mismatch: samples {samples.shape}, weights {weights.shape}, v {v.shape}"
        )
    return samples.T @ (weights * (samples @ v))


# ---------------------------------------------------------------------------
# simultaneous power iteration
# ---------------------------------------------------------------------------


def _block_apply(apply_a, block: np.ndarray) -> np.ndarray:
    out = np.empty_like(block)
    for j in range(block.shape[1]):
        out[:, j] = apply_a(block[:, j])
    return out


def _ritz_vectors(apply_a, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rayleigh-Ritz step: rotate an orthonormal block onto approximate
    eigenvectors, values sorted descending."""
    b = q.T @ _block_apply(apply_a, q)
    b = (b + b.T) / 2.0
    theta, u = np.linalg.eigh(b)
    order = np.argsort(theta)[::-1]
    return theta[order], q @ u[:, order]


def _power_forms(apply_a, z: np.ndarray, p: int) -> tuple[float, float]:
    """Exact z^T A^{p-1} z and z^T A^p z via repeated application."""
    u = z
    for _ in range(p - 1):
        u = apply_a(u)
    f_pm1 = float(z @ u)
    f_p = float(z @ apply_a(u))
    return f_pm1, f_p


def simultaneous_power_iteration(
    apply_a,
    dim: int,
    t: int,
    p: int,
    eps_tilde: float,
    seed: int = 0,
    c_pow: float = 10.0,
    block_pad: int = 2,
):
    """Leading-eigenspace block power iteration for a PSD operator.

    Returns ``t`` orthonormal vectors ``z_1 >= ... >= z_t`` (as columns)
    whose quadratic forms against A^p and A^{p-1} each match the true
    eigenvalue powers to relative accuracy ``eps_tilde``:

        |z_j' A^p z_j - lambda_j^p|         <= eps_tilde * lambda_j^p
        |z_j' A^{p-1} z_j - lambda_j^{p-1}| <= eps_tilde * lambda_j^{p-1}

    The block is iterated in rounds of p(p-1) applications (so the total
    exponent stays a multiple of p(p-1), which is what lets one subspace
    serve both exponents), re-orthonormalized each round, and stopped once a
    geometric extrapolation of the round-over-round change in the A^p forms
    falls below eps_tilde / 8. The application budget is capped at
    ceil(c_pow * p * log(dim) / eps_tilde); hitting the cap without
    stabilizing raises ConvergenceFailureError with the best block so far
    attached as ``partial``.

    ``block_pad`` extra columns are iterated and discarded, trading a little
    work for a smaller chance that a near-tie at position t stalls
    convergence (this is the knob that stands in for a failure-probability
    parameter).
    """
    if t < 1 or t > dim:
        raise InvalidInputError(f"need 1 <= t <= dim, got t={t}, dim={dim}")
    if p < 2 or int(p) != p:
        raise InvalidInputError(f"exponent p must be an integer >= 2, got {p}")
    p = int(p)
    if not (0.0 < eps_tilde < 1.0):
        raise InvalidInputError(f"eps_tilde must be in (0, 1), got {eps_tilde}")

    rng = np.random.default_rng(seed)
    width = min(dim, t + block_pad)
    block = rng.standard_normal((dim, width))
    block, _ = np.linalg.qr(block)

    round_applies = p * (p - 1) if p > 2 else 2 * p
    cap = math.ceil(c_pow * p * math.log(max(dim, 2)) / eps_tilde)
    applied = 0
    forms_prev = None
    change_prev = None
    best = None

    while True:
        for _ in range(round_applies):
            block = _block_apply(apply_a, block)
        applied += round_applies
        block, _ = np.linalg.qr(block)
        _, ritz = _ritz_vectors(apply_a, block)
        zs = ritz[:, :t]
        forms = np.array([_power_forms(apply_a, zs[:, j], p)[1] for j in range(t)])
        best = zs

        change = None
        if forms_prev is not None:
            scale = np.maximum(np.abs(forms), 1e-300)
            change = float(np.max(np.abs(forms - forms_prev) / scale))
            if change == 0.0:
                return zs
            if change <= eps_tilde / 8.0 and change_prev is not None and change_prev > 0.0:
                # geometric extrapolation of the remaining error
                ratio = min(change / change_prev, 0.999)
                if change * ratio / (1.0 - ratio) <= eps_tilde / 8.0:
                    return zs
        forms_prev = forms
        change_prev = change

        if applied >= cap:
            raise ConvergenceFailureError(
                f"power iteration hit its cap of {cap} applications "
                f"(last round change above eps_tilde/8)",
                partial=best,
            )
