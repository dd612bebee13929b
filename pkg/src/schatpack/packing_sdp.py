"""Width-independent Schatten-norm packing over PSD matrices.

Given PSD matrices A_1..A_n, decide up to 1 + eps whether some simplex
weighting x keeps the Schatten p-norm of sum_i x_i A_i at most one. The
solver mirrors the l_p vector case with the gradient features replaced by
matrix inner products against Y(w) = (M(w) / ||M(w)||_p)^{p-1}.

Instances come in two physical forms: a stack of dense symmetric matrices
with shape (n, d, d), or a sample matrix with shape (n, d) whose rows x_i
stand for the rank-one matrices x_i x_i'. The rank-one form never
materializes the outer products.

Gradients are computed exactly or, in sketched mode, from fresh
Johnson-Lindenstrauss estimates per iteration of the same inner products.
The dual accumulator stays exact in both modes so a dual certificate is
always checkable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from . import _kernels
from .errors import (
    InfeasibleAfterPreprocessingError,
    InvalidInputError,
    UnsupportedOrderError,
)
from .linalg import require_symmetric
from .outcomes import CertificateReport, SolveOutcome, in_simplex
from .sketch import JlSketch, jl_inner_products, jl_trace_estimate

__all__ = [
    "MatrixInstance",
    "validate_psd_instance",
    "preprocess_spectral_bound",
    "schatten_packing_solve",
    "schatten_objective",
    "sdp_potential",
    "check_sdp_certificate",
]

_CHECK_ATOL = 1e-9
_PSD_TOL = 1e-8


def _check_schatten_order(p) -> int:
    if isinstance(p, float) and not p.is_integer():
        raise UnsupportedOrderError(
            f"Schatten packing needs an odd integer order p >= 3, got {p}"
        )
    p = int(p)
    if p < 3 or p % 2 == 0:
        raise UnsupportedOrderError(
            f"Schatten packing needs an odd integer order p >= 3, got {p}"
        )
    return p


@dataclass
class MatrixInstance:
    """Uniform view over the two instance encodings.

    Exactly one of dense (n, d, d) and samples (n, d) is set. All solver
    arithmetic goes through combine / inner_products so callers never branch
    on the encoding.
    """

    n: int
    d: int
    dense: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None

    @classmethod
    def wrap(cls, mats: Union[np.ndarray, "MatrixInstance"]) -> "MatrixInstance":
        if isinstance(mats, MatrixInstance):
            return mats
        arr = np.asarray(mats, dtype=np.float64)
        if arr.ndim == 3:
            if arr.shape[1] != arr.shape[2]:
                raise InvalidInputError(f"dense stack must be (n, d, d), got {arr.shape}")
            return cls(n=arr.shape[0], d=arr.shape[1], dense=np.ascontiguousarray(arr))
        if arr.ndim == 2:
            return cls(n=arr.shape[0], d=arr.shape[1], samples=np.ascontiguousarray(arr))
        raise InvalidInputError(
            f"instance must be an (n, d, d) stack or an (n, d) sample matrix, got ndim {arr.ndim}"
        )

    def combine(self, w: np.ndarray) -> np.ndarray:
        """sum_i w_i A_i as a dense symmetric matrix."""
        if self.dense is not None:
            m = (w @ self.dense.reshape(self.n, self.d * self.d)).reshape(self.d, self.d)
        else:
            m = self.samples.T @ (self.samples * w[:, None])
        return (m + m.T) / 2.0

    def inner_products(self, y: np.ndarray) -> np.ndarray:
        """Vector of <A_i, Y> for a symmetric Y."""
        if self.dense is not None:
            return self.dense.reshape(self.n, self.d * self.d) @ y.reshape(self.d * self.d)
        b = self.samples @ y
        return np.einsum("ij,ij->i", b, self.samples)

    def spectral_tops(self) -> np.ndarray:
        """Estimated largest eigenvalue of each A_i.

        Exact for the rank-one form. Dense matrices use seeded power
        iteration with a Rayleigh quotient, which only ever underestimates.
        """
        if self.samples is not None:
            return np.einsum("ij,ij->i", self.samples, self.samples)
        rng = np.random.default_rng(0)
        v = rng.standard_normal((self.n, self.d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        tops = np.zeros(self.n)
        for i in range(self.n):
            vi = v[i]
            for _ in range(64):
                av = self.dense[i] @ vi
                nrm = np.linalg.norm(av)
                if nrm == 0.0:
                    break
                vi = av / nrm
            tops[i] = float(vi @ (self.dense[i] @ vi))
        return tops

    def take(self, idx: np.ndarray) -> "MatrixInstance":
        if self.dense is not None:
            return MatrixInstance(n=idx.size, d=self.d, dense=np.ascontiguousarray(self.dense[idx]))
        return MatrixInstance(n=idx.size, d=self.d, samples=np.ascontiguousarray(self.samples[idx]))


def validate_psd_instance(mats, psd_tol: float = _PSD_TOL) -> MatrixInstance:
    """Check symmetry and near-positive-semidefiniteness of every matrix.

    Rank-one sample form is PSD by construction, so only finiteness is
    checked there. Returns the wrapped instance with symmetrized dense
    matrices.
    """
    inst = MatrixInstance.wrap(mats)
    if inst.n < 1 or inst.d < 1:
        raise InvalidInputError(f"instance must be nonempty, got n={inst.n}, d={inst.d}")
    if inst.samples is not None:
        if not np.all(np.isfinite(inst.samples)):
            raise InvalidInputError("sample matrix contains nonfinite entries")
        return inst
    fixed = np.empty_like(inst.dense)
    for i in range(inst.n):
        fixed[i] = require_symmetric(inst.dense[i])
        lam = np.linalg.eigvalsh(fixed[i])
        floor = -psd_tol * max(1.0, float(np.abs(lam).max()))
        if lam[0] < floor:
            raise InvalidInputError(
                f"matrix {i} has eigenvalue {lam[0]:.6g}, below the PSD tolerance {floor:.6g}"
            )
    return MatrixInstance(n=inst.n, d=inst.d, dense=np.ascontiguousarray(fixed))


def preprocess_spectral_bound(
    mats, eps: float
) -> Tuple[MatrixInstance, np.ndarray, np.ndarray]:
    """Drop matrices whose top eigenvalue exceeds n / eps.

    The spectral analogue of the LP entry bound: any near-feasible weighting
    places at most eps / n mass on such a matrix. Returns (reduced instance,
    kept indices, removed indices).
    """
    inst = MatrixInstance.wrap(mats)
    threshold = inst.n / eps
    tops = inst.spectral_tops()
    keep_mask = tops <= threshold
    kept = np.flatnonzero(keep_mask)
    removed = np.flatnonzero(~keep_mask)
    if kept.size == 0:
        raise InfeasibleAfterPreprocessingError(
            f"every matrix has spectral norm above n/eps = {threshold:g}"
        )
    return inst.take(kept), kept, removed


def schatten_objective(mats, x: np.ndarray, p) -> float:
    """Schatten p-norm of sum_i x_i A_i."""
    inst = MatrixInstance.wrap(mats)
    lam = np.linalg.eigvalsh(inst.combine(np.asarray(x, dtype=np.float64)))
    return float(_kernels.vec_pnorm(np.ascontiguousarray(np.abs(lam)), float(p)))


def sdp_potential(mats, w: np.ndarray, p) -> float:
    """||sum_i w_i A_i||_p - ||w||_1, the quantity the solver drives down."""
    w = np.asarray(w, dtype=np.float64)
    return schatten_objective(mats, w, p) - float(w.sum())


def _schatten_qnorm_dual(z_mat: np.ndarray, p: int) -> Tuple[np.ndarray, float]:
    q = p / (p - 1.0)
    lam = np.linalg.eigvalsh(z_mat)
    lam = np.maximum(lam, 0.0)
    qnorm = float(_kernels.vec_pnorm(np.ascontiguousarray(lam), q))
    return z_mat / qnorm, qnorm


def _sketched_loop(
    inst: MatrixInstance,
    p: int,
    eps: float,
    eta: float,
    t_cap: int,
    w0: np.ndarray,
    seed: int,
    c_jl: float,
    slack: float,
    record: bool,
):
    """Python-level mirror of the exact kernels with JL gradient estimates.

    The potential uses the exact norm against a slack-inflated mass term so
    it stays monotone despite estimate noise; the dual accumulator is exact.
    """
    rng = np.random.default_rng(seed)
    k = JlSketch.rows_for_accuracy(inst.n, inst.d, eps, c_jl=c_jl)
    raw = inst.samples if inst.samples is not None else inst.dense
    w = w0.copy()
    z_mat = np.zeros((inst.d, inst.d))
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 3))
    t = 0
    while True:
        m = inst.combine(w)
        l1 = float(w.sum())
        lam, u = np.linalg.eigh(m)
        lam = np.maximum(lam, 0.0)
        top = float(lam.max())
        nrm = float(_kernels.vec_pnorm(lam, float(p))) if top > 0.0 else 0.0
        if record:
            trace[t, 0] = nrm - slack * l1
            trace[t, 1] = l1
        if nrm == 0.0:
            return 5, w, z_mat, t, trace[: t + 1]
        if l1 > 1.0 / eps:
            return 0, w, z_mat, t, trace[: t + 1]
        if t >= t_cap:
            return 1, w, z_mat, t, trace[: t + 1]
        sketch = JlSketch.with_rows(inst.d, k, int(rng.integers(0, 2**63 - 1)))

        def apply_m(b, m=m):
            return m @ b

        trace_est = jl_trace_estimate(apply_m, sketch, p)
        nrm_est = max(trace_est, 1e-300) ** (1.0 / p)
        inner_est = jl_inner_products(raw, apply_m, sketch, p)
        g = np.maximum(1.0 - inner_est / nrm_est ** (p - 1.0), 0.0)
        if record:
            trace[t, 2] = float(g.max())
        ypow = (u * (lam / nrm) ** (p - 1.0)) @ u.T
        w = w * (1.0 + eta * g)
        z_mat = z_mat + ypow
        t += 1


def schatten_packing_solve(
    mats,
    eps: float,
    p,
    mode: str = "exact",
    seed: int = 0,
    c_jl: float = 16.0,
    sketch_potential_slack: Optional[float] = None,
    record_trace: bool = False,
) -> SolveOutcome:
    """Decide Schatten p-norm packing feasibility up to 1 + eps.

    mode "exact" computes gradients from an eigendecomposition each
    iteration; mode "sketched" estimates them with fresh JL projections.
    p must be an odd integer at least 3: odd orders make the matrix power
    a polynomial in M reachable by repeated application, which is what both
    the sketch and the nearly-linear PCA path rely on.
    """
    p = _check_schatten_order(p)
    if not (0.0 < eps <= 0.5):
        raise InvalidInputError(f"eps must lie in (0, 0.5], got {eps}")
    if mode not in ("exact", "sketched"):
        raise InvalidInputError(f"mode must be 'exact' or 'sketched', got {mode!r}")
    inst = MatrixInstance.wrap(mats)
    n = inst.n
    reduced, kept, removed = preprocess_spectral_bound(inst, eps)
    n_red = reduced.n
    d = reduced.d

    eta = 1.0 / p
    t_cap = int(math.ceil(4.0 * p * math.log(n_red * d / eps) / eps))
    w0 = np.full(n_red, eps / (n_red**2 * d))

    if mode == "exact":
        if reduced.samples is not None:
            xt = np.ascontiguousarray(reduced.samples.T)
            code, w, z_mat, iters, trace = _kernels.sdp_rank1_loop(
                reduced.samples, xt, float(p), eps, eta, t_cap, w0, record_trace
            )
        else:
            matsf = np.ascontiguousarray(reduced.dense.reshape(n_red, d * d))
            code, w, z_mat, iters, trace = _kernels.sdp_dense_loop(
                matsf, d, float(p), eps, eta, t_cap, w0, record_trace
            )
    else:
        slack = sketch_potential_slack if sketch_potential_slack is not None else 1.0 + 2.0 * eps
        code, w, z_mat, iters, trace = _sketched_loop(
            reduced, p, eps, eta, t_cap, w0, seed, c_jl, slack, record_trace
        )

    if code == 1:
        y, _ = _schatten_qnorm_dual(z_mat, p)
        return SolveOutcome(
            verdict="dual",
            x=None,
            y=y,
            iterations=int(iters),
            eps=eps,
            p=float(p),
            exit_reason="iteration cap reached, q-normalized feature sum certifies infeasibility",
            removed=removed,
            trace=trace if record_trace else None,
            iteration_cap=t_cap,
        )

    x = np.zeros(n)
    x[kept] = w / w.sum()
    reason = (
        "instance is identically zero on the surviving matrices"
        if code == 5
        else "weight mass crossed 1/eps, normalized iterate is feasible"
    )
    return SolveOutcome(
        verdict="primal",
        x=x,
        y=None,
        iterations=int(iters),
        eps=eps,
        p=float(p),
        exit_reason=reason,
        removed=removed,
        trace=trace if record_trace else None,
        value=schatten_objective(inst, x, p),
        iteration_cap=t_cap,
    )


def check_sdp_certificate(
    mats,
    outcome: SolveOutcome,
    psd_tol: float = _PSD_TOL,
    atol: float = _CHECK_ATOL,
) -> CertificateReport:
    """Re-verify a Schatten packing certificate against the instance.

    Primal: x in the simplex with ||sum_i x_i A_i||_p <= 1 + eps. Dual: Y
    symmetric and PSD within psd_tol, unit Schatten q-norm, and
    <A_i, Y> >= 1 - eps for every matrix preprocessing kept.
    """
    inst = MatrixInstance.wrap(mats)
    eps, p = outcome.eps, outcome.p

    if outcome.verdict == "primal":
        x = outcome.x
        bound = 1.0 + eps
        if x is None or not in_simplex(x, atol):
            return CertificateReport(
                ok=False, kind="primal", value=math.nan, bound=bound, worst_index=-1,
                violation=math.inf, message="x is missing or not a simplex point",
            )
        value = schatten_objective(inst, x, p)
        worst = int(np.argmax(x))
        ok = value <= bound * (1.0 + atol)
        return CertificateReport(
            ok=ok, kind="primal", value=value, bound=bound, worst_index=worst,
            violation=max(0.0, value - bound),
            message=f"Schatten norm {value:.12g} vs bound {bound:.12g}",
        )

    if outcome.verdict == "dual":
        y = outcome.y
        bound = 1.0 - eps
        if y is None or y.ndim != 2 or y.shape != (inst.d, inst.d):
            return CertificateReport(
                ok=False, kind="dual", value=math.nan, bound=bound, worst_index=-1,
                violation=math.inf, message="Y is missing or has the wrong shape",
            )
        y = (y + y.T) / 2.0
        lam = np.linalg.eigvalsh(y)
        q = p / (p - 1.0)
        qnorm = float(_kernels.vec_pnorm(np.ascontiguousarray(np.abs(lam)), q))
        psd_ok = lam[0] >= -psd_tol
        norm_ok = abs(qnorm - 1.0) <= 1e-6
        kept = np.setdiff1d(np.arange(inst.n), outcome.removed)
        inners = inst.inner_products(y)[kept]
        worst_pos = int(np.argmin(inners))
        value = float(inners[worst_pos])
        worst = int(kept[worst_pos])
        ok = bool(psd_ok and norm_ok and value >= bound - atol)
        return CertificateReport(
            ok=ok, kind="dual", value=value, bound=bound, worst_index=worst,
            violation=max(0.0, bound - value),
            message=f"min <A_i, Y> = {value:.12g} vs bound {bound:.12g} "
            f"(matrix {worst}, min eigenvalue {lam[0]:.3g}, q-norm {qnorm:.12g})",
        )

    return CertificateReport(
        ok=False, kind=outcome.verdict, value=math.nan, bound=math.nan,
        worst_index=-1, violation=math.inf,
        message=f"no certificate attached to verdict {outcome.verdict!r}",
    )
