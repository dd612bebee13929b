"""Schatten packing under a box constraint on the weights.

The decision problem: is there an x in the simplex with every entry at most
(1 + alpha) / n whose weighted combination has Schatten p-norm at most one?
The box is folded into the objective as an l_p' penalty on the scaled
weights Sx with S = (n / (1 + alpha)) I and p' = log(n) / eps, so a single
mirror-descent loop drives the softmax of the two norms. "primal" outcomes
satisfy both bounds with 1 + eps slack; "infeasible" outcomes certify that
even the 1 - eps relaxation has no solution.

boxed_schatten_optimize wraps the decision solver in a scale search to
minimize the norm over the box, with two strategies:

  "bisect"  geometric bisection on the scale. Infeasible verdicts raise the
            floor, so the returned value is within 1 + eps of the true
            optimum. The inner tolerance is a fraction of eps and the box
            is inflated accordingly, keeping infeasibility conclusions
            valid for the exact-alpha box.

  "descend" a walk from a feasible upper bound downward using only primal
            verdicts, each probe on an iteration budget. Faster on large
            instances and never overshoots the box: the output is certified
            feasible with value at most (1 + eps) times the last decided
            scale, but the near-optimality gap is only as good as the walk
            got before a probe failed to certify in budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import _kernels
from .errors import DegenerateInputError, InvalidInputError
from .outcomes import CertificateReport, SolveOutcome, in_box, in_simplex
from .packing_sdp import MatrixInstance, _check_schatten_order, schatten_objective

__all__ = [
    "BoxedConfig",
    "BoxedOptimizeResult",
    "mixed_potential",
    "mixed_gradient",
    "boxed_schatten_decide",
    "boxed_schatten_optimize",
    "check_boxed_point",
    "check_boxed_certificate",
]

_CHECK_ATOL = 1e-9
_MAX_FLOOR_EXTENSIONS = 60


@dataclass(frozen=True)
class BoxedConfig:
    """Frozen hyperparameters for one boxed decision solve.

    Derived fields follow from (n, d, alpha, p, eps): the penalty order
    p_prime = log(n) / eps, step size eta = 1 / (4 p_prime), threshold
    k_thresh = 3 / eps, iteration cap t_cap = 6 log(nd/eps) / (eta eps),
    scaling s_fac = n / (1 + alpha), and box_bound = (1 + alpha) / n.
    c_box only gates validation: eps must be at most c_box * alpha, so a
    finite c_box rejects boxes too tight for the accuracy target, while
    c_box = inf waives the coupling (needed for alpha = 0, where the box
    pins x to exactly uniform).
    """

    n: int
    d: int
    alpha: float
    p: int
    eps: float
    c_box: float
    p_prime: float
    eta: float
    k_thresh: float
    t_cap: int
    s_fac: float
    box_bound: float

    @classmethod
    def create(
        cls,
        n: int,
        d: int,
        alpha: float,
        p,
        eps: float,
        c_box: float = 1.0,
    ) -> "BoxedConfig":
        p = _check_schatten_order(p)
        if n < 1 or d < 1:
            raise InvalidInputError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
        if not (0.0 < eps <= 0.5):
            raise InvalidInputError(f"eps must lie in (0, 0.5], got {eps}")
        if alpha < 0.0:
            raise InvalidInputError(f"alpha must be nonnegative, got {alpha}")
        if math.isfinite(c_box):
            if c_box <= 0.0:
                raise InvalidInputError(f"c_box must be positive, got {c_box}")
            if eps > c_box * alpha:
                raise InvalidInputError(
                    f"eps = {eps:g} exceeds c_box * alpha = {c_box * alpha:g}; "
                    "either widen the box, relax eps, or pass c_box=inf to "
                    "accept a box tighter than the accuracy target"
                )
        p_prime = math.log(max(n, 2)) / eps
        eta = 1.0 / (4.0 * p_prime)
        k_thresh = 3.0 / eps
        t_cap = int(math.ceil(6.0 * math.log(n * d / eps) / (eta * eps)))
        return cls(
            n=n,
            d=d,
            alpha=float(alpha),
            p=p,
            eps=float(eps),
            c_box=float(c_box),
            p_prime=p_prime,
            eta=eta,
            k_thresh=k_thresh,
            t_cap=t_cap,
            s_fac=n / (1.0 + alpha),
            box_bound=(1.0 + alpha) / n,
        )


def _norms(inst: MatrixInstance, w: np.ndarray, cfg: BoxedConfig) -> Tuple[float, float, np.ndarray]:
    """(Schatten norm of the combination, penalty norm of Sw, inner products
    against Y(w)). Raises on states where Y is undefined."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (cfg.n,) or w.min() < 0.0:
        raise InvalidInputError("w must be a nonnegative vector of length n")
    if not w.any():
        raise DegenerateInputError("w = 0: the norm gradient is undefined at the origin")
    m = inst.combine(w)
    lam, u = np.linalg.eigh(m)
    lam = np.maximum(lam, 0.0)
    if lam.max() <= 0.0:
        raise DegenerateInputError("combination is the zero matrix; gradient undefined")
    nrm_a = float(_kernels.vec_pnorm(lam, float(cfg.p)))
    ypow = (u * (lam / nrm_a) ** (cfg.p - 1.0)) @ u.T
    inner = inst.inner_products(ypow)
    nrm_b = cfg.s_fac * float(_kernels.vec_pnorm(np.ascontiguousarray(w), cfg.p_prime))
    return nrm_a, nrm_b, inner


def mixed_potential(mats, w: np.ndarray, cfg: BoxedConfig) -> float:
    """log(exp ||A(w)||_p + exp ||Sw||_p') - ||w||_1, computed stably.

    Defined for every nonnegative w; at w = 0 both norms vanish and the
    value is log 2.
    """
    inst = MatrixInstance.wrap(mats)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (cfg.n,) or w.min() < 0.0:
        raise InvalidInputError("w must be a nonnegative vector of length n")
    if not w.any():
        return math.log(2.0)
    lam = np.abs(np.linalg.eigvalsh(inst.combine(w)))
    nrm_a = float(_kernels.vec_pnorm(np.ascontiguousarray(lam), float(cfg.p)))
    nrm_b = cfg.s_fac * float(_kernels.vec_pnorm(np.ascontiguousarray(w), cfg.p_prime))
    hi, lo = max(nrm_a, nrm_b), min(nrm_a, nrm_b)
    return hi + math.log1p(math.exp(lo - hi)) - float(w.sum())


def mixed_gradient(mats, w: np.ndarray, cfg: BoxedConfig) -> np.ndarray:
    """Exact gradient of mixed_potential at w.

    Entry i is the softmax mixture of <A_i, Y(w)> and the penalty term
    minus one. Matches central finite differences of mixed_potential away
    from eigenvalue crossings.
    """
    inst = MatrixInstance.wrap(mats)
    nrm_a, nrm_b, inner = _norms(inst, np.asarray(w, dtype=np.float64), cfg)
    w = np.asarray(w, dtype=np.float64)
    if nrm_a >= nrm_b:
        wa, wb = 1.0, math.exp(nrm_b - nrm_a)
    else:
        wa, wb = math.exp(nrm_a - nrm_b), 1.0
    z_vec = (cfg.s_fac * w / nrm_b) ** (cfg.p_prime - 1.0)
    mix = (wa * inner + wb * (cfg.s_fac * z_vec)) / (wa + wb)
    return mix - 1.0


_EXIT_REASONS = {
    0: "norm or mass threshold crossed, normalized iterate is feasible",
    1: "iteration cap reached without a feasible iterate",
    2: "normalized iterate met the primal certificate early",
    3: "pointwise gradient mixture exceeds the dual floor everywhere",
    4: "averaged gradient mixture exceeds the dual floor everywhere",
    5: "instance is identically zero, uniform weights are optimal",
    6: "iteration budget exhausted before any certificate",
}


def boxed_schatten_decide(
    mats,
    cfg: BoxedConfig,
    record_trace: bool = False,
    early_exit: bool = True,
    max_iters: Optional[int] = None,
) -> SolveOutcome:
    """Run the boxed packing decision at the instance's own scale.

    Requires the instance to be scaled so the initial potential is at most
    two; wider instances must be divided by their scale first (the optimizer
    does this), because the feasibility of threshold exits leans on a small
    starting potential. With max_iters below the certified cap the verdict
    can come back "undecided".
    """
    inst = MatrixInstance.wrap(mats)
    if inst.n != cfg.n or inst.d != cfg.d:
        raise InvalidInputError(
            f"config is for n={cfg.n}, d={cfg.d} but instance has n={inst.n}, d={inst.d}"
        )
    w0 = np.full(cfg.n, cfg.eps / (cfg.n**2 * cfg.d))
    phi0 = mixed_potential(inst, w0, cfg)
    if phi0 > 2.0:
        raise InvalidInputError(
            f"initial potential {phi0:.3g} exceeds 2; divide the matrices by their "
            "working scale before deciding (the entries are too wide as given)"
        )
    budget = 0
    if max_iters is not None:
        if max_iters < 1:
            raise InvalidInputError(f"max_iters must be positive, got {max_iters}")
        budget = min(int(max_iters), cfg.t_cap)
        if budget == cfg.t_cap:
            budget = 0

    if inst.samples is not None:
        xt = np.ascontiguousarray(inst.samples.T)
        code, w, iters, trace = _kernels.boxed_rank1_loop(
            inst.samples, xt, float(cfg.p), cfg.p_prime, cfg.s_fac, cfg.eps,
            cfg.k_thresh, cfg.eta, cfg.t_cap, cfg.box_bound, w0, early_exit,
            budget, record_trace,
        )
    else:
        matsf = np.ascontiguousarray(inst.dense.reshape(inst.n, inst.d * inst.d))
        code, w, iters, trace = _kernels.boxed_dense_loop(
            matsf, inst.d, float(cfg.p), cfg.p_prime, cfg.s_fac, cfg.eps,
            cfg.k_thresh, cfg.eta, cfg.t_cap, cfg.box_bound, w0, early_exit,
            budget, record_trace,
        )

    reason = _EXIT_REASONS[int(code)]
    if code in (1, 3, 4):
        return SolveOutcome(
            verdict="infeasible", x=None, y=None, iterations=int(iters), eps=cfg.eps,
            p=float(cfg.p), exit_reason=reason,
            trace=trace if record_trace else None, iteration_cap=cfg.t_cap,
        )
    if code == 6:
        return SolveOutcome(
            verdict="undecided", x=None, y=None, iterations=int(iters), eps=cfg.eps,
            p=float(cfg.p), exit_reason=reason,
            trace=trace if record_trace else None, iteration_cap=cfg.t_cap,
        )

    x = w / w.sum()
    value = schatten_objective(inst, x, cfg.p)
    box_max = float(x.max())
    if value > (1.0 + cfg.eps) * (1.0 + 1e-9) or box_max > cfg.box_bound * (1.0 + cfg.eps) * (1.0 + 1e-9):
        raise AssertionError(
            f"primal exit produced an infeasible point (norm {value:.6g}, "
            f"max weight {box_max:.6g}); this indicates a solver defect"
        )
    return SolveOutcome(
        verdict="primal", x=x, y=None, iterations=int(iters), eps=cfg.eps,
        p=float(cfg.p), exit_reason=reason,
        trace=trace if record_trace else None, value=value, iteration_cap=cfg.t_cap,
    )


@dataclass
class BoxedOptimizeResult:
    """Search output: x minimizes the boxed Schatten norm up to the promised
    slack, value is its exact norm on the caller's scale, and [lo, hi]
    brackets where the search ended. floor_certified says the lower end was
    established by an infeasibility verdict or a provable trace bound rather
    than assumed; budget_hit flags a descend probe that ran out of
    iterations."""

    x: np.ndarray
    value: float
    lo: float
    hi: float
    decide_calls: int
    strategy: str
    floor_certified: bool
    budget_hit: bool
    alpha: float
    eps: float
    p: int


def _scaled(inst: MatrixInstance, scale: float) -> MatrixInstance:
    if inst.samples is not None:
        return MatrixInstance(n=inst.n, d=inst.d, samples=inst.samples / math.sqrt(scale))
    return MatrixInstance(n=inst.n, d=inst.d, dense=inst.dense / scale)


def boxed_schatten_optimize(
    mats,
    alpha: float,
    eps: float,
    p,
    c_box: float = 1.0,
    strategy: str = "bisect",
    decide_fraction: float = 0.25,
    bracket_fraction: float = 0.25,
    descend_budget: Optional[int] = 20000,
    record_trace: bool = False,
) -> BoxedOptimizeResult:
    """Minimize ||sum_i x_i A_i||_p over the alpha-box via scale search.

    The bisect strategy returns a value within (1 + eps) of the box-
    constrained optimum; its decide calls run at eps * decide_fraction with
    the box inflated by the same amount, so infeasibility verdicts certify
    the exact-alpha box and the slacks compose to at most (1 + eps) overall.
    The descend strategy walks down from the uniform witness using the full
    eps per probe and never inflates the box, giving the tighter guarantee
    max weight <= (1 + eps)(1 + alpha) / n at some cost in optimality; it is
    the strategy the robust PCA path uses.
    """
    p = _check_schatten_order(p)
    if strategy not in ("bisect", "descend"):
        raise InvalidInputError(f"strategy must be 'bisect' or 'descend', got {strategy!r}")
    inst = MatrixInstance.wrap(mats)
    # surface box/accuracy coupling problems with the caller's own numbers
    BoxedConfig.create(inst.n, inst.d, alpha, p, eps, c_box=c_box)

    n, d = inst.n, inst.d
    uniform = np.full(n, 1.0 / n)
    u_val = schatten_objective(inst, uniform, p)
    if u_val == 0.0:
        return BoxedOptimizeResult(
            x=uniform, value=0.0, lo=0.0, hi=0.0, decide_calls=0, strategy=strategy,
            floor_certified=True, budget_hit=False, alpha=alpha, eps=eps, p=p,
        )

    if inst.samples is not None:
        traces = np.einsum("ij,ij->i", inst.samples, inst.samples)
    else:
        traces = np.trace(inst.dense, axis1=1, axis2=2)
    provable_floor = float(traces.min()) / d
    lo = max(float(traces.max()) / (n * d), provable_floor)
    hi = u_val
    lo = min(lo, hi)
    # below this scale the rescaled instance is too wide for the decider's
    # starting-potential requirement (trace sum upper-bounds the norm)
    width_floor = eps * float(traces.sum()) / (1.25 * n**2 * d)

    if strategy == "descend":
        return _optimize_descend(inst, alpha, eps, p, u_val, descend_budget, record_trace)

    eps_dec = eps * decide_fraction
    eps_br = eps * bracket_fraction
    alpha_run = (alpha + eps_dec) / (1.0 - eps_dec)
    cfg = BoxedConfig.create(n, d, alpha_run, p, eps_dec, c_box=math.inf)

    x_best = uniform
    calls = 0
    any_infeasible = False
    extensions = 0
    while True:
        while hi > lo * (1.0 + eps_br):
            mid = math.sqrt(lo * hi)
            out = boxed_schatten_decide(_scaled(inst, mid), cfg, record_trace=record_trace)
            calls += 1
            if out.verdict == "primal":
                hi = mid
                x_best = out.x
            else:
                lo = mid
                any_infeasible = True
        floor_certified = any_infeasible or lo <= provable_floor
        if floor_certified or extensions >= _MAX_FLOOR_EXTENSIONS:
            break
        # the bracket hit the assumed floor without evidence; push it down
        new_lo = max(lo / 4.0, provable_floor, width_floor)
        if new_lo >= lo:
            break
        lo = new_lo
        extensions += 1

    value = schatten_objective(inst, x_best, p)
    return BoxedOptimizeResult(
        x=x_best, value=value, lo=lo, hi=hi, decide_calls=calls, strategy="bisect",
        floor_certified=floor_certified, budget_hit=False, alpha=alpha, eps=eps, p=p,
    )


def _optimize_descend(
    inst: MatrixInstance,
    alpha: float,
    eps: float,
    p: int,
    u_val: float,
    budget: Optional[int],
    record_trace: bool,
) -> BoxedOptimizeResult:
    n, d = inst.n, inst.d
    cfg = BoxedConfig.create(n, d, alpha, p, eps, c_box=math.inf)
    if inst.samples is not None:
        tr_total = float(np.einsum("ij,ij->", inst.samples, inst.samples))
    else:
        tr_total = float(np.trace(inst.dense, axis1=1, axis2=2).sum())
    width_floor = eps * tr_total / (1.25 * n**2 * d)
    x_best = np.full(n, 1.0 / n)
    value_best = u_val
    s = u_val
    calls = 0
    budget_hit = False
    floor_certified = False
    while True:
        target = value_best / (1.0 + 3.0 * eps)
        if target >= s or target < width_floor:
            break
        s = target
        out = boxed_schatten_decide(
            _scaled(inst, s), cfg, record_trace=record_trace, max_iters=budget
        )
        calls += 1
        if out.verdict != "primal":
            budget_hit = out.verdict == "undecided"
            floor_certified = out.verdict == "infeasible"
            break
        cand = schatten_objective(inst, out.x, p)
        if cand >= value_best:
            break
        x_best, value_best = out.x, cand
    return BoxedOptimizeResult(
        x=x_best, value=value_best, lo=s, hi=value_best, decide_calls=calls,
        strategy="descend", floor_certified=floor_certified, budget_hit=budget_hit,
        alpha=alpha, eps=eps, p=p,
    )


def check_boxed_point(
    mats,
    x: np.ndarray,
    alpha: float,
    eps: float,
    p,
    scale: float = 1.0,
    atol: float = _CHECK_ATOL,
) -> CertificateReport:
    """Verify the primal boxed certificate: x in the simplex, every entry at
    most (1 + eps)(1 + alpha) / n, and Schatten norm at most (1 + eps) * scale."""
    inst = MatrixInstance.wrap(mats)
    bound = (1.0 + eps) * scale
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n,) or not in_simplex(x, atol):
        return CertificateReport(
            ok=False, kind="primal", value=math.nan, bound=bound, worst_index=-1,
            violation=math.inf, message="x is missing or not a simplex point",
        )
    value = schatten_objective(inst, x, p)
    box_ok = in_box(x, alpha, 1.0 + eps, atol)
    norm_ok = value <= bound * (1.0 + atol)
    worst = int(np.argmax(x))
    box_bound = (1.0 + eps) * (1.0 + alpha) / inst.n
    violation = max(0.0, value - bound) + max(0.0, float(x.max()) - box_bound)
    return CertificateReport(
        ok=bool(box_ok and norm_ok), kind="primal", value=value, bound=bound,
        worst_index=worst,
        violation=violation,
        message=f"norm {value:.12g} vs {bound:.12g}, max weight {float(x.max()):.12g} "
        f"vs {box_bound:.12g}",
    )


def check_boxed_certificate(
    mats,
    outcome: SolveOutcome,
    cfg: BoxedConfig,
    atol: float = _CHECK_ATOL,
) -> CertificateReport:
    """Re-verify a boxed decision outcome at the decided scale.

    Primal outcomes are checked pointwise. Infeasibility carries no
    finite witness (it is certified by the run reaching its cap or dual
    floor), so it reports ok with an explanatory message; "undecided" is
    never a certificate and reports not-ok.
    """
    if outcome.verdict == "primal":
        return check_boxed_point(mats, outcome.x, cfg.alpha, cfg.eps, cfg.p, atol=atol)
    if outcome.verdict == "infeasible":
        return CertificateReport(
            ok=True, kind="infeasible", value=math.nan, bound=1.0 - cfg.eps,
            worst_index=-1, violation=0.0,
            message="infeasibility rests on the iteration transcript "
            f"({outcome.exit_reason}); no finite witness to recheck",
        )
    return CertificateReport(
        ok=False, kind=outcome.verdict, value=math.nan, bound=math.nan, worst_index=-1,
        violation=math.inf, message=f"verdict {outcome.verdict!r} is not a certificate",
    )
