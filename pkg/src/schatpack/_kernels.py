"""Solver inner loops, compiled with numba unless SCHATPACK_BACKEND=numpy.

Every function here is written once in numba-compatible vectorized numpy, so
the same source runs on both backends. Kernels return plain tuples of arrays
and scalars; interpreting exit codes and packaging outcomes is the drivers'
job. Exit codes:

    0  threshold crossed, primal witness available
    1  iteration cap reached (dual certificate for the LP/SDP solvers,
       infeasibility for the boxed solver)
    2  boxed only: the normalized iterate already satisfies the full primal
       certificate
    3  boxed only: pointwise dual-mixture floor cleared, infeasible
    4  boxed only: running-average dual-mixture floor cleared, infeasible
    5  degenerate all-zero instance, uniform primal witness
    6  boxed only: iteration budget exhausted before any certificate

Trace buffers carry one row per visited state t = 0..iters with the
potential in column 0 and the l1 mass in column 1 (remaining columns are
loop-specific).
"""

from __future__ import annotations

import numpy as np

from ._backend import kernel

__all__ = [
    "mrwz_loop",
    "pnorm_loop",
    "sdp_rank1_loop",
    "sdp_dense_loop",
    "boxed_rank1_loop",
    "boxed_dense_loop",
    "vec_pnorm",
]


@kernel
def vec_pnorm(x, p):
    """l_p norm of a nonnegative vector, scaled against overflow."""
    m = x.max()
    if m <= 0.0:
        return 0.0
    return m * np.sum((x / m) ** p) ** (1.0 / p)


@kernel
def _logsumexp(a):
    m = a.max()
    return m + np.log(np.sum(np.exp(a - m)))


@kernel
def mrwz_loop(a, at, k_thresh, eta, t_cap, w0, record):
    """Multiplicative-weights loop for the l_inf packing LP.

    ``a`` is d x n, ``at`` its C-contiguous transpose. Dual vector is the
    *sum* of the softmax iterates (caller divides by t_cap on code 1).
    """
    d, n = a.shape
    w = w0.copy()
    z = np.zeros(d)
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 3))
    t = 0
    code = 0
    while True:
        aw = a @ w
        l1 = np.sum(w)
        if record:
            trace[t, 0] = _logsumexp(aw) - l1
            trace[t, 1] = l1
        if aw.max() > k_thresh or l1 > k_thresh:
            code = 0
            break
        if t >= t_cap:
            code = 1
            break
        v = np.exp(aw - aw.max())
        v = v / np.sum(v)
        g = np.maximum(1.0 - at @ v, 0.0)
        if record:
            trace[t, 2] = g.max()
        w = w * (1.0 + eta * g)
        z = z + v
        t += 1
    return code, w, z, t, trace[: t + 1]


@kernel
def pnorm_loop(a, at, p, eps, eta, t_cap, w0, record):
    """Mirror-descent loop for l_p packing, p >= 2 finite.

    Dual vector is the accumulated sum of v_t^{p-1} (caller q-normalizes on
    code 1).
    """
    d, n = a.shape
    w = w0.copy()
    z = np.zeros(d)
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 3))
    t = 0
    code = 0
    while True:
        aw = a @ w
        l1 = np.sum(w)
        nrm = vec_pnorm(aw, p)
        if record:
            trace[t, 0] = nrm - l1
            trace[t, 1] = l1
        if nrm == 0.0:
            code = 5
            break
        if l1 > 1.0 / eps:
            code = 0
            break
        if t >= t_cap:
            code = 1
            break
        vpow = (aw / nrm) ** (p - 1.0)
        g = np.maximum(1.0 - at @ vpow, 0.0)
        if record:
            trace[t, 2] = g.max()
        w = w * (1.0 + eta * g)
        z = z + vpow
        t += 1
    return code, w, z, t, trace[: t + 1]


@kernel
def _psd_power_from_eigh(m, p):
    """Eigendecompose a symmetric PSD matrix and return
    (norm_p, (m / norm_p)^{p-1}). Negative roundoff eigenvalues clip to 0."""
    lam, u = np.linalg.eigh(m)
    lam = np.maximum(lam, 0.0)
    top = lam.max()
    if top <= 0.0:
        return 0.0, np.zeros_like(m)
    nrm = top * np.sum((lam / top) ** p) ** (1.0 / p)
    coeff = (lam / nrm) ** (p - 1.0)
    ypow = (u * coeff) @ np.ascontiguousarray(u.T)
    return nrm, ypow


@kernel
def sdp_rank1_loop(x, xt, p, eps, eta, t_cap, w0, record):
    """Schatten packing loop over rank-one matrices x_i x_i'.

    ``x`` is n x d, ``xt`` its C-contiguous transpose. The dual accumulator
    z_mat sums (M_t / ||M_t||_p)^{p-1} across iterations.
    """
    n, d = x.shape
    w = w0.copy()
    z_mat = np.zeros((d, d))
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 3))
    t = 0
    code = 0
    while True:
        m = xt @ (x * w.reshape(n, 1))
        m = (m + m.T) / 2.0
        l1 = np.sum(w)
        nrm, ypow = _psd_power_from_eigh(m, p)
        if record:
            trace[t, 0] = nrm - l1
            trace[t, 1] = l1
        if nrm == 0.0:
            code = 5
            break
        if l1 > 1.0 / eps:
            code = 0
            break
        if t >= t_cap:
            code = 1
            break
        inner = ((x @ ypow) * x).sum(axis=1)
        g = np.maximum(1.0 - inner, 0.0)
        if record:
            trace[t, 2] = g.max()
        w = w * (1.0 + eta * g)
        z_mat = z_mat + ypow
        t += 1
    return code, w, z_mat, t, trace[: t + 1]


@kernel
def sdp_dense_loop(matsf, d, p, eps, eta, t_cap, w0, record):
    """Schatten packing loop over dense PSD matrices.

    ``matsf`` is the n x (d*d) row-flattened stack, so the weighted
    combination and all inner products are single BLAS products.
    """
    n = matsf.shape[0]
    w = w0.copy()
    z_mat = np.zeros((d, d))
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 3))
    t = 0
    code = 0
    while True:
        m = (w @ matsf).reshape(d, d)
        m = (m + m.T) / 2.0
        l1 = np.sum(w)
        nrm, ypow = _psd_power_from_eigh(m, p)
        if record:
            trace[t, 0] = nrm - l1
            trace[t, 1] = l1
        if nrm == 0.0:
            code = 5
            break
        if l1 > 1.0 / eps:
            code = 0
            break
        if t >= t_cap:
            code = 1
            break
        inner = matsf @ ypow.reshape(d * d)
        g = np.maximum(1.0 - inner, 0.0)
        if record:
            trace[t, 2] = g.max()
        w = w * (1.0 + eta * g)
        z_mat = z_mat + ypow
        t += 1
    return code, w, z_mat, t, trace[: t + 1]


@kernel
def _boxed_step(inner, w, nrm_a, s_fac, p_prime, eps):
    """Shared gradient work for the boxed loops.

    Takes the packing inner products <A_i, Y(w)> and the current weights,
    returns (potential_minus_l1_part, nrm_b, mixture vector). The potential
    itself is lse(nrm_a, nrm_b) - ||w||_1; the caller subtracts l1.
    """
    nrm_b = s_fac * vec_pnorm(w, p_prime)
    # stable two-term softmax weights for the gradient mixture
    if nrm_a >= nrm_b:
        wa = 1.0
        wb = np.exp(nrm_b - nrm_a)
        lse = nrm_a + np.log(wa + wb)
    else:
        wa = np.exp(nrm_a - nrm_b)
        wb = 1.0
        lse = nrm_b + np.log(wa + wb)
    z_vec = (s_fac * w / nrm_b) ** (p_prime - 1.0)
    m_vec = (wa * inner + wb * (s_fac * z_vec)) / (wa + wb)
    return lse, nrm_b, m_vec


@kernel
def boxed_rank1_loop(
    x, xt, p, p_prime, s_fac, eps, k_thresh, eta, t_cap, box_bound, w0, early, budget, record
):
    """Boxed mixed-norm packing loop over rank-one matrices x_i x_i'."""
    n, d = x.shape
    w = w0.copy()
    msum = np.zeros(n)
    dual_floor = (1.0 - eps) * np.exp(eps)
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 4))
    t = 0
    code = 1
    while True:
        m = xt @ (x * w.reshape(n, 1))
        m = (m + m.T) / 2.0
        l1 = np.sum(w)
        nrm_a, ypow = _psd_power_from_eigh(m, p)
        if nrm_a == 0.0:
            code = 5
            break
        inner = ((x @ ypow) * x).sum(axis=1)
        lse, nrm_b, m_vec = _boxed_step(inner, w, nrm_a, s_fac, p_prime, eps)
        if record:
            trace[t, 0] = lse - l1
            trace[t, 1] = l1
            trace[t, 2] = nrm_a
            trace[t, 3] = nrm_b
        if nrm_a > k_thresh or nrm_b > k_thresh or l1 > k_thresh:
            code = 0
            break
        if early and nrm_a <= (1.0 + eps) * l1 and w.max() <= (1.0 + eps) * box_bound * l1:
            code = 2
            break
        if early and m_vec.min() > dual_floor:
            code = 3
            break
        if t >= t_cap:
            code = 1
            break
        if budget > 0 and t >= budget:
            code = 6
            break
        msum = msum + m_vec
        if early and (msum / (t + 1.0)).min() > dual_floor:
            code = 4
            break
        g = np.maximum(1.0 - m_vec, 0.0)
        w = w * (1.0 + eta * g)
        t += 1
    return code, w, t, trace[: t + 1]


@kernel
def boxed_dense_loop(
    matsf, d, p, p_prime, s_fac, eps, k_thresh, eta, t_cap, box_bound, w0, early, budget, record
):
    """Boxed mixed-norm packing loop over dense PSD matrices."""
    n = matsf.shape[0]
    w = w0.copy()
    msum = np.zeros(n)
    dual_floor = (1.0 - eps) * np.exp(eps)
    rows = t_cap + 1 if record else 1
    trace = np.zeros((rows, 4))
    t = 0
    code = 1
    while True:
        m = (w @ matsf).reshape(d, d)
        m = (m + m.T) / 2.0
        l1 = np.sum(w)
        nrm_a, ypow = _psd_power_from_eigh(m, p)
        if nrm_a == 0.0:
            code = 5
            break
        inner = matsf @ ypow.reshape(d * d)
        lse, nrm_b, m_vec = _boxed_step(inner, w, nrm_a, s_fac, p_prime, eps)
        if record:
            trace[t, 0] = lse - l1
            trace[t, 1] = l1
            trace[t, 2] = nrm_a
            trace[t, 3] = nrm_b
        if nrm_a > k_thresh or nrm_b > k_thresh or l1 > k_thresh:
            code = 0
            break
        if early and nrm_a <= (1.0 + eps) * l1 and w.max() <= (1.0 + eps) * box_bound * l1:
            code = 2
            break
        if early and m_vec.min() > dual_floor:
            code = 3
            break
        if t >= t_cap:
            code = 1
            break
        if budget > 0 and t >= budget:
            code = 6
            break
        msum = msum + m_vec
        if early and (msum / (t + 1.0)).min() > dual_floor:
            code = 4
            break
        g = np.maximum(1.0 - m_vec, 0.0)
        w = w * (1.0 + eta * g)
        t += 1
    return code, w, t, trace[: t + 1]
