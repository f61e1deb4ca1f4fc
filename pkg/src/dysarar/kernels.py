"""Hot per-period recursions, written once and numba-compiled by default.

Every public name here has a ``*_python`` twin holding the uncompiled source;
``DYSARAR_DISABLE_NUMBA=1`` selects the pure-numpy fallback (same code, no
JIT). The linear algebra is hand-rolled: at cross-sections of a few dozen
units the cost of a LAPACK round-trip per call exceeds the factorization
itself.

Parameter layout used throughout: a time-varying vector of length
``d = n + k + 2`` ordered ``(rho, lambda, beta_1..k, sigma_1..n)``. Entries
for rho/lambda/beta can be switched off, which pins the natural value at
exactly zero and bypasses the mapping.

Status codes returned by the loops: the second element is the index of the
first period where the recursion produced a non-finite quantity or a
non-positive operator determinant, or -1 if the pass completed.
"""

import math

import numpy as np

from .backend import jit

LN_2PI = math.log(2.0 * math.pi)

# Tilde values beyond this produce overflowing variances; treated as breakdown
# so both backends agree (math.exp raises where numba returns inf).
_TILDE_SIGMA_LIMIT = 300.0


def _sigmoid_python(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


_sigmoid = jit(_sigmoid_python)


def _lu_factor_python(a, piv):
    """In-place LU with partial pivoting. Returns (det sign, log|det|)."""
    n = a.shape[0]
    sign = 1.0
    logdet = 0.0
    for c in range(n):
        p = c
        amax = abs(a[c, c])
        for r in range(c + 1, n):
            v = abs(a[r, c])
            if v > amax:
                amax = v
                p = r
        piv[c] = p
        if amax == 0.0:
            return 0.0, -np.inf
        if p != c:
            for j in range(n):
                tmp = a[c, j]
                a[c, j] = a[p, j]
                a[p, j] = tmp
            sign = -sign
        pivval = a[c, c]
        if pivval < 0.0:
            sign = -sign
        logdet += math.log(abs(pivval))
        inv_piv = 1.0 / pivval
        for r in range(c + 1, n):
            m = a[r, c] * inv_piv
            a[r, c] = m
            for j in range(c + 1, n):
                a[r, j] -= m * a[c, j]
    return sign, logdet


_lu_factor = jit(_lu_factor_python)


def _lu_solve_python(a, piv, b):
    """Solve with factors from ``_lu_factor``; overwrites ``b``."""
    n = a.shape[0]
    for c in range(n):
        p = piv[c]
        if p != c:
            tmp = b[c]
            b[c] = b[p]
            b[p] = tmp
    for r in range(1, n):
        s = b[r]
        for j in range(r):
            s -= a[r, j] * b[j]
        b[r] = s
    for r in range(n - 1, -1, -1):
        s = b[r]
        for j in range(r + 1, n):
            s -= a[r, j] * b[j]
        b[r] = s / a[r, r]


_lu_solve = jit(_lu_solve_python)


def _trace_inv_python(lu, piv, w, work):
    """tr(M^{-1} W) given the LU factors of M."""
    n = lu.shape[0]
    acc = 0.0
    for j in range(n):
        for i in range(n):
            work[i] = w[i, j]
        _lu_solve(lu, piv, work)
        acc += work[j]
    return acc


_trace_inv = jit(_trace_inv_python)


def _build_operator_python(out, w, coef):
    """out = I - coef * w."""
    n = w.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = -coef * w[i, j]
        out[i, i] += 1.0
    return out


_build_operator = jit(_build_operator_python)


def _step_python(yt, xt, cur, w1, w2,
                 rho_off, lam_off, beta_off,
                 rlo, rhi, llo, lhi, clip,
                 a, b, piva, pivb, work,
                 w1y, w2v, res, rv, sv, bw,
                 st_out, nu_out):
    """One observation's log-likelihood and scaled score (gamma = 0).

    Writes the scaled score into ``st_out`` and the standardized residual
    into ``nu_out``. Returns the likelihood contribution, nan on breakdown.
    """
    n = yt.shape[0]
    k = xt.shape[1]

    if rho_off:
        rho = 0.0
        jac_rho = 0.0
    else:
        s = _sigmoid(cur[0])
        rho = rlo + (rhi - rlo) * s
        jac_rho = (rhi - rlo) * s * (1.0 - s)
    if lam_off:
        lam = 0.0
        jac_lam = 0.0
    else:
        s = _sigmoid(cur[1])
        lam = llo + (lhi - llo) * s
        jac_lam = (lhi - llo) * s * (1.0 - s)

    log_sigma_sum = 0.0
    for j in range(n):
        ts = cur[2 + k + j]
        if ts > _TILDE_SIGMA_LIMIT or ts < -_TILDE_SIGMA_LIMIT:
            return np.nan
        log_sigma_sum += ts

    _build_operator(a, w1, rho)
    sign_a, logdet_a = _lu_factor(a, piva)
    if sign_a <= 0.0:
        return np.nan
    _build_operator(b, w2, lam)
    sign_b, logdet_b = _lu_factor(b, pivb)
    if sign_b <= 0.0:
        return np.nan

    # res = A y - X beta, rv = B res, nu = Sigma^{-1/2} rv
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += w1[i, j] * yt[j]
        w1y[i] = acc
    for i in range(n):
        res[i] = yt[i] - rho * w1y[i]
    if not beta_off:
        for i in range(n):
            acc = 0.0
            for j in range(k):
                acc += xt[i, j] * cur[2 + j]
            res[i] -= acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += w2[i, j] * res[j]
        w2v[i] = acc
    ssq = 0.0
    for i in range(n):
        rv[i] = res[i] - lam * w2v[i]
        sig = math.exp(cur[2 + k + i])
        nu_out[i] = rv[i] / sig
        sv[i] = nu_out[i] / sig
        ssq += nu_out[i] * nu_out[i]

    llk = -0.5 * n * LN_2PI - log_sigma_sum + logdet_b + logdet_a - 0.5 * ssq
    if not math.isfinite(llk):
        return np.nan

    # scaled score in tilde coordinates
    if not rho_off:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += w2[i, j] * w1y[j]
            bw[i] = w1y[i] - lam * acc
        grad = 0.0
        for i in range(n):
            grad += sv[i] * bw[i]
        grad -= _trace_inv(a, piva, w1, work)
        st_out[0] = jac_rho * grad
    if not lam_off:
        grad = 0.0
        for i in range(n):
            grad += sv[i] * w2v[i]
        grad -= _trace_inv(b, pivb, w2, work)
        st_out[1] = jac_lam * grad
    if not beta_off:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += w2[j, i] * sv[j]
            bw[i] = sv[i] - lam * acc
        for j in range(k):
            acc = 0.0
            for i in range(n):
                acc += xt[i, j] * bw[i]
            st_out[2 + j] = acc
    for j in range(n):
        st_out[2 + k + j] = nu_out[j] * nu_out[j] - 1.0

    d = n + k + 2
    for i in range(d):
        v = st_out[i]
        if not math.isfinite(v):
            return np.nan
        if v > clip:
            st_out[i] = clip
        elif v < -clip:
            st_out[i] = -clip
    return llk


_step = jit(_step_python)


def _filter_loop_python(y, x, w1, w2, kappa, fvec, rvec,
                        rho_off, lam_off, beta_off,
                        rlo, rhi, llo, lhi, clip):
    """Full score-driven filtering pass. Returns (tilde, scores, llks, nus, bad_t)."""
    t_len, n = y.shape
    k = x.shape[2]
    d = n + k + 2

    tilde = np.zeros((t_len, d))
    scores = np.zeros((t_len, d))
    llks = np.zeros(t_len)
    nus = np.zeros((t_len, n))

    a = np.zeros((n, n))
    b = np.zeros((n, n))
    piva = np.zeros(n, dtype=np.int64)
    pivb = np.zeros(n, dtype=np.int64)
    work = np.zeros(n)
    w1y = np.zeros(n)
    w2v = np.zeros(n)
    res = np.zeros(n)
    rv = np.zeros(n)
    sv = np.zeros(n)
    bw = np.zeros(n)
    cur = kappa.copy()

    bad_t = -1
    for t in range(t_len):
        for i in range(d):
            tilde[t, i] = cur[i]
        llk = _step(y[t], x[t], cur, w1, w2,
                    rho_off, lam_off, beta_off,
                    rlo, rhi, llo, lhi, clip,
                    a, b, piva, pivb, work,
                    w1y, w2v, res, rv, sv, bw,
                    scores[t], nus[t])
        if not math.isfinite(llk):
            bad_t = t
            break
        llks[t] = llk
        ok = True
        for i in range(d):
            nxt = (1.0 - rvec[i]) * kappa[i] + fvec[i] * scores[t, i] + rvec[i] * cur[i]
            if not math.isfinite(nxt):
                ok = False
            cur[i] = nxt
        if not ok:
            bad_t = t
            break
    return tilde, scores, llks, nus, bad_t


_filter_loop = jit(_filter_loop_python)


def _draw_python(nat_row, xt, eps_t, w1, w2, a, b, piva, pivb, vec, yt):
    """Draw y_t = A^{-1}(X beta + B^{-1} eps) at the given natural parameters."""
    n = eps_t.shape[0]
    k = xt.shape[1]
    rho = nat_row[0]
    lam = nat_row[1]
    _build_operator(b, w2, lam)
    sign_b, _ = _lu_factor(b, pivb)
    if sign_b <= 0.0:
        return False
    for i in range(n):
        vec[i] = nat_row[2 + k + i] * eps_t[i]
    _lu_solve(b, pivb, vec)
    for i in range(n):
        acc = 0.0
        for j in range(k):
            acc += xt[i, j] * nat_row[2 + j]
        yt[i] = acc + vec[i]
    _build_operator(a, w1, rho)
    sign_a, _ = _lu_factor(a, piva)
    if sign_a <= 0.0:
        return False
    _lu_solve(a, piva, yt)
    return True


_draw = jit(_draw_python)


def _simulate_exog_loop_python(nat, x, w1, w2, eps):
    """Observation panel for an exogenously given natural parameter path.

    ``nat`` is (T, d) with sigma stored as standard deviations.
    """
    t_len, n = eps.shape
    y = np.zeros((t_len, n))
    a = np.zeros((n, n))
    b = np.zeros((n, n))
    piva = np.zeros(n, dtype=np.int64)
    pivb = np.zeros(n, dtype=np.int64)
    vec = np.zeros(n)

    bad_t = -1
    for t in range(t_len):
        if not _draw(nat[t], x[t], eps[t], w1, w2, a, b, piva, pivb, vec, y[t]):
            bad_t = t
            break
    return y, bad_t


_simulate_exog_loop = jit(_simulate_exog_loop_python)


def _simulate_filter_loop_python(x, w1, w2, kappa, fvec, rvec,
                                 rho_off, lam_off, beta_off,
                                 rlo, rhi, llo, lhi, clip, eps):
    """Co-simulation of the observation-driven model itself.

    At each period the observation is drawn from the conditional density
    implied by the current tilde vector, then the recursion advances on the
    scaled score of that drawn observation.
    """
    t_len, n = eps.shape
    k = x.shape[2]
    d = n + k + 2

    y = np.zeros((t_len, n))
    tilde = np.zeros((t_len, d))
    scores = np.zeros((t_len, d))
    llks = np.zeros(t_len)
    nus = np.zeros((t_len, n))
    nat_row = np.zeros(d)

    a = np.zeros((n, n))
    b = np.zeros((n, n))
    piva = np.zeros(n, dtype=np.int64)
    pivb = np.zeros(n, dtype=np.int64)
    work = np.zeros(n)
    w1y = np.zeros(n)
    w2v = np.zeros(n)
    res = np.zeros(n)
    rv = np.zeros(n)
    sv = np.zeros(n)
    bw = np.zeros(n)
    cur = kappa.copy()

    bad_t = -1
    for t in range(t_len):
        for i in range(d):
            tilde[t, i] = cur[i]
        if rho_off:
            nat_row[0] = 0.0
        else:
            nat_row[0] = rlo + (rhi - rlo) * _sigmoid(cur[0])
        if lam_off:
            nat_row[1] = 0.0
        else:
            nat_row[1] = llo + (lhi - llo) * _sigmoid(cur[1])
        for j in range(k):
            nat_row[2 + j] = 0.0 if beta_off else cur[2 + j]
        overflow = False
        for j in range(n):
            ts = cur[2 + k + j]
            if ts > _TILDE_SIGMA_LIMIT or ts < -_TILDE_SIGMA_LIMIT:
                overflow = True
            else:
                nat_row[2 + k + j] = math.exp(ts)
        if overflow:
            bad_t = t
            break
        if not _draw(nat_row, x[t], eps[t], w1, w2, a, b, piva, pivb, work, y[t]):
            bad_t = t
            break
        llk = _step(y[t], x[t], cur, w1, w2,
                    rho_off, lam_off, beta_off,
                    rlo, rhi, llo, lhi, clip,
                    a, b, piva, pivb, work,
                    w1y, w2v, res, rv, sv, bw,
                    scores[t], nus[t])
        if not math.isfinite(llk):
            bad_t = t
            break
        llks[t] = llk
        ok = True
        for i in range(d):
            nxt = (1.0 - rvec[i]) * kappa[i] + fvec[i] * scores[t, i] + rvec[i] * cur[i]
            if not math.isfinite(nxt):
                ok = False
            cur[i] = nxt
        if not ok:
            bad_t = t
            break
    return y, tilde, scores, llks, nus, bad_t


_simulate_filter_loop = jit(_simulate_filter_loop_python)
