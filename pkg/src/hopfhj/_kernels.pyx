# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scalar kernels.

Statement-for-statement port of ``_kernels_py``; see that module for the
reference semantics.  Batch entry points release the GIL.
"""

from libc.math cimport sqrt, fabs, isnan, copysign, NAN
from libc.stdlib cimport qsort, malloc, free

import numpy as np

NAME = "compiled"

cdef double _EPS = 2.220446049250313e-16
cdef double _SQRT_SLACK = 1e-12

CAND_P1 = 1
CAND_P2 = 2
CAND_P3 = 3
CAND_P4 = 4


cdef inline double _guarded_sqrt(double d, double scale) noexcept nogil:
    if d >= 0.0:
        return sqrt(d)
    if d >= -_SQRT_SLACK * (1.0 + scale):
        return 0.0
    return NAN


cdef inline double _f3_pos(double x, double t, double p, double a, double b) noexcept nogil:
    cdef double k = a + 2.0 * b
    cdef double e = p - b * t
    cdef double sq = _guarded_sqrt(e * e + 2.0 * x * k, e * e)
    cdef double cube
    if e > 0.0:
        cube = 2.0 * x * k / (sq + e) * (sq * sq + sq * e + e * e)
    else:
        cube = sq * sq * sq - e * e * e
    return ((a + b) / (3.0 * k * k) * cube + b * x * e / k
            - b * b * t * t * t / 6.0 + 0.5 * b * p * t * t - 0.5 * p * p * t)


cdef inline double _value_pos(double x, double t, double p, double a, double b) noexcept nogil:
    cdef double atp, btp, f3, f4, s
    if x >= p * t + 0.5 * a * t * t:
        atp = a * t + p
        return p * p * p / (6.0 * a) - atp * atp * atp / (6.0 * a) + x * atp
    if x >= 0.0:
        f3 = _f3_pos(x, t, p, a, b)
        f4 = sqrt(8.0 * a * x * x * x) / 3.0 - p * p * p / (6.0 * b)
        return f3 if f3 >= f4 else f4
    s = t - p / b
    if s < 0.0 or x < -0.5 * b * s * s:
        btp = b * t - p
        return -p * p * p / (6.0 * b) - btp * btp * btp / (6.0 * b) - x * btp
    return sqrt(-8.0 * b * x * x * x) / 3.0 - p * p * p / (6.0 * b)


cdef inline double _value(double x, double t, double p, double a, double b) noexcept nogil:
    if t == 0.0:
        return p * x
    if p < 0.0:
        return _value_pos(-x, t, -p, b, a)
    return _value_pos(x, t, p, a, b)


cdef inline double _f3_dp(double x, double t, double p, double a, double b) noexcept nogil:
    cdef double k = a + 2.0 * b
    cdef double e = p - b * t
    cdef double sq = _guarded_sqrt(e * e + 2.0 * x * k, e * e)
    cdef double g
    if e > 0.0:
        g = e * 2.0 * x * k / (sq + e)
    else:
        g = e * (sq - e)
    return (a + b) / (k * k) * g + b * x / k + 0.5 * b * t * t - p * t


cdef inline double _value_dp_pos(double x, double t, double p, double a, double b) noexcept nogil:
    cdef double s
    if x >= p * t + 0.5 * a * t * t:
        return -0.5 * a * t * t - p * t + x
    s = t - p / b
    if x >= 0.0:
        if s >= 0.0 and x < 0.5 * a * s * s:
            return -p * p / (2.0 * b)
        return _f3_dp(x, t, p, a, b)
    if s < 0.0 or x < -0.5 * b * s * s:
        return 0.5 * b * t * t - p * t + x
    return -p * p / (2.0 * b)


cdef inline double _value_dp(double x, double t, double p, double a, double b) noexcept nogil:
    if t == 0.0:
        return x
    if p < 0.0:
        return -_value_dp_pos(-x, t, -p, b, a)
    return _value_dp_pos(x, t, p, a, b)


cdef inline double _p3_residual(double x, double t, double p, double a, double b,
                                double c, double lam) noexcept nogil:
    return -_f3_dp(x, t, p, a, b) + lam * (p - c)


cdef inline double _p3_slope(double x, double t, double p, double a, double b,
                             double lam) noexcept nogil:
    cdef double k = a + 2.0 * b
    cdef double d = b * t - p
    cdef double q = d * d + 2.0 * x * k
    cdef double sq = sqrt(q) if q > 0.0 else 0.0
    cdef double frac = (d * d + x * k) / sq if sq > 0.0 else 0.0
    return -2.0 * (a + b) / (k * k) * (d + frac) + t + lam


cdef struct NewtonOut:
    double p
    int iters
    bint converged


cdef NewtonOut _newton_p3(double x, double t, double a, double b, double c, double lam,
                          double tol, int max_iter, int fixed_iter, double p_init) noexcept nogil:
    cdef NewtonOut out
    cdef double lo = x / t - 0.5 * a * t
    cdef double alt = b * t - b * sqrt(2.0 * x / a)
    if alt > lo:
        lo = alt
    if lo < 0.0:
        lo = 0.0
    cdef double hi = b * t + fabs(c) + 1.0
    if hi < lo:
        hi = lo
    cdef double r = _p3_residual(x, t, lo, a, b, c, lam)
    out.p = lo
    out.iters = 0
    out.converged = True
    if r >= 0.0 or hi == lo:
        return out
    cdef double r_hi = _p3_residual(x, t, hi, a, b, c, lam)
    cdef int grow = 0
    cdef double tmp
    while r_hi < 0.0 and grow < 64:
        tmp = hi
        hi = hi + 2.0 * (hi - lo) + 1.0
        lo = tmp
        r_hi = _p3_residual(x, t, hi, a, b, c, lam)
        grow += 1
    cdef double p = p_init if p_init == p_init else lo + 1.0
    if not (lo < p and p < hi):
        p = 0.5 * (lo + hi)
    cdef int n_steps = fixed_iter if fixed_iter > 0 else max_iter
    cdef bint converged = False
    cdef int it = 0
    cdef double slope, pn
    while it < n_steps:
        it += 1
        r = _p3_residual(x, t, p, a, b, c, lam)
        if r == 0.0:
            converged = True
            break
        if fixed_iter <= 0 and fabs(r) <= tol:
            converged = True
            break
        if r > 0.0:
            hi = p
        else:
            lo = p
        slope = _p3_slope(x, t, p, a, b, lam)
        if slope > 0.0:
            pn = p - r / slope
        else:
            pn = 0.5 * (lo + hi)
        if not (lo <= pn and pn <= hi):
            pn = 0.5 * (lo + hi)
        if fabs(pn - p) <= 4.0 * _EPS * (1.0 + fabs(p)):
            p = pn
            converged = True
            if fixed_iter <= 0:
                break
        p = pn
    if fixed_iter > 0:
        r = _p3_residual(x, t, p, a, b, c, lam)
        converged = converged or fabs(r) <= (tol if tol > 1e-10 else 1e-10)
    out.p = p
    out.iters = it
    out.converged = converged
    return out


cdef inline double _objective(double x, double t, double p, double a, double b,
                              double c, double lam) noexcept nogil:
    return -_value(x, t, p, a, b) + 0.5 * lam * (p - c) * (p - c)


cdef struct ProxOut:
    double p
    int cand
    int iters
    bint converged
    double p3


cdef ProxOut _prox(double x, double t, double a, double b, double c, double lam,
                   double tol, int max_iter, int fixed_iter, double p3_init) noexcept nogil:
    cdef ProxOut out
    cdef double tl = t + lam
    cdef double p1 = (-0.5 * a * t * t + x + lam * c) / tl
    cdef double p2 = (0.5 * b * t * t + x + lam * c) / tl
    cdef NewtonOut nw
    cdef double p3, p4, bl, al, o, best_obj
    if x >= 0.0:
        nw = _newton_p3(x, t, a, b, c, lam, tol, max_iter, fixed_iter, p3_init)
        p3 = nw.p
    else:
        nw = _newton_p3(-x, t, b, a, -c, lam, tol, max_iter, fixed_iter, -p3_init)
        p3 = -nw.p
    if c >= 0.0:
        bl = b * lam
        p4 = 2.0 * bl * c / (bl + sqrt(bl * bl + 2.0 * bl * c))
    else:
        al = a * lam
        p4 = 2.0 * al * c / (al + sqrt(al * al - 2.0 * al * c))
    out.p = p1
    out.cand = 1
    best_obj = _objective(x, t, p1, a, b, c, lam)
    o = _objective(x, t, p2, a, b, c, lam)
    if o < best_obj:
        out.p = p2
        out.cand = 2
        best_obj = o
    o = _objective(x, t, p3, a, b, c, lam)
    if o < best_obj:
        out.p = p3
        out.cand = 3
        best_obj = o
    o = _objective(x, t, p4, a, b, c, lam)
    if o < best_obj:
        out.p = p4
        out.cand = 4
        best_obj = o
    out.iters = nw.iters
    out.converged = nw.converged if out.cand == 3 else True
    out.p3 = p3
    return out


def _check(double v):
    if isnan(v):
        raise ArithmeticError("negative discriminant: point assigned to the wrong region")
    return v


def value(double x, double t, double p, double a, double b):
    """V(x, t; p, a, b); ``p < 0`` goes through the reflection."""
    return _check(_value(x, t, p, a, b))


def value_dp(double x, double t, double p, double a, double b):
    """Partial derivative of V with respect to p."""
    return _check(_value_dp(x, t, p, a, b))


def prox(double x, double t, double a, double b, double c, double lam,
         double tol=1e-12, int max_iter=50, int fixed_iter=0, double p3_init=NAN):
    """Minimizer of ``-V(x, t; p, a, b) + lam/2 (p - c)^2`` over p.

    Returns ``(p_star, candidate, newton_iterations, converged, p3)``.
    """
    cdef ProxOut r = _prox(x, t, a, b, c, lam, tol, max_iter, fixed_iter, p3_init)
    return _check(r.p), r.cand, r.iters, bool(r.converged), r.p3


def prox_many(const double[::1] x, double t, const double[::1] a, const double[::1] b,
              const double[::1] c, const double[::1] lam, double tol, int max_iter,
              int fixed_iter, const double[::1] p3_init, double[::1] out_p,
              double[::1] out_p3):
    """Componentwise ``prox`` over 1D arrays; returns (max_iters, all_converged)."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef int max_it = 0
    cdef bint ok = True
    cdef bint bad = False
    cdef ProxOut r
    with nogil:
        for i in range(n):
            r = _prox(x[i], t, a[i], b[i], c[i], lam[i], tol, max_iter, fixed_iter, p3_init[i])
            out_p[i] = r.p
            out_p3[i] = r.p3
            if r.iters > max_it:
                max_it = r.iters
            if not r.converged:
                ok = False
            if isnan(r.p):
                bad = True
    if bad:
        raise ArithmeticError("negative discriminant: point assigned to the wrong region")
    return max_it, bool(ok)


def value_sum(const double[::1] x, double t, const double[::1] p, const double[::1] a,
              const double[::1] b):
    cdef Py_ssize_t i
    cdef double total = 0.0
    with nogil:
        for i in range(x.shape[0]):
            total += _value(x[i], t, p[i], a[i], b[i])
    return _check(total)


def quadratic_batch(const double[:, ::1] X, const double[::1] T, const double[::1] a,
                    const double[::1] b, const double[::1] y, const double[::1] w,
                    double alpha, double tol, int max_iter, int fixed_iter,
                    double[::1] out_values):
    """Hopf values for ``Phi(x) = sum_i (x_i - y_i)^2 / (2 w_i) + alpha``.

    ``X`` is (N, n), ``T`` is (N,).  Writes into ``out_values`` and returns
    the total number of Newton iterations.
    """
    cdef Py_ssize_t j, i, N = X.shape[0], n = X.shape[1]
    cdef long total_it = 0
    cdef double t, acc, d, p
    cdef ProxOut r
    with nogil:
        for j in range(N):
            t = T[j]
            acc = 0.0
            if t == 0.0:
                for i in range(n):
                    d = X[j, i] - y[i]
                    acc += 0.5 * d * d / w[i]
                out_values[j] = acc + alpha
                continue
            for i in range(n):
                r = _prox(X[j, i], t, a[i], b[i], -y[i] / w[i], w[i], tol, max_iter,
                          fixed_iter, NAN)
                total_it += r.iters
                p = r.p
                acc += _value(X[j, i], t, p, a[i], b[i])
                acc -= 0.5 * w[i] * p * p + p * y[i]
            out_values[j] = acc + alpha
    return total_it


cdef inline double _secular(const double[::1] w, const double[::1] m, double mu) noexcept nogil:
    cdef Py_ssize_t i
    cdef double q, g = -1.0
    for i in range(w.shape[0]):
        q = m[i] + mu
        g += m[i] * w[i] * w[i] / (q * q)
    return g


def project_scaled(const double[::1] w, const double[::1] m, double tol, double[::1] out):
    """Projection onto ``{v : sum v_i^2 / m_i <= 1}``; see the Python reference."""
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double inside = 0.0, mu = 0.0, g, dg, q, mu_new, step, lo, hi, mid
    cdef int it = 0, k
    cdef bint ok = False
    with nogil:
        for i in range(n):
            inside += w[i] * w[i] / m[i]
        if inside <= 1.0:
            for i in range(n):
                out[i] = w[i]
        else:
            g = inside - 1.0
            while it < 100:
                it += 1
                dg = 0.0
                for i in range(n):
                    q = m[i] + mu
                    dg -= 2.0 * m[i] * w[i] * w[i] / (q * q * q)
                mu_new = mu - g / dg
                g = _secular(w, m, mu_new)
                step = mu_new - mu
                mu = mu_new
                if fabs(g) <= tol or fabs(step) <= 1e-16 * (1.0 + mu):
                    ok = fabs(g) <= tol or it > 1
                    break
            if not ok:
                lo = 0.0
                hi = 0.0
                for i in range(n):
                    hi += m[i] * w[i] * w[i]
                hi = sqrt(hi)
                for k in range(200):
                    mid = 0.5 * (lo + hi)
                    if _secular(w, m, mid) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo <= 1e-16 * (1.0 + hi):
                        break
                mu = 0.5 * (lo + hi)
                it = -1
            for i in range(n):
                out[i] = m[i] * w[i] / (m[i] + mu)
    return it


cdef struct _Entry:
    double ratio
    double num
    double den
    Py_ssize_t idx


cdef int _cmp_desc(const void* pa, const void* pb) noexcept nogil:
    cdef double ra = (<const _Entry*>pa).ratio
    cdef double rb = (<const _Entry*>pb).ratio
    if ra > rb:
        return -1
    if ra < rb:
        return 1
    return (<const _Entry*>pa).idx > (<const _Entry*>pb).idx


def prox_l1_squared(const double[::1] q, double mu, const double[::1] om, double[::1] out):
    """Weighted l1-squared prox by sort-and-scan; see the Python reference."""
    cdef Py_ssize_t i, k, n = q.shape[0]
    cdef double num = 0.0, den = 0.0, th, nxt, theta = 0.0, r
    cdef bint found = False
    cdef _Entry* e = <_Entry*>malloc(n * sizeof(_Entry))
    if e == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n):
            e[i].ratio = fabs(q[i]) / om[i]
            e[i].num = om[i] * fabs(q[i])
            e[i].den = om[i] * om[i]
            e[i].idx = i
        qsort(e, n, sizeof(_Entry), _cmp_desc)
        for k in range(n):
            num += e[k].num
            den += e[k].den
            th = mu * num / (1.0 + mu * den)
            nxt = e[k + 1].ratio if k + 1 < n else 0.0
            if e[k].ratio > th and nxt <= th:
                theta = th
                found = True
                break
        for i in range(n):
            if not found:
                out[i] = 0.0
            else:
                r = fabs(q[i]) - theta * om[i]
                out[i] = copysign(r, q[i]) if r > 0.0 else 0.0
    free(e)
    return theta


def new_output(Py_ssize_t n):
    return np.empty(n, dtype=np.float64)
