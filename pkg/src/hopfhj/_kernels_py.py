"""Pure-Python scalar kernels.

Reference implementation of the hot inner loops: the two-slope 1D value
function ``V(x, t; p, a, b)``, its p-derivative, and the proximal solver
``argmin_p -V(x, t; p, a, b) + lam/2 (p - c)^2``.  ``_kernels.pyx`` mirrors
this module statement for statement; the two are kept in lock step and the
test suite checks them against each other.
"""

import math

import numpy as np

NAME = "python"

_EPS = 2.220446049250313e-16
_SQRT_SLACK = 1e-12

CAND_P1 = 1
CAND_P2 = 2
CAND_P3 = 3
CAND_P4 = 4


def _guarded_sqrt(d, scale):
    if d >= 0.0:
        return math.sqrt(d)
    if d >= -_SQRT_SLACK * (1.0 + scale):
        return 0.0
    raise ArithmeticError(
        "negative discriminant %r: point assigned to the wrong region" % d
    )


def _f3_pos(x, t, p, a, b):
    # x >= 0, p >= 0
    k = a + 2.0 * b
    e = p - b * t
    sq = _guarded_sqrt(e * e + 2.0 * x * k, e * e)
    if e > 0.0:
        # sqrt(D)^3 - e^3 without cancellation
        cube = 2.0 * x * k / (sq + e) * (sq * sq + sq * e + e * e)
    else:
        cube = sq * sq * sq - e * e * e
    return ((a + b) / (3.0 * k * k) * cube + b * x * e / k
            - b * b * t * t * t / 6.0 + 0.5 * b * p * t * t - 0.5 * p * p * t)


def _value_pos(x, t, p, a, b):
    # p >= 0, t > 0
    if x >= p * t + 0.5 * a * t * t:
        atp = a * t + p
        return p * p * p / (6.0 * a) - atp * atp * atp / (6.0 * a) + x * atp
    if x >= 0.0:
        f3 = _f3_pos(x, t, p, a, b)
        f4 = math.sqrt(8.0 * a * x * x * x) / 3.0 - p * p * p / (6.0 * b)
        return f3 if f3 >= f4 else f4
    s = t - p / b
    if s < 0.0 or x < -0.5 * b * s * s:
        btp = b * t - p
        return -p * p * p / (6.0 * b) - btp * btp * btp / (6.0 * b) - x * btp
    return math.sqrt(-8.0 * b * x * x * x) / 3.0 - p * p * p / (6.0 * b)


def value(x, t, p, a, b):
    """V(x, t; p, a, b); ``p < 0`` goes through the reflection."""
    if t == 0.0:
        return p * x
    if p < 0.0:
        return _value_pos(-x, t, -p, b, a)
    return _value_pos(x, t, p, a, b)


def _f3_dp(x, t, p, a, b):
    k = a + 2.0 * b
    e = p - b * t
    sq = _guarded_sqrt(e * e + 2.0 * x * k, e * e)
    if e > 0.0:
        g = e * 2.0 * x * k / (sq + e)
    else:
        g = e * (sq - e)
    return (a + b) / (k * k) * g + b * x / k + 0.5 * b * t * t - p * t


def _value_dp_pos(x, t, p, a, b):
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


def value_dp(x, t, p, a, b):
    """Partial derivative of V with respect to p."""
    if t == 0.0:
        return x
    if p < 0.0:
        return -_value_dp_pos(-x, t, -p, b, a)
    return _value_dp_pos(x, t, p, a, b)


def _p3_residual(x, t, p, a, b, c, lam):
    return -_f3_dp(x, t, p, a, b) + lam * (p - c)


def _p3_slope(x, t, p, a, b, lam):
    k = a + 2.0 * b
    d = b * t - p
    sq = math.sqrt(max(d * d + 2.0 * x * k, 0.0))
    frac = (d * d + x * k) / sq if sq > 0.0 else 0.0
    return -2.0 * (a + b) / (k * k) * (d + frac) + t + lam


def _newton_p3(x, t, a, b, c, lam, tol, max_iter, fixed_iter, p_init):
    """Root of the Omega_3 stationarity equation for x >= 0.

    Returns ``(p3, iterations, converged)``.
    """
    lo = max(x / t - 0.5 * a * t, b * t - b * math.sqrt(2.0 * x / a), 0.0)
    hi = max(b * t + abs(c) + 1.0, lo)
    r = _p3_residual(x, t, lo, a, b, c, lam)
    if r >= 0.0 or hi == lo:
        return lo, 0, True
    r_hi = _p3_residual(x, t, hi, a, b, c, lam)
    grow = 0
    while r_hi < 0.0 and grow < 64:
        lo, hi = hi, hi + 2.0 * (hi - lo) + 1.0
        r_hi = _p3_residual(x, t, hi, a, b, c, lam)
        grow += 1
    p = p_init if p_init == p_init else lo + 1.0
    if not lo < p < hi:
        p = 0.5 * (lo + hi)
    n_steps = fixed_iter if fixed_iter > 0 else max_iter
    converged = False
    it = 0
    while it < n_steps:
        it += 1
        r = _p3_residual(x, t, p, a, b, c, lam)
        if r == 0.0:
            converged = True
            break
        if fixed_iter <= 0 and abs(r) <= tol:
            converged = True
            break
        if r > 0.0:
            hi = p
        else:
            lo = p
        slope = _p3_slope(x, t, p, a, b, lam)
        pn = p - r / slope if slope > 0.0 else 0.5 * (lo + hi)
        if not lo <= pn <= hi:
            pn = 0.5 * (lo + hi)
        if abs(pn - p) <= 4.0 * _EPS * (1.0 + abs(p)):
            p = pn
            converged = True
            if fixed_iter <= 0:
                break
        p = pn
    if fixed_iter > 0:
        r = _p3_residual(x, t, p, a, b, c, lam)
        converged = converged or abs(r) <= max(tol, 1e-10)
    return p, it, converged


def _objective(x, t, p, a, b, c, lam):
    return -value(x, t, p, a, b) + 0.5 * lam * (p - c) * (p - c)


def prox(x, t, a, b, c, lam, tol=1e-12, max_iter=50, fixed_iter=0,
         p3_init=float("nan")):
    """Minimizer of ``-V(x, t; p, a, b) + lam/2 (p - c)^2`` over p.

    Returns ``(p_star, candidate, newton_iterations, converged, p3)``.
    """
    tl = t + lam
    p1 = (-0.5 * a * t * t + x + lam * c) / tl
    p2 = (0.5 * b * t * t + x + lam * c) / tl
    if x >= 0.0:
        p3, iters, conv = _newton_p3(x, t, a, b, c, lam, tol, max_iter,
                                     fixed_iter, p3_init)
    else:
        q, iters, conv = _newton_p3(-x, t, b, a, -c, lam, tol, max_iter,
                                    fixed_iter, -p3_init)
        p3 = -q
    if c >= 0.0:
        bl = b * lam
        p4 = 2.0 * bl * c / (bl + math.sqrt(bl * bl + 2.0 * bl * c))
    else:
        al = a * lam
        p4 = 2.0 * al * c / (al + math.sqrt(al * al - 2.0 * al * c))
    best = p1
    cand = CAND_P1
    best_obj = _objective(x, t, p1, a, b, c, lam)
    for tag, q in ((CAND_P2, p2), (CAND_P3, p3), (CAND_P4, p4)):
        o = _objective(x, t, q, a, b, c, lam)
        if o < best_obj:
            best, best_obj, cand = q, o, tag
    if cand != CAND_P3:
        conv = True
    return best, cand, iters, conv, p3


def prox_many(x, t, a, b, c, lam, tol, max_iter, fixed_iter, p3_init,
              out_p, out_p3):
    """Componentwise ``prox`` over 1D arrays; returns (max_iters, all_converged)."""
    n = x.shape[0]
    max_it = 0
    ok = True
    for i in range(n):
        p, _, it, conv, p3 = prox(float(x[i]), t, float(a[i]), float(b[i]),
                                  float(c[i]), float(lam[i]), tol, max_iter,
                                  fixed_iter, float(p3_init[i]))
        out_p[i] = p
        out_p3[i] = p3
        if it > max_it:
            max_it = it
        ok = ok and conv
    return max_it, ok


def value_sum(x, t, p, a, b):
    total = 0.0
    for i in range(x.shape[0]):
        total += value(float(x[i]), t, float(p[i]), float(a[i]), float(b[i]))
    return total


def quadratic_batch(X, T, a, b, y, w, alpha, tol, max_iter, fixed_iter,
                    out_values):
    """Hopf values for ``Phi(x) = sum_i (x_i - y_i)^2 / (2 w_i) + alpha``.

    ``X`` is (N, n), ``T`` is (N,).  Writes into ``out_values`` and returns
    the total number of Newton iterations.
    """
    N, n = X.shape
    total_it = 0
    nan = float("nan")
    for j in range(N):
        t = float(T[j])
        acc = 0.0
        if t == 0.0:
            for i in range(n):
                d = float(X[j, i]) - float(y[i])
                acc += 0.5 * d * d / float(w[i])
            out_values[j] = acc + alpha
            continue
        for i in range(n):
            wi = float(w[i])
            yi = float(y[i])
            xi = float(X[j, i])
            p, _, it, _, _ = prox(xi, t, float(a[i]), float(b[i]), -yi / wi,
                                  wi, tol, max_iter, fixed_iter, nan)
            total_it += it
            acc += value(xi, t, p, float(a[i]), float(b[i]))
            acc -= 0.5 * wi * p * p + p * yi
        out_values[j] = acc + alpha
    return total_it


def project_scaled(w, m, tol, out):
    """Projection onto ``{v : sum v_i^2 / m_i <= 1}`` (``m > 0``).

    Solves ``sum m_i w_i^2 / (m_i + mu)^2 = 1`` for the multiplier by
    Newton from ``mu = 0`` (monotone, the function being convex and
    decreasing), with bisection if Newton stalls.  Returns the number of
    Newton steps, or -1 if bisection was needed.
    """
    n = w.shape[0]
    inside = 0.0
    for i in range(n):
        inside += w[i] * w[i] / m[i]
    if inside <= 1.0:
        for i in range(n):
            out[i] = w[i]
        return 0
    mu = 0.0
    g = inside - 1.0
    it = 0
    ok = False
    while it < 100:
        it += 1
        dg = 0.0
        for i in range(n):
            q = m[i] + mu
            dg -= 2.0 * m[i] * w[i] * w[i] / (q * q * q)
        mu_new = mu - g / dg
        g = -1.0
        for i in range(n):
            q = m[i] + mu_new
            g += m[i] * w[i] * w[i] / (q * q)
        step = mu_new - mu
        mu = mu_new
        if abs(g) <= tol or abs(step) <= 1e-16 * (1.0 + mu):
            ok = abs(g) <= tol or it > 1
            break
    if not ok:
        lo = 0.0
        hi = 0.0
        for i in range(n):
            hi += m[i] * w[i] * w[i]
        hi = math.sqrt(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            g = -1.0
            for i in range(n):
                q = m[i] + mid
                g += m[i] * w[i] * w[i] / (q * q)
            if g > 0.0:
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


def prox_l1_squared(q, mu, om, out):
    """``argmin_w mu/2 (sum om_i |w_i|)^2 + |w - q|^2 / 2`` into ``out``.

    Sort by ``|q_i| / om_i`` descending, then scan for the active set whose
    threshold ``theta`` satisfies ``r_k > theta >= r_{k+1}``; returns theta.
    """
    n = q.shape[0]
    ratio = np.abs(q) / om
    order = np.argsort(-ratio, kind="stable")
    num = 0.0
    den = 0.0
    theta = 0.0
    found = False
    for k in range(n):
        i = order[k]
        num += om[i] * abs(q[i])
        den += om[i] * om[i]
        th = mu * num / (1.0 + mu * den)
        nxt = ratio[order[k + 1]] if k + 1 < n else 0.0
        if ratio[i] > th and nxt <= th:
            theta = th
            found = True
            break
    for i in range(n):
        if not found:
            out[i] = 0.0
        else:
            r = abs(q[i]) - theta * om[i]
            out[i] = math.copysign(r, q[i]) if r > 0.0 else 0.0
    return theta


def new_output(n):
    return np.empty(n, dtype=np.float64)
