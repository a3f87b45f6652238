"""Initial costs Phi with their conjugates and proximal operators.

Every convex cost exposes the same duck-typed surface, which is all the
solvers rely on:

``evaluate(x)``
    Phi(x).
``conjugate(p)``
    Phi*(p) (may be ``inf`` for indicator conjugates).
``prox_conjugate(z, lam)``
    argmin_v Phi*(v) + lam/2 ||v - z||^2, i.e. the prox of Phi*/lam.
``prox_scaled(z, lam)``
    argmin_v Phi(lam v) + lam/2 ||v - z||^2, the prox of x -> Phi(lam x)/lam.
``transformed(P, u0)``
    The cost y -> Phi(P y + u0) in the same family, when closed under it.

The two prox forms are tied by Moreau's identity (``moreau_v_update``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

_INDICATOR_SLACK = 1e-9


def _vec(v, name="vector"):
    arr = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _check_dim(v, n):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"expected a vector of length {n}, got shape {v.shape}")
    return v


def _is_diagonal(P):
    return np.count_nonzero(P - np.diag(np.diag(P))) == 0


def moreau_v_update(z, prox_phi_scaled, lam: float):
    """Prox of Phi*/lam at ``z`` from the prox of x -> Phi(lam x)/lam.

    ``prox_phi_scaled(z, lam)`` must return argmin_v Phi(lam v) + lam/2 ||v - z||^2.
    """
    z = np.asarray(z, dtype=np.float64)
    return z - prox_phi_scaled(z, lam)


def conjugate_quadratic(p, y, weight: float, offset: float = 0.0) -> float:
    """Conjugate of ``Phi(x) = ||x - y||^2 / (2 weight) + offset``.

    ``weight`` may also be a per-coordinate vector, in which case the
    quadratic is diagonal.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"dimension mismatch: p {p.shape} vs y {y.shape}")
    w = np.broadcast_to(np.asarray(weight, dtype=np.float64), p.shape)
    if np.any(w <= 0):
        raise ValueError("weight must be positive")
    q = p + y / w
    return float(np.sum(0.5 * w * q * q - y * y / (2.0 * w)) - offset)


@dataclass(frozen=True)
class LinearCost:
    """``Phi(x) = <slope, x> + offset``; its conjugate is an indicator of ``{slope}``."""

    slope: np.ndarray
    offset: float = 0.0
    kind = "linear"

    def __post_init__(self):
        object.__setattr__(self, "slope", _vec(self.slope, "slope"))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self):
        return self.slope.size

    def evaluate(self, x):
        return float(self.slope @ _check_dim(x, self.n)) + self.offset

    def conjugate(self, p):
        p = _check_dim(p, self.n)
        scale = 1.0 + float(np.max(np.abs(self.slope)))
        if np.max(np.abs(p - self.slope)) <= _INDICATOR_SLACK * scale:
            return -self.offset
        return math.inf

    def prox_conjugate(self, z, lam):
        _check_dim(z, self.n)
        return self.slope.copy()

    def prox_scaled(self, z, lam):
        return _check_dim(z, self.n) - self.slope

    def gradient(self, x):
        _check_dim(x, self.n)
        return self.slope.copy()

    def transformed(self, P, u0):
        return LinearCost(P.T @ self.slope, self.offset + float(self.slope @ u0))


@dataclass(frozen=True)
class QuadraticCost:
    """``Phi(x) = sum_i (x_i - y_i)^2 / (2 w_i) + offset``.

    ``weight`` is a positive scalar (the usual case) or a positive vector.
    """

    center: np.ndarray
    weight: float | np.ndarray = 1.0
    offset: float = 0.0
    kind = "quadratic"

    def __post_init__(self):
        center = _vec(self.center, "center")
        w = np.asarray(self.weight, dtype=np.float64)
        if w.ndim > 1 or (w.ndim == 1 and w.size != center.size):
            raise ValueError("weight must be a scalar or match the center's length")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weight must be positive and finite")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "weight", float(w) if w.ndim == 0 else _vec(w, "weight"))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self):
        return self.center.size

    @property
    def weights(self) -> np.ndarray:
        """Per-coordinate weights as a vector."""
        return np.broadcast_to(np.asarray(self.weight, dtype=np.float64), (self.n,))

    def evaluate(self, x):
        d = _check_dim(x, self.n) - self.center
        return float(np.sum(d * d / (2.0 * self.weights))) + self.offset

    def conjugate(self, p):
        return conjugate_quadratic(_check_dim(p, self.n), self.center, self.weight, self.offset)

    def prox_conjugate(self, z, lam):
        w = self.weights
        return (lam * _check_dim(z, self.n) - self.center) / (w + lam)

    def prox_scaled(self, z, lam):
        w = self.weights
        return (w * _check_dim(z, self.n) + self.center) / (w + lam)

    def gradient(self, x):
        return (_check_dim(x, self.n) - self.center) / self.weights

    def transformed(self, P, u0):
        if _is_diagonal(P):
            d = np.diag(P)
            return QuadraticCost((self.center - u0) / d, self.weights / (d * d), self.offset)
        W = np.diag(self.weights)
        Pinv = np.linalg.inv(P)
        B = Pinv @ W @ Pinv.T
        return QuadraticFormCost(0.5 * (B + B.T), Pinv @ (self.center - u0), self.offset)


@dataclass(frozen=True, eq=False)
class QuadraticFormCost:
    """Non-separable quadratic given through its conjugate.

    ``Phi*(p) = p.B.p / 2 + <g, p> - offset`` with ``B`` symmetric positive
    definite, so ``Phi(x) = (x - g).B^{-1}.(x - g) / 2 + offset``.  Arises
    from a quadratic cost under a non-diagonal change of variables.
    """

    B: np.ndarray
    g: np.ndarray
    offset: float = 0.0
    kind = "quadratic_form"
    _eig: tuple = field(init=False, repr=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=np.float64)
        g = _vec(self.g, "g")
        if B.shape != (g.size, g.size):
            raise ValueError("B must be square and match g")
        evals, evecs = np.linalg.eigh(0.5 * (B + B.T))
        if evals[0] <= 0:
            raise ValueError("B must be positive definite")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "_eig", (evals, evecs))

    @property
    def n(self):
        return self.g.size

    def evaluate(self, x):
        evals, evecs = self._eig
        d = evecs.T @ (_check_dim(x, self.n) - self.g)
        return 0.5 * float(np.sum(d * d / evals)) + self.offset

    def conjugate(self, p):
        p = _check_dim(p, self.n)
        return 0.5 * float(p @ self.B @ p) + float(self.g @ p) - self.offset

    def prox_conjugate(self, z, lam):
        evals, evecs = self._eig
        rhs = evecs.T @ (lam * _check_dim(z, self.n) - self.g)
        return evecs @ (rhs / (evals + lam))

    def prox_scaled(self, z, lam):
        return _check_dim(z, self.n) - self.prox_conjugate(z, lam)

    def gradient(self, x):
        evals, evecs = self._eig
        d = evecs.T @ (_check_dim(x, self.n) - self.g)
        return evecs @ (d / evals)

    def transformed(self, P, u0):
        Pinv = np.linalg.inv(P)
        B = Pinv @ self.B @ Pinv.T
        return QuadraticFormCost(0.5 * (B + B.T), Pinv @ (self.g - u0), self.offset)


def _spd_eig(M):
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be a square matrix")
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
        raise ValueError("M must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("M must be positive definite") from exc
    if _is_diagonal(M):
        return M, np.diag(M).copy(), None
    evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
    return M, np.ascontiguousarray(evals), evecs


def _project_eig(z, evals, evecs, tol=1e-12):
    w = np.ascontiguousarray(z if evecs is None else evecs.T @ z)
    out = np.empty_like(w)
    kernels.project_scaled(w, evals, tol, out)
    return out if evecs is None else evecs @ out


def project_ellipsoid(z, M, tol: float = 1e-12):
    """Euclidean projection of ``z`` onto ``{v : <v, M^{-1} v> <= 1}``.

    Diagonal ``M`` is handled without factorization; otherwise the scalar
    multiplier equation is solved in the eigenbasis of ``M``.
    """
    M, evals, evecs = _spd_eig(M)
    z = _check_dim(z, M.shape[0])
    return _project_eig(z, evals, evecs, tol)


@dataclass(frozen=True, eq=False)
class EllipsoidNormCost:
    """``Phi(x) = sqrt(<x - center, M (x - center)>)``.

    The conjugate is the indicator of the ellipsoid ``<p, M^{-1} p> <= 1``
    plus ``<p, center>``.
    """

    M: np.ndarray
    center: np.ndarray | None = None
    tol: float = 1e-12
    kind = "ellipsoid_norm"
    _eig: tuple = field(init=False, repr=False)

    def __post_init__(self):
        M, evals, evecs = _spd_eig(self.M)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "_eig", (evals, evecs))
        c = np.zeros(M.shape[0]) if self.center is None else _vec(self.center, "center")
        if c.size != M.shape[0]:
            raise ValueError("center must match M")
        object.__setattr__(self, "center", c)

    @property
    def n(self):
        return self.M.shape[0]

    def _minv_quad(self, p):
        evals, evecs = self._eig
        w = p if evecs is None else evecs.T @ p
        return float(np.sum(w * w / evals))

    def evaluate(self, x):
        d = _check_dim(x, self.n) - self.center
        return math.sqrt(max(float(d @ self.M @ d), 0.0))

    def conjugate(self, p):
        p = _check_dim(p, self.n)
        if self._minv_quad(p) <= 1.0 + _INDICATOR_SLACK:
            return float(p @ self.center)
        return math.inf

    def prox_conjugate(self, z, lam):
        evals, evecs = self._eig
        zz = _check_dim(z, self.n) - self.center / lam
        return _project_eig(zz, evals, evecs, self.tol)

    def prox_scaled(self, z, lam):
        return _check_dim(z, self.n) - self.prox_conjugate(z, lam)

    def gradient(self, x):
        d = _check_dim(x, self.n) - self.center
        nrm = self.evaluate(x)
        return self.M @ d / nrm if nrm > 0 else np.zeros(self.n)

    def transformed(self, P, u0):
        Pinv = np.linalg.inv(P)
        Mt = P.T @ self.M @ P
        return EllipsoidNormCost(0.5 * (Mt + Mt.T), Pinv @ (self.center - u0), self.tol)


def prox_l1_squared(q, mu: float, weights=None):
    """argmin_w mu/2 (sum_i weights_i |w_i|)^2 + 1/2 ||w - q||^2.

    Exact: the solution soft-thresholds ``q`` at ``theta * weights_i``, and
    the active set is found by one sort and a linear scan.
    """
    q = np.ascontiguousarray(q, dtype=np.float64)
    om = np.ones_like(q) if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty_like(q)
    kernels.prox_l1_squared(q, float(mu), om, out)
    return out


def prox_shifted_l1_squared(z, shift, lam: float, weights=None):
    """argmin_v Phi(lam v) + lam/2 ||v - z||^2 for Phi(x) = (sum_i w_i |x_i - s_i|)^2 / 2."""
    z = np.asarray(z, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    if z.shape != shift.shape:
        raise ValueError(f"dimension mismatch: z {z.shape} vs shift {shift.shape}")
    if not lam > 0:
        raise ValueError("lam must be positive")
    w = prox_l1_squared(lam * z - shift, lam, weights)
    return (w + shift) / lam


@dataclass(frozen=True)
class ShiftedL1SquaredCost:
    """``Phi(x) = (sum_i w_i |x_i - shift_i|)^2 / 2`` (unit weights by default)."""

    shift: np.ndarray
    weights: np.ndarray | None = None
    kind = "shifted_l1_squared"

    def __post_init__(self):
        s = _vec(self.shift, "shift")
        object.__setattr__(self, "shift", s)
        if self.weights is not None:
            w = _vec(self.weights, "weights")
            if w.size != s.size or np.any(w <= 0):
                raise ValueError("weights must be positive and match shift")
            object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.shift.size

    def _w(self):
        return np.ones(self.n) if self.weights is None else self.weights

    def evaluate(self, x):
        d = _check_dim(x, self.n) - self.shift
        return 0.5 * float(np.sum(self._w() * np.abs(d))) ** 2

    def conjugate(self, p):
        p = _check_dim(p, self.n)
        return 0.5 * float(np.max(np.abs(p) / self._w())) ** 2 + float(p @ self.shift)

    def prox_scaled(self, z, lam):
        return prox_shifted_l1_squared(_check_dim(z, self.n), self.shift, lam, self.weights)

    def prox_conjugate(self, z, lam):
        return moreau_v_update(z, self.prox_scaled, lam)

    def gradient(self, x):
        d = _check_dim(x, self.n) - self.shift
        return float(np.sum(self._w() * np.abs(d))) * self._w() * np.sign(d)

    def transformed(self, P, u0):
        if not _is_diagonal(P):
            raise NotImplementedError(
                "shifted l1-squared costs support only diagonal transforms")
        d = np.diag(P)
        return ShiftedL1SquaredCost((self.shift - u0) / d, self._w() * np.abs(d))


@dataclass(frozen=True)
class MinOfConvexCost:
    """Pointwise minimum of convex branch costs; non-convex in general."""

    branches: tuple
    kind = "min_of_convex"

    def __post_init__(self):
        br = tuple(self.branches)
        if not br:
            raise ValueError("at least one branch is required")
        n = br[0].n
        if any(c.n != n for c in br):
            raise ValueError("all branches must share the dimension")
        object.__setattr__(self, "branches", br)

    @property
    def n(self):
        return self.branches[0].n

    def branch_values(self, x):
        return np.array([c.evaluate(x) for c in self.branches])

    def evaluate(self, x):
        return float(np.min(self.branch_values(x)))

    def transformed(self, P, u0):
        return MinOfConvexCost(tuple(c.transformed(P, u0) for c in self.branches))


class MinOfQuadraticsCost(MinOfConvexCost):
    """``Phi(x) = min_j ||x - y_j||^2 / 2 + alpha_j``."""

    kind = "min_of_quadratics"

    def __init__(self, centers, offsets):
        centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        offsets = np.asarray(offsets, dtype=np.float64).reshape(-1)
        if centers.shape[0] == 0:
            raise ValueError("at least one branch is required")
        if offsets.size != centers.shape[0]:
            raise ValueError("one offset per center is required")
        super().__init__(tuple(QuadraticCost(c, 1.0, float(o)) for c, o in zip(centers, offsets)))

    @property
    def centers(self):
        return np.array([c.center for c in self.branches])

    @property
    def offsets(self):
        return np.array([c.offset for c in self.branches])


def minplus_components(cost: MinOfConvexCost) -> list:
    """The convex branches of a min-plus cost, ready for per-branch solves."""
    if not cost.branches:
        raise ValueError("empty min-plus cost")
    return list(cost.branches)


def reference_minplus_example(n: int = 10) -> MinOfQuadraticsCost:
    """The three-quadratic min-plus cost used in the reference experiments (n >= 3)."""
    if n < 3:
        raise ValueError("the three-branch example needs n >= 3")
    y = np.zeros((3, n))
    y[0, 0] = -2.0
    y[1, :3] = (2.0, -2.0, -1.0)
    y[2, 1] = 2.0
    return MinOfQuadraticsCost(y, [-0.5, 0.0, -1.0])


def reference_ellipsoid_diagonal(n: int) -> np.ndarray:
    """Diagonal ``(1, 8, 3, 5, 1, ..., 1)`` of the reference ellipsoid experiments."""
    m = np.ones(n)
    head = (1.0, 8.0, 3.0, 5.0)[:n]
    m[:len(head)] = head
    return m


def is_convex_cost(cost) -> bool:
    return not isinstance(cost, MinOfConvexCost)


def cost_to_dict(cost) -> dict:
    if isinstance(cost, LinearCost):
        return {"type": "linear", "slope": cost.slope.tolist(), "offset": cost.offset}
    if isinstance(cost, QuadraticCost):
        w = cost.weight if np.ndim(cost.weight) == 0 else list(cost.weight)
        return {"type": "quadratic", "center": cost.center.tolist(), "weight": w,
                "offset": cost.offset}
    if isinstance(cost, EllipsoidNormCost):
        return {"type": "ellipsoid_norm", "M": cost.M.tolist(), "center": cost.center.tolist()}
    if isinstance(cost, ShiftedL1SquaredCost):
        d = {"type": "shifted_l1_squared", "shift": cost.shift.tolist()}
        if cost.weights is not None:
            d["weights"] = cost.weights.tolist()
        return d
    if isinstance(cost, MinOfQuadraticsCost):
        return {"type": "min_of_quadratics", "centers": cost.centers.tolist(),
                "offsets": cost.offsets.tolist()}
    raise TypeError(f"cannot serialise {type(cost).__name__}")


def cost_from_dict(d: dict, n: int):
    """Build a cost from its JSON form (``type`` tag plus fields)."""
    kind = d.get("type")
    if kind == "linear":
        return LinearCost(_check_dim(d["slope"], n), d.get("offset", 0.0))
    if kind == "quadratic":
        center = d.get("center", [0.0] * n)
        if np.ndim(center) == 0:
            center = [float(center)] * n
        return QuadraticCost(_check_dim(center, n), d.get("weight", 1.0), d.get("offset", 0.0))
    if kind == "ellipsoid_norm":
        M = reference_ellipsoid_diagonal(n) if d.get("preset") == "reference" else d["M"]
        if np.ndim(M) == 1:
            M = np.diag(_check_dim(M, n))
        center = d.get("center")
        return EllipsoidNormCost(np.asarray(M, dtype=float), center)
    if kind == "shifted_l1_squared":
        shift = d.get("shift", [0.0] * n)
        if np.ndim(shift) == 0:
            shift = [float(shift)] * n
        return ShiftedL1SquaredCost(_check_dim(shift, n), d.get("weights"))
    if kind == "min_of_quadratics":
        if d.get("preset") == "reference":
            return reference_minplus_example(n)
        centers = np.asarray(d["centers"], dtype=float)
        if centers.ndim != 2 or centers.shape[1] != n:
            raise ValueError("centers must be an m x n array")
        return MinOfQuadraticsCost(centers, d["offsets"])
    raise ValueError(f"unknown cost type {kind!r}")
