"""Slices of the immersion, totally real and isometric relations and their c-shaped loop families.

Complex targets use interleaved real coordinates (Re z1, Im z1, Re z2, ...),
so the standard J rotates each consecutive pair by a quarter turn.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import pattern as pat
from .chart import ChartMap, MetricField
from .corrugation import LoopFamily, Submersion
from .errors import ContractError, DegenerateError, DomainError, ShapeError

Array = np.ndarray
MEMBERSHIP_TOL = 1e-9
RANK_TOL = 1e-10
SHORT_TOL = 1e-12


def standard_j(m: int) -> Array:
    """Matrix of multiplication by i on C^m in interleaved coordinates."""
    J = np.zeros((2 * m, 2 * m))
    for k in range(m):
        J[2 * k + 1, 2 * k] = 1.0
        J[2 * k, 2 * k + 1] = -1.0
    return J


def apply_j(v: Array) -> Array:
    """J v along the last axis."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def orthonormal_span(vectors: Array, expected_rank: int | None = None, tol: float = RANK_TOL) -> Array:
    """Orthonormal basis (columns) of the span of the columns of ``vectors``, batched.

    With ``expected_rank`` given, fails with DegenerateError when the span is smaller.
    """
    A = np.asarray(vectors, dtype=float)
    if A.shape[-1] == 0:
        return A
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    k = A.shape[-1] if expected_rank is None else expected_rank
    scale = np.maximum(s[..., :1], 1.0)
    if k > 0 and np.any(s[..., k - 1] <= tol * scale[..., 0]):
        raise DegenerateError("spanning vectors are rank deficient")
    return U[..., :, :k]


def project(Q: Array, v: Array) -> Array:
    """Orthogonal projection of v onto the column span of the orthonormal Q."""
    return np.einsum("...nk,...k->...n", Q, np.einsum("...nk,...n->...k", Q, v))


def kernel_basis(lam: Array) -> Array:
    """Orthonormal basis of ker(lam) as columns, shape (..., m, m-1)."""
    lam = np.asarray(lam, dtype=float)
    _, _, vt = np.linalg.svd(lam[..., None, :])
    return np.swapaxes(vt[..., 1:, :], -1, -2)


def oriented_normal(L: Array) -> Array:
    """Unit normal nu to the column span of L (n = m+1) with det[L | nu] > 0."""
    L = np.asarray(L, dtype=float)
    n, m = L.shape[-2:]
    if n != m + 1:
        raise ShapeError("an oriented normal needs n = m + 1")
    U, s, _ = np.linalg.svd(L, full_matrices=True)
    if np.any(s[..., -1] <= RANK_TOL * np.maximum(s[..., 0], 1.0)):
        raise DegenerateError("L is not of full rank")
    nu = U[..., :, -1]
    sign = np.sign(np.linalg.det(np.concatenate([L, nu[..., None]], axis=-1)))
    return nu * sign[..., None]


@dataclass(frozen=True)
class JetPoint:
    """A 1-jet (x, y, L) with L an n x m matrix."""

    x: Array
    y: Array
    L: Array

    def __post_init__(self):
        for name in ("x", "y", "L"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"jet component {name} must be finite")
            object.__setattr__(self, name, arr)
        if self.L.ndim != 2 or self.L.shape != (self.y.shape[-1], self.x.shape[-1]):
            raise ShapeError("L must be n x m")

    @property
    def m(self) -> int:
        return self.L.shape[1]

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def modified(self, v, lam, u) -> Array:
        """L_v = L + (v - L u) (x) lam."""
        lam = np.asarray(lam, dtype=float)
        return self.L + np.outer(np.asarray(v, dtype=float) - self.L @ np.asarray(u, dtype=float), lam)


@dataclass(frozen=True)
class SliceQuery:
    """A jet together with a covector lam and a vector u with lam(u) = 1."""

    sigma: JetPoint
    lam: Array
    u: Array

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if lam.shape != (self.sigma.m,) or u.shape != (self.sigma.m,):
            raise ShapeError("lam and u must live on the source space")
        if abs(float(lam @ u) - 1.0) > 1e-10:
            raise ContractError("lam(u) must equal 1")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "u", u)

    @property
    def kernel(self) -> Array:
        return kernel_basis(self.lam)

    @property
    def Lu(self) -> Array:
        return self.sigma.L @ self.u


def _unit_distance(Q: Array, v: Array) -> float:
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return 0.0
    v = v / nv
    return float(np.linalg.norm(v - project(Q, v))) if Q.shape[-1] else 1.0


def immersion_plane(q: SliceQuery) -> Array:
    """Orthonormal basis of P = L(ker lam) for a codimension-one jet."""
    L = q.sigma.L
    if q.sigma.n != q.sigma.m + 1:
        raise ContractError("codimension-one slices need n = m + 1")
    if np.linalg.matrix_rank(L, tol=RANK_TOL * max(1.0, np.linalg.norm(L))) < q.sigma.m:
        raise ContractError("L is rank deficient")
    return orthonormal_span(L @ q.kernel, q.sigma.m - 1)


def totally_real_plane(q: SliceQuery) -> Array:
    """Orthonormal basis of P = L(ker lam) + J L(ker lam)."""
    L = q.sigma.L
    m = q.sigma.m
    if q.sigma.n != 2 * m:
        raise ContractError("totally real slices need n = 2m")
    LJL = np.concatenate([L, standard_j(m) @ L], axis=1)
    if np.linalg.matrix_rank(LJL, tol=RANK_TOL * max(1.0, np.linalg.norm(L))) < 2 * m:
        raise ContractError("L is not totally real")
    B = L @ q.kernel
    return orthonormal_span(np.concatenate([B, standard_j(m) @ B], axis=1), 2 * m - 2)


def immersion_slice_contains(q: SliceQuery, v) -> bool:
    """v lies in the slice iff it is off P (distance of v/|v| to P above 1e-9)."""
    return _unit_distance(immersion_plane(q), v) > MEMBERSHIP_TOL


def totally_real_slice_contains(q: SliceQuery, v) -> bool:
    return _unit_distance(totally_real_plane(q), v) > MEMBERSHIP_TOL


@dataclass(frozen=True)
class SliceSphere:
    """Sphere of radius ``radius`` about ``center`` inside center + span(plane_basis)."""

    center: Array
    radius: float
    plane_basis: Array

    def point(self, coeffs) -> Array:
        """Point of the sphere in the direction of plane coordinates ``coeffs``."""
        c = np.asarray(coeffs, dtype=float)
        c = c / np.linalg.norm(c, axis=-1, keepdims=True)
        return self.center + self.radius * np.einsum("nk,...k->...n", self.plane_basis, c)


def isometric_slice(q: SliceQuery, mu) -> SliceSphere:
    """The slice of the isometric relation: {|v|^2 = mu(u,u)} cut by the affine plane Pi."""
    mu = np.asarray(mu, dtype=float)
    m, n = q.sigma.m, q.sigma.n
    if mu.shape != (m, m):
        raise ShapeError("mu must be m x m")
    K = q.kernel
    B = q.sigma.L @ K
    rhs = K.T @ mu @ q.u
    if m > 1:
        center = B @ np.linalg.solve(B.T @ B, rhs)
        _, s, vt = np.linalg.svd(B.T, full_matrices=True)
        if s.size and s[-1] <= RANK_TOL * max(1.0, s[0]):
            raise DegenerateError("L restricted to ker lam is not injective")
        plane = vt[m - 1:].T
    else:
        center = np.zeros(n)
        plane = np.eye(n)
    r2 = float(q.u @ mu @ q.u - center @ center)
    if r2 < -SHORT_TOL:
        raise DomainError("not short: mu(u,u) is below the squared center norm")
    return SliceSphere(center, float(np.sqrt(max(r2, 0.0))), plane)


@dataclass
class IsometricSubsolution:
    """Per-point data of the isometric subsolution (batched over leading axes)."""

    v: Array
    r: Array
    t_vec: Array
    alpha: Array
    dfu: Array
    dfu_p: Array
    j0_argument: Array


def _as_points(x) -> Array:
    x = np.asarray(x, dtype=float)
    return x


def isometric_subsolution(f: ChartMap, mu: MetricField, sub: Submersion, x, totally_real: bool = False,
                          jac: Array | None = None) -> IsometricSubsolution:
    """v = [df u]^P + r t with r^2 = mu(u,u) - |[df u]^P|^2 and alpha = J0^{-1}(|[df u]^{P-perp}| / r).

    P = df(ker d pi), plus its J-image when ``totally_real``.  The excess
    mu(u,u) - |df u|^2 is clipped to 0 when it is within round-off, so that a
    vanishing increase gives alpha = 0 exactly.
    """
    x = _as_points(x)
    D = f.jacobian(x) if jac is None else np.asarray(jac, dtype=float)
    K = sub.kernel_basis(x)
    K = np.broadcast_to(K, x.shape[:-1] + K.shape[-2:])
    u = np.broadcast_to(sub.u(x), x.shape)
    B = np.einsum("...nm,...mk->...nk", D, K)
    if totally_real:
        if f.n != 2 * f.m:
            raise ShapeError("totally real steps need n = 2m")
        B = np.concatenate([B, apply_j(np.swapaxes(B, -1, -2)).swapaxes(-1, -2)], axis=-1)
    Q = orthonormal_span(B, B.shape[-1])
    dfu = np.einsum("...nm,...m->...n", D, u)
    dfu_p = project(Q, dfu) if Q.shape[-1] else np.zeros_like(dfu)
    perp = dfu - dfu_p
    nperp = np.linalg.norm(perp, axis=-1)
    if np.any(nperp <= RANK_TOL * np.maximum(np.linalg.norm(dfu, axis=-1), 1.0)):
        raise DegenerateError("df(u) has no component off P")
    M = np.asarray(mu(x), dtype=float)
    muu = np.einsum("...i,...ij,...j->...", u, M, u)
    dfu2 = np.sum(dfu * dfu, axis=-1)
    excess = muu - dfu2
    tol = SHORT_TOL * np.maximum(dfu2, 1.0) * 64
    if np.any(excess < -tol):
        raise DomainError("metric is not short in the u-direction")
    excess = np.where(excess <= tol, 0.0, excess)
    r = np.sqrt(nperp**2 + excess)
    t_vec = perp / nperp[..., None]
    arg = np.where(excess == 0.0, 1.0, np.minimum(nperp / r, 1.0))
    alpha = pat.j0_inverse(arg)
    v = dfu_p + r[..., None] * t_vec
    return IsometricSubsolution(v, r, t_vec, np.asarray(alpha), dfu, dfu_p, arg)


def _normal_field(normal, f: ChartMap, X: Array, D: Array, t_vec: Array, totally_real: bool) -> Array:
    if totally_real or normal == "J":
        return apply_j(t_vec)
    if callable(normal):
        nv = np.asarray(normal(X), dtype=float)
        return nv / np.linalg.norm(nv, axis=-1, keepdims=True)
    if normal is None:
        if f.n != f.m + 1:
            raise ContractError("a normal field is required outside codimension one")
        return oriented_normal(D)
    raise ValueError("normal must be None, 'J' or a callable")


def isometric_loop_family(f: ChartMap, mu: MetricField, sub: Submersion, normal=None,
                          totally_real: bool = False) -> LoopFamily:
    """Shaped family a = alpha, e1 = r t, e2 = r n, e3 = df(u); its average is df(u).

    ``normal`` is None (oriented normal, codimension one), "J" (n = J t) or a
    callable returning a unit normal field.  ``totally_real`` also enlarges P by J.
    """
    if normal == "J":
        totally_real = True

    def fields(X):
        X = np.asarray(X, dtype=float)
        D = f.jacobian(X)
        s = isometric_subsolution(f, mu, sub, X, totally_real=totally_real, jac=D)
        nv = _normal_field(normal, f, X, D, s.t_vec, totally_real)
        r = s.r[..., None]
        E = np.stack([r * s.t_vec, r * nv, s.dfu], axis=-1)
        return s.alpha, E

    return LoopFamily.shaped(fields, f.n)


def _smoothstep3(x: Array) -> Array:
    x = np.clip(x, 0.0, 1.0)
    return x**4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))


def relative_amplitude(d_to_complement, near_base, delta: float, eps: float | None = None):
    """Amplitude in [0, alpha0]: 0 where d >= delta at the base point, alpha0 on Z_0.

    ``near_base`` is either a bool (w = L(u) or far from it) or the distance
    |w - L(u)|; ``eps`` (default delta/10) is the width of Z_1(eps) around the
    base point.  Interpolation uses the order-3 smoothstep and is monotone:
    decreasing in d, increasing in the base distance.
    """
    if not delta > 0.0:
        raise DomainError("delta must be positive")
    eps = 0.1 * delta if eps is None else float(eps)
    d = np.asarray(d_to_complement, dtype=float)
    nb = np.asarray(near_base)
    if nb.dtype == bool:
        base = np.where(nb, 0.0, eps)
    else:
        base = np.asarray(nb, dtype=float)
    sd = _smoothstep3((d - 0.5 * delta) / (0.5 * delta))
    sb = _smoothstep3(base / eps)
    out = pat.alpha0() * (1.0 - sd * (1.0 - sb))
    return float(out) if np.ndim(out) == 0 else out


def _linear_part(section, X: Array) -> Array:
    if isinstance(section, ChartMap):
        return section.jacobian(X)
    return np.asarray(section(X), dtype=float)


def _kuiper_family(section, sub: Submersion, w: Callable[[Array], Array], r_fn, alpha_fn, delta, eps,
                   second: Callable[[Array, Array], Array], plane: Callable[[Array, Array], Array]) -> Callable:
    def fields(X):
        X = np.asarray(X, dtype=float)
        L = _linear_part(section, X)
        u = np.broadcast_to(sub.u(X), X.shape)
        Lu = np.einsum("...nm,...m->...n", L, u)
        e1 = Lu / np.linalg.norm(Lu, axis=-1, keepdims=True)
        e2 = second(L, Lu)
        W = np.asarray(w(X), dtype=float)
        Q = plane(L, sub.kernel_basis(X))
        # oblique split of w along Pi = span(e1, e2)
        basis = np.concatenate([Q, e1[..., None], e2[..., None]], axis=-1)
        if basis.shape[-1] != basis.shape[-2]:
            raise ShapeError("P and Pi do not span the target")
        coef = np.linalg.solve(basis, W[..., None])[..., 0]
        k = Q.shape[-1]
        off = np.hypot(coef[..., k], coef[..., k + 1])
        d = np.linalg.norm(W - project(Q, W), axis=-1) if k else np.linalg.norm(W, axis=-1)
        if r_fn is None:
            r = off + np.maximum(0.5, 0.1 * np.linalg.norm(W, axis=-1))
        else:
            r = np.broadcast_to(np.asarray(r_fn(X), dtype=float), off.shape)
        if np.any(r <= off):
            raise DegenerateError("radius does not exceed the distance from w to its P-component")
        if alpha_fn is not None:
            a = np.broadcast_to(np.asarray(alpha_fn(X), dtype=float), off.shape)
        elif delta is not None:
            a = relative_amplitude(d, np.linalg.norm(W - Lu, axis=-1), delta, eps)
        else:
            a = np.full(off.shape, pat.alpha0())
        E = np.stack([r[..., None] * e1, r[..., None] * e2, W], axis=-1)
        return np.asarray(a, dtype=float), E

    return fields


def immersion_loop_family(section, sub: Submersion, w: Callable[[Array], Array], r_fn=None, alpha_fn=None,
                          delta: float | None = None, eps: float | None = None, n: int | None = None) -> LoopFamily:
    """Codimension-one family: e1 = r L(u)/|L(u)|, e2 = r nu, e3 = w.

    ``section`` gives L (a ChartMap, whose differential is used, or a callable
    returning n x m matrices, then ``n`` is required).  Without ``alpha_fn`` the amplitude is
    ``relative_amplitude`` when ``delta`` is given and alpha0 otherwise.
    """
    def plane(L, K):
        if L.shape[-2] != L.shape[-1] + 1:
            raise ContractError("codimension-one family needs n = m + 1")
        return orthonormal_span(np.einsum("...nm,...mk->...nk", L, K), L.shape[-1] - 1)

    fields = _kuiper_family(section, sub, w, r_fn, alpha_fn, delta, eps,
                            lambda L, Lu: oriented_normal(L), plane)
    return LoopFamily.shaped(fields, _codomain(section, n))


def totally_real_loop_family(section, sub: Submersion, w: Callable[[Array], Array], r_fn=None, alpha_fn=None,
                             delta: float | None = None, eps: float | None = None, n: int | None = None) -> LoopFamily:
    """Totally real family: as the immersion family with e2 = r J L(u)/|J L(u)|."""
    def plane(L, K):
        m = L.shape[-1]
        if L.shape[-2] != 2 * m:
            raise ContractError("totally real family needs n = 2m")
        LJL = np.concatenate([L, apply_j(np.swapaxes(L, -1, -2)).swapaxes(-1, -2)], axis=-1)
        orthonormal_span(LJL, 2 * m)
        B = np.einsum("...nm,...mk->...nk", L, K)
        return orthonormal_span(np.concatenate([B, apply_j(np.swapaxes(B, -1, -2)).swapaxes(-1, -2)], axis=-1),
                                2 * m - 2)

    def second(L, Lu):
        JLu = apply_j(Lu)
        return JLu / np.linalg.norm(JLu, axis=-1, keepdims=True)

    fields = _kuiper_family(section, sub, w, r_fn, alpha_fn, delta, eps, second, plane)
    return LoopFamily.shaped(fields, _codomain(section, n))


def _codomain(section, n: int | None) -> int:
    if isinstance(section, ChartMap):
        return section.n
    if n is None:
        raise ShapeError("callable sections need an explicit codomain dimension n")
    return int(n)


ISOMETRIC_TOL = 1e-6
RELATIONS = ("immersion", "totally-real", "isometric")


def _sphere_distance(S: SliceSphere, v: Array) -> float:
    rel = np.asarray(v, dtype=float) - S.center
    inside = S.plane_basis @ (S.plane_basis.T @ rel)
    off = np.linalg.norm(rel - inside)
    return float(np.hypot(off, np.linalg.norm(inside) - S.radius))


def relation_margins(f: ChartMap, relation: str, X, mu: MetricField | None = None) -> Array:
    """Per-point slice margin of df(u) for every coordinate covector dx_j (minimum over j).

    Positive margins mean membership.  For the open relations the margin is the
    unit distance to P minus 1e-9; for the isometric relation it is 1e-6 minus the
    distance of df(u) to the slice sphere of ``mu``.
    """
    if relation not in RELATIONS:
        raise ValueError(f"relation must be one of {RELATIONS}")
    if relation == "isometric" and mu is None:
        raise ContractError("the isometric relation needs a target metric")
    X = np.asarray(X, dtype=float)
    P = X.reshape(-1, f.m)
    Y, D = f(P), f.jacobian(P)
    M = mu(P) if mu is not None else None
    out = np.empty(P.shape[0])
    for i in range(P.shape[0]):
        sigma = JetPoint(P[i], Y[i], D[i])
        best = np.inf
        for j in range(f.m):
            lam = np.zeros(f.m)
            lam[j] = 1.0
            q = SliceQuery(sigma, lam, lam)
            v = q.Lu
            if relation == "immersion":
                mg = _unit_distance(immersion_plane(q), v) - MEMBERSHIP_TOL
            elif relation == "totally-real":
                mg = _unit_distance(totally_real_plane(q), v) - MEMBERSHIP_TOL
            else:
                S = isometric_slice(q, M[i])
                mg = ISOMETRIC_TOL * max(1.0, S.radius) - _sphere_distance(S, v)
            best = min(best, mg)
        out[i] = best
    return out.reshape(X.shape[:-1])
