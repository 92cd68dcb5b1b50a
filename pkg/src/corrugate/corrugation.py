"""Corrugation Process, its integration-free shaped form, and Convex Integration."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import pattern as pat
from .chart import ChartMap, grid_gradient, grid_points
from .errors import ContractError, DomainError, ShapeError

Array = np.ndarray
FIELD_FD_STEP = 1e-4
_AVG_NODES = 256
_CHUNK = 4096


class Submersion:
    """pi: U -> R together with d(pi) and a vector field u with d(pi)(u) = 1."""

    def __init__(self, pi: Callable[[Array], Array], dpi: Callable[[Array], Array], u: Callable[[Array], Array]):
        self.pi = pi
        self.dpi = dpi
        self.u = u

    @classmethod
    def linear(cls, coeffs, offset: float = 0.0, u=None) -> "Submersion":
        """pi(x) = c . x + offset; u defaults to c / |c|^2."""
        c = np.asarray(coeffs, dtype=float)
        if not np.any(c):
            raise DomainError("a linear submersion needs a nonzero covector")
        if u is None:
            uvec = c / (c @ c)
            ufun = lambda X: np.broadcast_to(uvec, np.shape(X))
        elif callable(u):
            ufun = u
        else:
            uvec = np.asarray(u, dtype=float)
            ufun = lambda X: np.broadcast_to(uvec, np.shape(X))
        return cls(
            lambda X: np.asarray(X, dtype=float) @ c + offset,
            lambda X: np.broadcast_to(c, np.shape(X)),
            ufun,
        )

    @classmethod
    def axis(cls, j: int, m: int) -> "Submersion":
        c = np.zeros(m)
        c[j] = 1.0
        return cls.linear(c)

    def check(self, X, tol: float = 1e-10) -> None:
        X = np.asarray(X, dtype=float)
        d = self.dpi(X)
        if np.min(np.linalg.norm(d, axis=-1)) == 0.0:
            raise ContractError("d(pi) vanishes")
        if np.max(np.abs(np.sum(d * self.u(X), axis=-1) - 1.0)) > tol:
            raise ContractError("d(pi)(u) != 1")

    def kernel_basis(self, X) -> Array:
        """Orthonormal basis of ker d(pi), shape (..., m, m-1)."""
        d = np.asarray(self.dpi(np.asarray(X, dtype=float)), dtype=float)
        _, _, vt = np.linalg.svd(d[..., None, :])
        return np.swapaxes(vt[..., 1:, :], -1, -2)


class LoopFamily:
    """x-indexed loops gamma(x, t) in R^n, 1-periodic in t.

    A shaped family is e(x) . c(a(x), t) for the circle-arc pattern c, given by
    a callable ``fields(X) -> (a, E)`` with ``E`` of shape (..., n, 3); its
    average is the third frame column.
    """

    def __init__(
        self,
        gamma: Callable[[Array, Array], Array] | None,
        n: int,
        *,
        average: Callable[[Array], Array] | None = None,
        fields: Callable[[Array], tuple[Array, Array]] | None = None,
    ):
        if gamma is None and fields is None:
            raise ValueError("need gamma or shaped fields")
        self.n = int(n)
        self._gamma = gamma
        self._average = average
        self._fields = fields

    @classmethod
    def shaped(cls, fields: Callable[[Array], tuple[Array, Array]], n: int) -> "LoopFamily":
        return cls(None, n, fields=fields)

    @classmethod
    def constant(cls, value: Callable[[Array], Array], n: int) -> "LoopFamily":
        return cls(lambda X, T: np.broadcast_to(value(X), np.broadcast_shapes(np.shape(X)[:-1], np.shape(T)) + (n,)),
                   n, average=value)

    @property
    def is_shaped(self) -> bool:
        return self._fields is not None

    def fields(self, X) -> tuple[Array, Array]:
        if self._fields is None:
            raise ContractError("loop family is not shaped")
        a, E = self._fields(np.asarray(X, dtype=float))
        return np.asarray(a, dtype=float), np.asarray(E, dtype=float)

    def amplitude(self, X) -> Array:
        return self.fields(X)[0]

    def frame(self, X) -> Array:
        return self.fields(X)[1]

    def __call__(self, X, T) -> Array:
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        if self._fields is not None:
            a, E = self.fields(X)
            shape = np.broadcast_shapes(a.shape, T.shape)
            c = pat.pattern_c(np.broadcast_to(a, shape), T)
            E = np.broadcast_to(E, shape + E.shape[-2:])
            return np.einsum("...nk,...k->...n", E, c)
        return np.asarray(self._gamma(X, T), dtype=float)

    def average(self, X) -> Array:
        X = np.asarray(X, dtype=float)
        if self._fields is not None:
            return self.frame(X)[..., :, 2]
        if self._average is not None:
            return np.broadcast_to(self._average(X), X.shape[:-1] + (self.n,))
        return self.quadrature_average(X)

    def quadrature_average(self, X, nodes: int = _AVG_NODES) -> Array:
        """Periodic trapezoid average of gamma(x, .), exact for smooth loops."""
        X = np.asarray(X, dtype=float)
        t = np.arange(nodes) / nodes
        vals = self(X[..., None, :], t)
        return vals.mean(axis=-2)

    def check(self, X, samples: int = 64) -> None:
        """Verify periodicity, the declared average and shaped consistency."""
        X = np.asarray(X, dtype=float)
        t = np.linspace(0.0, 1.0, samples, endpoint=False)
        g0 = self(X[..., None, :], t)
        g1 = self(X[..., None, :], t + 1.0)
        if np.max(np.abs(g0 - g1)) > 1e-10:
            raise ContractError("loop family is not 1-periodic")
        if np.max(np.abs(self.average(X) - self.quadrature_average(X))) > 1e-8:
            raise ContractError("declared average disagrees with quadrature")

    def primitive(self, X, T) -> Array:
        """Gamma(x, t) = int_0^t gamma(x, s) - average(x) ds."""
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        if self._fields is not None:
            a, E = self.fields(X)
            return shaped_displacement(pat.PATTERN, a, E, T)
        return self.quadrature_primitive(X, T)

    def quadrature_primitive(self, X, T, tol: float = 1e-12) -> Array:
        """Composite Simpson primitive; 64 panels per unit of t, doubled until converged."""
        X = np.asarray(X, dtype=float)
        T = np.asarray(T, dtype=float)
        shape = np.broadcast_shapes(X.shape[:-1], T.shape)
        Xf = np.broadcast_to(X, shape + X.shape[-1:]).reshape(-1, X.shape[-1])
        Tf = np.broadcast_to(T, shape).ravel()
        frac = Tf - np.floor(Tf)
        out = np.empty((Xf.shape[0], self.n))
        for s in range(0, Xf.shape[0], _CHUNK):
            sl = slice(s, s + _CHUNK)
            xs, fr = Xf[sl], frac[sl]
            avg = self.average(xs)
            panels, prev = 64, None
            while True:
                grid = np.linspace(0.0, 1.0, panels + 1)
                w = np.full(panels + 1, 2.0)
                w[1::2] = 4.0
                w[0] = w[-1] = 1.0
                u = fr[:, None] * grid[None, :]
                vals = self(xs[:, None, :], u) - avg[:, None, :]
                cur = np.einsum("pkn,k->pn", vals, w) * (fr / panels / 3.0)[:, None]
                if prev is not None and np.max(np.abs(cur - prev)) <= tol:
                    break
                if panels >= 1 << 14:
                    break
                prev, panels = cur, panels * 2
            out[sl] = cur
        return out.reshape(shape + (self.n,))


def shaped_displacement(pattern: pat.LoopPattern, a, e, t) -> Array:
    """C(a, t) . e = K_c(a, t) e_1 + K_s(a, t) e_2; the third pattern entry has zero primitive."""
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    t = np.asarray(t, dtype=float)
    if e.shape[-1] < 2:
        raise ShapeError("frame needs at least two columns")
    shape = np.broadcast_shapes(a.shape, t.shape, e.shape[:-2])
    kc, ks = pat.k_pair(np.broadcast_to(a, shape), np.broadcast_to(t, shape))
    kc = np.asarray(kc)[..., None]
    ks = np.asarray(ks)[..., None]
    return kc * e[..., :, 0] + ks * e[..., :, 1]


def _check_inputs(f0: ChartMap, gamma: LoopFamily, N: float) -> float:
    N = float(N)
    if not math.isfinite(N) or N <= 0.0:
        raise DomainError("N must be a positive finite number")
    if gamma.n != f0.n:
        raise ShapeError("loop family and map have different codomains")
    return N


def _field_pack(gamma: LoopFamily) -> Callable[[Array], Array]:
    def pack(X):
        a, E = gamma.fields(X)
        return np.concatenate([a[..., None], E[..., :, 0], E[..., :, 1]], axis=-1)
    return pack


def _semi_analytic_jacobian(D0, dpi, gval, avg, a, E, t, grad_a, grad_e1, grad_e2, N):
    """d f1 = d f0 + (gamma - avg) (x) d pi + (1/N) d_x[K_c e1 + K_s e2] at frozen t."""
    kc, ks, kca, ksa = pat.k_pair(a, t, with_dalpha=True)
    kc, ks, kca, ksa = (np.asarray(v)[..., None, None] for v in (kc, ks, kca, ksa))
    e1 = E[..., :, 0, None]
    e2 = E[..., :, 1, None]
    ga = grad_a[..., None, :]
    corr = kca * e1 * ga + kc * grad_e1 + ksa * e2 * ga + ks * grad_e2
    return D0 + (gval - avg)[..., :, None] * dpi[..., None, :] + corr / N


def corrugation_process(f0: ChartMap, sub: Submersion, gamma: LoopFamily, N: float) -> ChartMap:
    """f1(x) = f0(x) + Gamma(x, N pi(x)) / N.

    Shaped families use the closed form K_c e_1 + K_s e_2 and get a
    semi-analytic differential (the oscillating part exact, frame gradients by
    finite differences).  Grid maps yield grid maps on the same nodes.
    """
    N = _check_inputs(f0, gamma, N)
    if f0.kind == "grid":
        return _corrugate_grid(f0, sub, gamma, N)

    def f1(X):
        return f0(X) + gamma.primitive(X, N * sub.pi(X)) / N

    jac = None
    if gamma.is_shaped:
        fmap = ChartMap(_field_pack(gamma), f0.lo, f0.hi, 1 + 2 * f0.n, periodic=f0.periodic, fd_step=FIELD_FD_STEP)

        def jac(X):
            a, E = gamma.fields(X)
            G = fmap.jacobian(X)
            n = f0.n
            t = N * sub.pi(X)
            gval = np.einsum("...nk,...k->...n", E, pat.pattern_c(a, t))
            return _semi_analytic_jacobian(
                f0.jacobian(X), sub.dpi(X), gval, E[..., :, 2], a, E, t,
                G[..., 0, :], G[..., 1:1 + n, :], G[..., 1 + n:, :], N)

    else:
        def jac(X):
            X = np.asarray(X, dtype=float)
            t = N * sub.pi(X)
            osc = gamma(X, t) - gamma.average(X)
            return f0.jacobian(X) + osc[..., :, None] * sub.dpi(X)[..., None, :] + _frozen_gradient(gamma, X, t) / N

    return ChartMap(f1, f0.lo, f0.hi, f0.n, jac=jac, periodic=f0.periodic, name=f"CP(N={N:g})")


def _frozen_gradient(gamma: LoopFamily, X: Array, t: Array) -> Array:
    """x-gradient of Gamma(x, t) at frozen t by 4th-order central differences."""
    h = FIELD_FD_STEP
    out = np.empty(X.shape[:-1] + (gamma.n, X.shape[-1]))
    for i in range(X.shape[-1]):
        acc = 0.0
        for o, w in zip((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)):
            Y = X.copy()
            Y[..., i] += o * h
            acc = acc + w * gamma.primitive(Y, t)
        out[..., :, i] = acc / h
    return out


def _corrugate_grid(f0: ChartMap, sub: Submersion, gamma: LoopFamily, N: float) -> ChartMap:
    X = f0.grid()
    V0 = f0.sample()
    D0 = f0.sample_jacobian()
    t = N * sub.pi(X)
    dpi = np.broadcast_to(sub.dpi(X), X.shape)
    if gamma.is_shaped:
        a, E = gamma.fields(X)
        V1 = V0 + shaped_displacement(pat.PATTERN, a, E, t) / N
        grads = grid_gradient(_field_pack(gamma)(X), f0.lo, f0.hi, f0.periodic)
        n = f0.n
        gval = np.einsum("...nk,...k->...n", E, pat.pattern_c(a, t))
        D1 = _semi_analytic_jacobian(D0, dpi, gval, E[..., :, 2], a, E, t,
                                     grads[..., 0, :], grads[..., 1:1 + n, :], grads[..., 1 + n:, :], N)
    else:
        G = gamma.primitive(X, t)
        V1 = V0 + G / N
        D1 = grid_gradient(V1, f0.lo, f0.hi, f0.periodic)
    return ChartMap.from_grid(V1, f0.lo, f0.hi, jac=D1, periodic=f0.periodic, name=f"CP(N={N:g})")


def convex_integration(f0: ChartMap, axis: int, gamma: LoopFamily, N: float, check_res: int = 17) -> ChartMap:
    """F1(x) = f0(x with x_j = s0) + int_{s0}^{x_j} gamma(x_j <- s, N s) ds.

    The base coordinate s0 is 0 when it lies in the chart, else the lower end.
    The loop family must satisfy the average constraint average = d_j f0.
    """
    N = _check_inputs(f0, gamma, N)
    j = int(axis)
    Xc = grid_points(f0.lo, f0.hi, check_res)
    if np.max(np.abs(gamma.average(Xc) - f0.jacobian(Xc)[..., :, j])) > 1e-6:
        raise ContractError("loop family violates the average constraint")
    lo_j = float(np.clip(0.0, f0.lo[j], f0.hi[j]))

    def F1(X):
        X = np.asarray(X, dtype=float)
        base = X.copy()
        base[..., j] = lo_j
        length = X[..., j] - lo_j
        panels = 2 * max(32, int(math.ceil(32 * N * float(np.max(np.abs(length), initial=0.0)))))
        prev = None
        while True:
            s = np.linspace(0.0, 1.0, panels + 1)
            w = np.full(panels + 1, 2.0)
            w[1::2] = 4.0
            w[0] = w[-1] = 1.0
            pts = np.repeat(X[..., None, :], panels + 1, axis=-2)
            sj = lo_j + length[..., None] * s
            pts[..., j] = sj
            vals = gamma(pts, N * sj)
            cur = np.einsum("...kn,k->...n", vals, w) * (length / panels / 3.0)[..., None]
            if prev is not None and np.max(np.abs(cur - prev), initial=0.0) <= 1e-11 or panels >= 1 << 13:
                break
            prev, panels = cur, panels * 2
        return f0(base) + cur

    return ChartMap(F1, f0.lo, f0.hi, f0.n, periodic=f0.periodic, name=f"CI(N={N:g})")


def _loop_bounds(gamma: LoopFamily, f0: ChartMap, X: Array, dirs: Array, t: Array) -> tuple[float, list[float]]:
    """sup |gamma| and sup |d_v gamma| (x-derivative at frozen t) for each column v of dirs."""
    flatX = X.reshape(-1, X.shape[-1])
    flatD = np.broadcast_to(dirs, X.shape[:-1] + dirs.shape[-2:]).reshape(-1, *dirs.shape[-2:])
    nd = dirs.shape[-1]
    n = gamma.n
    sup_g, sup_d = 0.0, [0.0] * nd
    if gamma.is_shaped:
        def pack(Y):
            a, E = gamma.fields(Y)
            return np.concatenate([a[..., None], E.reshape(E.shape[:-2] + (3 * n,))], axis=-1)
        fmap = ChartMap(pack, f0.lo, f0.hi, 1 + 3 * n, periodic=f0.periodic, fd_step=FIELD_FD_STEP)
    phase = np.cos(pat.TWO_PI * t)
    for s in range(0, flatX.shape[0], _CHUNK // 8):
        xs = flatX[s:s + _CHUNK // 8]
        vs = flatD[s:s + _CHUNK // 8]
        if gamma.is_shaped:
            a, E = gamma.fields(xs)
            c = pat.pattern_c(a[:, None], t)
            Et = np.swapaxes(E, -1, -2)
            sup_g = max(sup_g, float(np.max(np.linalg.norm(c @ Et, axis=-1))))
            G = fmap.jacobian(xs)
            arg = a[:, None] * phase
            dca = np.stack([-np.sin(arg) * phase - pat.j0_prime(a)[:, None], np.cos(arg) * phase,
                            np.zeros_like(arg)], axis=-1)
            dca_E = dca @ Et
            for k in range(nd):
                dv = (G @ vs[:, :, k, None])[..., 0]
                da = dv[:, 0]
                dE = dv[:, 1:].reshape(-1, n, 3)
                dg = dca_E * da[:, None, None] + c @ np.swapaxes(dE, -1, -2)
                sup_d[k] = max(sup_d[k], float(np.max(np.linalg.norm(dg, axis=-1))))
        else:
            g = gamma(xs[:, None, :], t)
            sup_g = max(sup_g, float(np.max(np.linalg.norm(g, axis=-1))))
            h = FIELD_FD_STEP
            for k in range(nd):
                v = vs[:, None, :, k]
                acc = 0.0
                for o, w in zip((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)):
                    acc = acc + w * gamma(xs[:, None, :] + o * h * v, t)
                sup_d[k] = max(sup_d[k], float(np.max(np.linalg.norm(acc / h, axis=-1))))
    return sup_g, sup_d


@dataclass
class CPReport:
    """Measured CP property errors against the 2 ||.||_inf / N bounds."""

    N: float
    p1: float
    p2: float
    p3prime: float
    k_p1: float
    k_p2: float
    k_p3prime: float
    grid_tol: float = 1e-6
    notes: dict = field(default_factory=dict)

    @property
    def bounds(self) -> dict[str, float]:
        return {"p1": self.k_p1 / self.N, "p2": self.k_p2 / self.N, "p3prime": self.k_p3prime / self.N}

    @property
    def passes(self) -> dict[str, bool]:
        b = self.bounds
        return {
            "p1": self.p1 <= b["p1"] + self.grid_tol,
            "p2": self.p2 <= b["p2"] + self.grid_tol,
            "p3prime": self.p3prime <= b["p3prime"] + self.grid_tol,
        }

    @property
    def ok(self) -> bool:
        return all(self.passes.values())

    def rows(self) -> list[tuple[str, float, float, bool]]:
        b, p = self.bounds, self.passes
        return [(k, getattr(self, k), b[k], p[k]) for k in ("p1", "p2", "p3prime")]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["property", "measured", "bound", "pass"])
        for name, meas, bound, ok in self.rows():
            w.writerow([name, repr(float(meas)), repr(float(bound)), str(bool(ok)).lower()])
        return buf.getvalue()


def verify_cp_properties(f0: ChartMap, f1: ChartMap, sub: Submersion, gamma: LoopFamily, N: float,
                         res=257, t_samples: int = 64, X: Array | None = None) -> CPReport:
    """Measure P1, P2 and P3' on a grid and estimate the constants 2 ||gamma||, 2 ||d gamma||."""
    N = float(N)
    X = grid_points(f0.lo, f0.hi, res) if X is None else np.asarray(X, dtype=float)
    p1 = float(np.max(np.linalg.norm(f1(X) - f0(X), axis=-1)))
    D0 = f0.jacobian(X)
    D1 = f1.jacobian(X)
    K = sub.kernel_basis(X)
    diff = np.einsum("...nm,...mk->...nk", D1 - D0, K)
    p2 = float(np.max(np.linalg.norm(diff, axis=-2))) if K.shape[-1] else 0.0
    u = np.broadcast_to(sub.u(X), X.shape)
    du = np.einsum("...nm,...m->...n", D1, u)
    p3 = float(np.max(np.linalg.norm(du - gamma(X, N * sub.pi(X)), axis=-1)))
    t = np.arange(t_samples) / t_samples
    dirs = np.concatenate([K, u[..., None]], axis=-1)
    sup_g, sup_d = _loop_bounds(gamma, f0, X, dirs, t)
    k_p2 = 2.0 * max(sup_d[:-1], default=0.0)
    return CPReport(N, p1, p2, p3, 2.0 * sup_g, k_p2, 2.0 * sup_d[-1])
