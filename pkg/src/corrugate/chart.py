"""Maps from box charts into R^n: evaluation, differentials, pullback metrics, sup norms."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, ShapeError

Array = np.ndarray
VERIFY_RES = 257
EXPORT_RES = 1025
FD_STEP = 1e-5
_DOMAIN_SLACK = 1e-9

_CENTRAL = (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0)
_FORWARD = (np.arange(5.0), np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0)
_BACKWARD = (-np.arange(5.0), -np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0)


def _res_tuple(res, m: int) -> tuple[int, ...]:
    r = (int(res),) * m if np.isscalar(res) else tuple(int(v) for v in res)
    if len(r) != m or min(r) < 2:
        raise ShapeError("grid resolution must be >= 2 on every axis")
    return r


def grid_axes(lo: Sequence[float], hi: Sequence[float], res) -> list[Array]:
    r = _res_tuple(res, len(lo))
    return [np.linspace(a, b, k) for a, b, k in zip(lo, hi, r)]


def grid_points(lo: Sequence[float], hi: Sequence[float], res) -> Array:
    """Points of a regular grid, shape (*res, m), first axis slowest."""
    axes = grid_axes(lo, hi, res)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def fd_axis(arr: Array, h: float, axis: int, periodic: bool = False) -> Array:
    """Fourth-order derivative of grid samples along one axis.

    Periodic axes are assumed to repeat their first slice as the last one.
    Non-periodic axes use one-sided fourth-order stencils at the two end rows.
    """
    a = np.moveaxis(np.asarray(arr, dtype=float), axis, 0)
    if periodic:
        core = a[:-1]
        d = (np.roll(core, 2, 0) - 8 * np.roll(core, 1, 0) + 8 * np.roll(core, -1, 0) - np.roll(core, -2, 0)) / (12 * h)
        d = np.concatenate([d, d[:1]], axis=0)
    else:
        n = a.shape[0]
        if n < 5:
            raise ShapeError("need at least 5 samples per axis for fourth-order differences")
        d = np.empty_like(a)
        d[2:-2] = (a[:-4] - 8 * a[1:-3] + 8 * a[3:-1] - a[4:]) / (12 * h)
        d[0] = (-25 * a[0] + 48 * a[1] - 36 * a[2] + 16 * a[3] - 3 * a[4]) / (12 * h)
        d[1] = (-3 * a[0] - 10 * a[1] + 18 * a[2] - 6 * a[3] + a[4]) / (12 * h)
        d[-1] = (25 * a[-1] - 48 * a[-2] + 36 * a[-3] - 16 * a[-4] + 3 * a[-5]) / (12 * h)
        d[-2] = (3 * a[-1] + 10 * a[-2] - 18 * a[-3] + 6 * a[-4] - a[-5]) / (12 * h)
    return np.moveaxis(d, 0, axis)


def grid_gradient(field: Array, lo, hi, periodic=None) -> Array:
    """Gradient of a field sampled on a full grid; the new last axis indexes x_i.

    ``field`` has shape (*res, ...).
    """
    m = len(lo)
    res = field.shape[:m]
    periodic = (False,) * m if periodic is None else tuple(periodic)
    parts = []
    for i in range(m):
        h = (hi[i] - lo[i]) / (res[i] - 1)
        parts.append(fd_axis(field, h, i, periodic[i]))
    return np.stack(parts, axis=-1)


class ChartMap:
    """A map from the box prod [lo_i, hi_i] into R^n.

    Either a closed-form vectorised callable ``func(X) -> (..., n)`` with
    ``X`` of shape ``(..., m)``, or samples on a regular grid.  An analytic
    differential ``jac(X) -> (..., n, m)`` may be attached to either kind.
    """

    def __init__(
        self,
        func: Callable[[Array], Array] | None,
        lo: Sequence[float],
        hi: Sequence[float],
        n: int,
        *,
        jac: Callable[[Array], Array] | None = None,
        periodic: Sequence[bool] | None = None,
        name: str = "",
        fd_step: float = FD_STEP,
    ):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1 or np.any(self.hi <= self.lo):
            raise ShapeError("invalid domain box")
        self.m = self.lo.size
        self.n = int(n)
        self.periodic = tuple(bool(p) for p in periodic) if periodic is not None else (False,) * self.m
        if len(self.periodic) != self.m:
            raise ShapeError("one periodicity flag per axis")
        self._func = func
        self._jac = jac
        self.name = name
        self.fd_step = float(fd_step)
        self.grid_values: Array | None = None
        self.grid_jac: Array | None = None
        self._interp = None
        self._jinterp = None

    # construction -------------------------------------------------------
    @classmethod
    def from_grid(cls, values, lo, hi, *, jac=None, periodic=None, name: str = "") -> "ChartMap":
        values = np.asarray(values, dtype=float)
        m = len(lo)
        if values.ndim != m + 1 or min(values.shape[:m]) < 2:
            raise ShapeError("grid values must have shape (*res, n) with res >= 2")
        self = cls(None, lo, hi, values.shape[-1], periodic=periodic, name=name)
        for i, p in enumerate(self.periodic):
            if p:
                first = np.take(values, 0, axis=i)
                last = np.take(values, -1, axis=i)
                if np.max(np.abs(first - last)) > 1e-9:
                    raise ShapeError(f"axis {i} flagged periodic but end slices differ")
        self.grid_values = values
        if jac is not None:
            jac = np.asarray(jac, dtype=float)
            if jac.shape != values.shape + (m,):
                raise ShapeError("grid jacobian must have shape (*res, n, m)")
            self.grid_jac = jac
        axes = grid_axes(self.lo, self.hi, values.shape[:m])
        self._interp = RegularGridInterpolator(axes, values, method="cubic" if min(values.shape[:m]) >= 4 else "linear")
        if self.grid_jac is not None:
            self._jinterp = RegularGridInterpolator(axes, self.grid_jac, method="cubic" if min(values.shape[:m]) >= 4 else "linear")
        return self

    @property
    def kind(self) -> str:
        return "grid" if self.grid_values is not None else "closed"

    @property
    def grid_res(self) -> tuple[int, ...] | None:
        return None if self.grid_values is None else self.grid_values.shape[: self.m]

    @property
    def has_analytic_jacobian(self) -> bool:
        return self._jac is not None or self.grid_jac is not None

    def spacing(self) -> Array:
        if self.grid_values is None:
            return np.full(self.m, self.fd_step)
        return (self.hi - self.lo) / (np.asarray(self.grid_res) - 1)

    # evaluation -----------------------------------------------------------
    def _check(self, X) -> Array:
        X = np.asarray(X, dtype=float)
        if X.shape[-1:] != (self.m,):
            raise ShapeError(f"points must have trailing dimension {self.m}")
        bad = (X < self.lo - _DOMAIN_SLACK) | (X > self.hi + _DOMAIN_SLACK)
        bad &= ~np.asarray(self.periodic)
        if np.any(bad):
            raise DomainError("point outside the chart domain")
        return X

    def _wrap(self, X: Array) -> Array:
        if not any(self.periodic):
            return X
        X = X.copy()
        for i, p in enumerate(self.periodic):
            if p:
                span = self.hi[i] - self.lo[i]
                X[..., i] = self.lo[i] + np.mod(X[..., i] - self.lo[i], span)
        return X

    def _eval(self, X: Array) -> Array:
        if self._func is not None:
            return np.asarray(self._func(X), dtype=float)
        return self._interp(self._wrap(X))

    def __call__(self, X) -> Array:
        return self._eval(self._check(X))

    def jacobian(self, X) -> Array:
        """Differential at X, shape (..., n, m); columns are the partials."""
        X = self._check(X)
        if self._jac is not None:
            return np.asarray(self._jac(X), dtype=float)
        if self._jinterp is not None:
            return self._jinterp(self._wrap(X))
        return self._fd_jacobian(X)

    def _fd_jacobian(self, X: Array) -> Array:
        h = np.maximum(self.fd_step, self.spacing())
        out = np.empty(X.shape[:-1] + (self.n, self.m))
        for i in range(self.m):
            xi = X[..., i]
            if self.periodic[i]:
                kind = np.zeros(xi.shape, dtype=int)
            else:
                kind = np.where(xi - 2 * h[i] < self.lo[i] - _DOMAIN_SLACK, 1,
                                np.where(xi + 2 * h[i] > self.hi[i] + _DOMAIN_SLACK, 2, 0))
            col = np.empty(X.shape[:-1] + (self.n,))
            for code, (offs, wts) in enumerate((_CENTRAL, _FORWARD, _BACKWARD)):
                mask = kind == code
                if not np.any(mask):
                    continue
                pts = X[mask]
                acc = np.zeros((pts.shape[0], self.n))
                for o, w in zip(offs, wts):
                    shifted = pts.copy()
                    shifted[:, i] += o * h[i]
                    acc += w * self._eval(shifted)
                col[mask] = acc / h[i]
            out[..., :, i] = col
        return out

    # sampling -----------------------------------------------------------
    def grid(self, res=None) -> Array:
        res = self.grid_res if res is None else res
        if res is None:
            raise ShapeError("closed-form maps need an explicit resolution")
        return grid_points(self.lo, self.hi, res)

    def sample(self, res=None) -> Array:
        if self.grid_values is not None and (res is None or _res_tuple(res, self.m) == self.grid_res):
            return self.grid_values
        return self(self.grid(res))

    def sample_jacobian(self, res=None) -> Array:
        if self.grid_values is not None and (res is None or _res_tuple(res, self.m) == self.grid_res):
            if self.grid_jac is not None:
                return self.grid_jac
            g = grid_gradient(self.grid_values, self.lo, self.hi, self.periodic)
            return g
        return self.jacobian(self.grid(res))

    def __repr__(self) -> str:
        return f"ChartMap({self.name or self.kind}, m={self.m}, n={self.n})"


class MetricField:
    """Field of symmetric m x m matrices over a box."""

    def __init__(self, func: Callable[[Array], Array], lo, hi, *, positive: bool = True, name: str = ""):
        self._func = func
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.m = self.lo.size
        self.positive = positive
        self.name = name

    def __call__(self, X) -> Array:
        X = np.asarray(X, dtype=float)
        G = np.asarray(self._func(X), dtype=float)
        return np.broadcast_to(G, X.shape[:-1] + (self.m, self.m))

    @classmethod
    def constant(cls, G, lo, hi, **kw) -> "MetricField":
        G = np.asarray(G, dtype=float)
        return cls(lambda X: np.broadcast_to(G, np.shape(X)[:-1] + G.shape), lo, hi, **kw)

    @classmethod
    def pullback(cls, f: ChartMap) -> "MetricField":
        return cls(lambda X: pullback_from_jacobian(f.jacobian(X)), f.lo, f.hi, name=f"pullback({f.name})")

    @classmethod
    def from_grid(cls, values, lo, hi, **kw) -> "MetricField":
        values = np.asarray(values, dtype=float)
        m = len(lo)
        axes = grid_axes(lo, hi, values.shape[:m])
        interp = RegularGridInterpolator(axes, values, method="linear")
        return cls(lambda X: interp(X), lo, hi, **kw)

    def sample(self, res) -> Array:
        return self(grid_points(self.lo, self.hi, res))

    def validate(self, res=VERIFY_RES) -> None:
        G = self.sample(res)
        if np.max(np.abs(G - np.swapaxes(G, -1, -2))) > 1e-12:
            raise ShapeError("metric field is not symmetric")
        if self.positive and np.min(np.linalg.eigvalsh(G)) <= 0:
            raise DomainError("metric field is not positive definite")


def pullback_from_jacobian(D: Array) -> Array:
    return np.einsum("...ki,...kj->...ij", D, D)


def differential(f: ChartMap, x) -> Array:
    """n x m differential of f at x (analytic if attached, else finite differences)."""
    return f.jacobian(x)


def pullback_metric(f: ChartMap, x) -> Array:
    """Df(x)^T Df(x), the pullback of the Euclidean metric."""
    return pullback_from_jacobian(f.jacobian(x))


def sup_distance(f: ChartMap, g: ChartMap, order: int = 0, res=VERIFY_RES, columns=None) -> float:
    """Grid estimate of the C^0 (order 0) or C^1 (order 1) distance.

    For order 1 the result is the larger of the value distance and the
    Frobenius distance of the differentials, optionally restricted to some
    partial-derivative columns.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    if f.m != g.m or f.n != g.n or not (np.allclose(f.lo, g.lo) and np.allclose(f.hi, g.hi)):
        raise ShapeError("maps must share domain and codomain")
    X = grid_points(f.lo, f.hi, res)
    d0 = float(np.max(np.linalg.norm(f(X) - g(X), axis=-1)))
    if order == 0:
        return d0
    dj = f.jacobian(X) - g.jacobian(X)
    if columns is not None:
        dj = dj[..., list(columns)]
    d1 = float(np.max(np.sqrt(np.sum(dj * dj, axis=(-2, -1)))))
    return max(d0, d1)
