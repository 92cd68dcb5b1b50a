"""Plücker conoid, its corrugated desingularization and two closed RP^2 surfaces.

Every evaluator takes arrays of points with a trailing axis of length 2 and is
defined for all real x2, which the Möbius check needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import pattern as pat
from .chart import ChartMap, grid_points
from .corrugation import LoopFamily, Submersion, corrugation_process, shaped_displacement
from .errors import DegenerateError, DomainError

Array = np.ndarray
DOMAIN_LO = (-3.0, 0.0)
DOMAIN_HI = (3.0, 1.0)
RP2_LO = (-5.0, 0.0)
RP2_HI = (5.0, 1.0)
CONOID_RADIUS = math.sqrt(2.0) * math.pi + 0.5


def _xy(x) -> tuple[Array, Array]:
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def plucker_conoid(x) -> Array:
    """f0(x1, x2) = (x1 cos pi x2, x1 sin pi x2, cos(2 pi x2) / 2)."""
    x1, x2 = _xy(x)
    return np.stack([x1 * np.cos(np.pi * x2), x1 * np.sin(np.pi * x2), 0.5 * np.cos(2 * np.pi * x2)], axis=-1)


def conoid_d1(x) -> Array:
    x1, x2 = _xy(x)
    return np.stack([np.cos(np.pi * x2), np.sin(np.pi * x2), np.zeros_like(x1 * x2)], axis=-1)


def conoid_d2(x) -> Array:
    x1, x2 = _xy(x)
    return np.stack([-np.pi * x1 * np.sin(np.pi * x2), np.pi * x1 * np.cos(np.pi * x2),
                     -np.pi * np.sin(2 * np.pi * x2)], axis=-1)


def conoid_jacobian(x) -> Array:
    return np.stack([conoid_d1(x), conoid_d2(x)], axis=-1)


def _plane_frame(x2: Array) -> tuple[Array, Array, Array]:
    """a = d2 f0(-1, x2), its unit vector and the unit vector of a ^ d1 f0 completing Pi_2(-1, x2)."""
    x2 = np.asarray(x2, dtype=float)
    pts = np.stack([-np.ones_like(x2), x2], axis=-1)
    a = conoid_d2(pts)
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(na == 0.0):
        raise DegenerateError("d2 f0 vanishes on x1 = -1")
    c = np.cross(a, conoid_d1(pts))
    return a, a / na, c / np.linalg.norm(c, axis=-1, keepdims=True)


def theta_max(x2, oriented: bool = True):
    """Angle from d2 f0(-1, x2) to d2 f0(1, x2).

    ``oriented=True`` measures it in the orientation of Pi_2(-1, x2) and lifts it
    to [0, 2 pi): rotating by this angle carries the first vector onto the
    second, which keeps v2 continuous at x1 = 1.  ``oriented=False`` returns the
    unsigned angle in [0, pi].
    """
    x2 = np.asarray(x2, dtype=float)
    a, ahat, chat = _plane_frame(x2)
    b = conoid_d2(np.stack([np.ones_like(x2), x2], axis=-1))
    if oriented:
        th = np.mod(np.arctan2(np.sum(b * chat, axis=-1), np.sum(b * ahat, axis=-1)), 2 * np.pi)
    else:
        th = np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))
    return float(th) if th.ndim == 0 else th


def caption_theta(x) -> Array:
    """theta(x1, x2) = (sin(pi x1 / 2) + 1) theta_max(x2) / 2, clamped to [-1, 1] in x1."""
    x1, x2 = _xy(x)
    s = np.sin(0.5 * np.pi * np.clip(x1, -1.0, 1.0))
    return 0.5 * (s + 1.0) * theta_max(x2)


def caption_alpha(x) -> Array:
    """alpha0 on |x1| <= 1, (alpha0/2)(cos(pi x1 + pi) + 1) for 1 < |x1| < 2, 0 on |x1| >= 2."""
    x1, _ = _xy(x)
    ax = np.abs(x1)
    a0 = pat.alpha0()
    mid = 0.5 * a0 * (np.cos(np.pi * ax + np.pi) + 1.0)
    out = np.where(ax <= 1.0, a0, np.where(ax >= 2.0, 0.0, mid))
    return out


@dataclass
class ConoidConfig:
    """Parameters of the desingularized conoid."""

    N: float = 5.5
    theta_fn: Callable[[Array], Array] = field(default=caption_theta)
    alpha_fn: Callable[[Array], Array] = field(default=caption_alpha)
    r: float = CONOID_RADIUS
    lo: tuple = DOMAIN_LO
    hi: tuple = DOMAIN_HI

    def __post_init__(self):
        if not (math.isfinite(self.N) and self.N > 0):
            raise DomainError("N must be positive")
        if not self.r > 0:
            raise DomainError("r must be positive")

    @property
    def quotient_compatible(self) -> bool:
        return abs(self.N - math.floor(self.N) - 0.5) < 1e-12


@dataclass
class ConoidFrame:
    v1: Array
    v2: Array
    e1: Array
    e2: Array


def conoid_frame(x, cfg: ConoidConfig | None = None) -> ConoidFrame:
    """v1 = d1 f0; v2 = rotation of d2 f0(-1, x2) by theta on |x1| <= 1, d2 f0 elsewhere."""
    cfg = ConoidConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=float)
    x1, x2 = _xy(x)
    v1 = conoid_d1(x)
    a, ahat, chat = _plane_frame(x2)
    th = np.asarray(cfg.theta_fn(x), dtype=float)[..., None]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    rotated = na * (np.cos(th) * ahat + np.sin(th) * chat)
    v2 = np.where((np.abs(x1) <= 1.0)[..., None], rotated, conoid_d2(x))
    w = np.cross(v2, v1)
    e1 = cfg.r * v2 / np.linalg.norm(v2, axis=-1, keepdims=True)
    e2 = cfg.r * w / np.linalg.norm(w, axis=-1, keepdims=True)
    return ConoidFrame(v1, v2, e1, e2)


def conoid_fields(cfg: ConoidConfig | None = None) -> Callable[[Array], tuple[Array, Array]]:
    """Shaped-family fields (a, [e1 | e2 | d2 f0]) of the conoid loop family."""
    cfg = ConoidConfig() if cfg is None else cfg

    def fields(X):
        X = np.asarray(X, dtype=float)
        fr = conoid_frame(X, cfg)
        a = np.asarray(cfg.alpha_fn(X), dtype=float)
        return np.broadcast_to(a, X.shape[:-1]), np.stack([fr.e1, fr.e2, conoid_d2(X)], axis=-1)

    return fields


def conoid_loop_family(cfg: ConoidConfig | None = None) -> LoopFamily:
    return LoopFamily.shaped(conoid_fields(cfg), 3)


def conoid_map(cfg: ConoidConfig | None = None) -> ChartMap:
    cfg = ConoidConfig() if cfg is None else cfg
    return ChartMap(plucker_conoid, cfg.lo, cfg.hi, 3, jac=conoid_jacobian, name="plucker")


def conoid_gamma_displacement(x, t, cfg: ConoidConfig | None = None) -> Array:
    """Gamma(x, t) = K_c(alpha, t) e1 + K_s(alpha, t) e2."""
    cfg = ConoidConfig() if cfg is None else cfg
    a, E = conoid_fields(cfg)(x)
    return shaped_displacement(pat.PATTERN, a, E, t)


def conoid_desingularized(x, cfg: ConoidConfig | None = None) -> Array:
    """f1 = f0 + (K_c(alpha, N x2) e1 + K_s(alpha, N x2) e2) / N."""
    cfg = ConoidConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=float)
    return plucker_conoid(x) + conoid_gamma_displacement(x, cfg.N * x[..., 1], cfg) / cfg.N


def conoid_corrugated_map(cfg: ConoidConfig | None = None) -> ChartMap:
    """The same map through corrugation_process, with its semi-analytic differential."""
    cfg = ConoidConfig() if cfg is None else cfg
    return corrugation_process(conoid_map(cfg), Submersion.axis(1, 2), conoid_loop_family(cfg), cfg.N)


def min_singular_value(cfg: ConoidConfig | None = None, res=513, extra_points=((0.0, 0.0), (0.0, 0.5))) -> dict:
    """Smallest singular value of D f1 over a grid plus the former pinch points."""
    cfg = ConoidConfig() if cfg is None else cfg
    f1 = conoid_corrugated_map(cfg)
    X = grid_points(cfg.lo, cfg.hi, res).reshape(-1, 2)
    X = np.concatenate([X, np.asarray(extra_points, dtype=float).reshape(-1, 2)])
    smin = np.inf
    at = None
    for s in range(0, X.shape[0], 1 << 15):
        xs = X[s:s + (1 << 15)]
        sv = np.linalg.svd(f1.jacobian(xs), compute_uv=False)[..., -1]
        k = int(np.argmin(sv))
        if sv[k] < smin:
            smin, at = float(sv[k]), xs[k]
    pinch = np.linalg.svd(f1.jacobian(np.asarray(extra_points, dtype=float)), compute_uv=False)[..., -1]
    return {"min_singular_value": smin, "argmin": at, "pinch_singular_values": pinch}


def act(k: int, x) -> Array:
    """k . (x1, x2) = ((-1)^k x1, x2 + k)."""
    x = np.asarray(x, dtype=float)
    return np.stack([(-1.0) ** k * x[..., 0], x[..., 1] + k], axis=-1)


@dataclass
class MobiusReport:
    N: float
    max_violation: float
    e1_violation: float
    e2_violation: float
    expected: bool
    tol: float = 1e-9

    @property
    def descends(self) -> bool:
        return self.max_violation < self.tol

    @property
    def ok(self) -> bool:
        """True when the outcome matches the expectation from N (half-integers descend)."""
        return self.descends == self.expected


def mobius_check(cfg: ConoidConfig | None = None, res=129) -> MobiusReport:
    """Max of |Gamma(1.x, N(x2 + 1)) - Gamma(x, N x2)| over a grid, plus the frame symmetries."""
    cfg = ConoidConfig() if cfg is None else cfg
    X = grid_points(cfg.lo, cfg.hi, res)
    Y = act(1, X)
    fields = conoid_fields(cfg)
    a0, E0 = fields(X)
    a1, E1 = fields(Y)
    g0 = shaped_displacement(pat.PATTERN, a0, E0, cfg.N * X[..., 1])
    g1 = shaped_displacement(pat.PATTERN, a1, E1, cfg.N * Y[..., 1])
    viol = float(np.max(np.linalg.norm(g1 - g0, axis=-1)))
    e1v = float(np.max(np.linalg.norm(E1[..., 0] - E0[..., 0], axis=-1)))
    e2v = float(np.max(np.linalg.norm(E1[..., 1] + E0[..., 1], axis=-1)))
    return MobiusReport(cfg.N, viol, e1v, e2v, cfg.quotient_compatible)


def default_beta(x1) -> Array:
    """beta(x1) = ((1 + cos(2 pi x1 / 5)) / 2)^0.75."""
    x1 = np.asarray(x1, dtype=float)
    return np.maximum(0.5 * (1.0 + np.cos(2.0 * np.pi * x1 / 5.0)), 0.0) ** 0.75


def sphere_cap(x) -> Array:
    """S(x1, x2) = 2.5 (cos pi x2 sin(pi x1/5), sin pi x2 sin(pi x1/5), cos(pi x1/5))."""
    x1, x2 = _xy(x)
    s = np.sin(np.pi * x1 / 5.0)
    return 2.5 * np.stack([np.cos(np.pi * x2) * s, np.sin(np.pi * x2) * s, np.cos(np.pi * x1 / 5.0)], axis=-1)


def rp2_extension(x, cfg: ConoidConfig | None = None, beta_fn: Callable[[Array], Array] = default_beta) -> Array:
    """F1 on [-5, 5] x [0, 1]: the sphere S carrying the corrugation of f1 on |x1| <= 2.5."""
    cfg = ConoidConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=float)
    x1, x2 = _xy(x)
    if np.any(np.abs(x1) > 5.0 + 1e-12) or np.any(x2 < -1e-12) or np.any(x2 > 1.0 + 1e-12):
        raise DomainError("rp2_extension is defined on [-5, 5] x [0, 1]")
    S = sphere_cap(x)
    inside = np.abs(x1) <= 2.5
    out = S.copy()
    if np.any(inside):
        xi = x[inside]
        f0 = plucker_conoid(xi)
        f1 = conoid_desingularized(xi, cfg)
        si = S[inside]
        out[inside, :2] = si[:, :2] + f1[:, :2] - f0[:, :2]
        out[inside, 2] = si[:, 2] + beta_fn(xi[:, 0]) * (f1[:, 2] - 1.0)
    return out


def rp2_map(cfg: ConoidConfig | None = None, beta_fn: Callable[[Array], Array] = default_beta) -> ChartMap:
    cfg = ConoidConfig() if cfg is None else cfg
    return ChartMap(lambda X: rp2_extension(X, cfg, beta_fn), RP2_LO, RP2_HI, 3, name="rp2")


def extended_conoid(x, cfg: ConoidConfig | None = None) -> Array:
    """f1 on D and f0 on the rest of R x [0, 1]."""
    cfg = ConoidConfig() if cfg is None else cfg
    x = np.asarray(x, dtype=float)
    out = plucker_conoid(x)
    inside = (x[..., 0] >= cfg.lo[0]) & (x[..., 0] <= cfg.hi[0])
    if np.any(inside):
        out[inside] = conoid_desingularized(x[inside], cfg)
    return out


def inversion(y, center=None) -> Array:
    """y -> (y - c) / |y - c|^2 (c = 0 by default)."""
    y = np.asarray(y, dtype=float)
    if center is not None:
        y = y - np.asarray(center, dtype=float)
    n2 = np.sum(y * y, axis=-1, keepdims=True)
    if np.any(n2 == 0.0):
        raise DegenerateError("inversion is singular at its center")
    return y / n2
