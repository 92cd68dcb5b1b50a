"""Nash-Kuiper staging driven by Corrugation Processes on a periodic chart grid.

The run keeps values and differentials on grid nodes.  Each step sets the new
values exactly and the new differential semi-analytically: the oscillating
part is exact and only the slow frame fields are differentiated on the grid.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import pattern as pat
from .chart import ChartMap, MetricField, grid_gradient, grid_points, pullback_from_jacobian
from .corrugation import _semi_analytic_jacobian
from .errors import ConeError, ContractError, DomainError, ShapeError
from .relations import apply_j, oriented_normal, orthonormal_span, project

Array = np.ndarray
N_CAP = 1 << 20
ZERO_RHO = 1e-14


def isometric_default(f: ChartMap, g: MetricField) -> MetricField:
    """Delta = g - f*h."""
    if f.m != g.m:
        raise ShapeError("map and metric live on different charts")
    return MetricField(lambda X: g(X) - pullback_from_jacobian(f.jacobian(X)), g.lo, g.hi, positive=False,
                       name="default")


def stage_metric(f0: ChartMap, g: MetricField, delta_k: float) -> MetricField:
    """g_k = f0*h + delta_k (g - f0*h)."""
    if not 0.0 <= delta_k <= 1.0:
        raise DomainError("delta_k must lie in [0, 1]")
    return MetricField(lambda X: (1.0 - delta_k) * pullback_from_jacobian(f0.jacobian(X)) + delta_k * g(X),
                       g.lo, g.hi, name=f"g[{delta_k:g}]")


def delta_sequence(stages: int) -> Array:
    """delta_k = 1 - 4^-k for k = 1..stages."""
    k = np.arange(1, int(stages) + 1, dtype=float)
    return 1.0 - 4.0 ** (-k)


def generalized_max_eig(A: Array, B: Array) -> Array:
    """Largest eigenvalue of A relative to the positive definite B, batched."""
    L = np.linalg.cholesky(B)
    Li = np.linalg.inv(L)
    C = Li @ A @ np.swapaxes(Li, -1, -2)
    return np.linalg.eigvalsh(0.5 * (C + np.swapaxes(C, -1, -2)))[..., -1]


def metric_distance(A: Array, B: Array, base: Array) -> Array:
    """Frobenius norm of A - B in base-orthonormal coordinates, batched."""
    L = np.linalg.cholesky(base)
    Li = np.linalg.inv(L)
    C = Li @ (A - B) @ np.swapaxes(Li, -1, -2)
    return np.linalg.norm(C, axis=(-2, -1))


@dataclass
class FormDecomposition:
    """sum_j rho_j ell_j (x) ell_j with rho_j >= 0 and constant covectors ell_j."""

    rhos: list
    ells: list
    sign: float = 1.0

    def __len__(self):
        return len(self.ells)

    def reconstruct(self) -> Array:
        out = 0.0
        for rho, ell in zip(self.rhos, self.ells):
            out = out + np.asarray(rho)[..., None, None] * np.outer(ell, ell)
        return out

    def nonzero(self, tol: float = ZERO_RHO) -> list[tuple[int, Array, Array]]:
        return [(j, r, e) for j, (r, e) in enumerate(zip(self.rhos, self.ells)) if np.max(r) > tol]


def decompose_metric(D, tol: float = 1e-9, clamp: bool = False) -> FormDecomposition:
    """Write a field of PSD 2 x 2 (or 1 x 1) matrices with dx1, dx2, (dx1 + s dx2)/sqrt 2.

    rho3 = 2|F|, rho1 = E - |F|, rho2 = G - |F| with s the sign of the grid-majority
    off-diagonal.  Where F has the minority sign a fourth form (dx1 - s dx2)/sqrt 2
    carries it.  Fails with ConeError when E < |F| or G < |F| beyond ``tol``,
    unless ``clamp`` is set, in which case negative coefficients are cut to 0.
    """
    D = np.asarray(D, dtype=float)
    m = D.shape[-1]
    if D.shape[-2] != m or m not in (1, 2):
        raise ShapeError("decompose_metric handles 1 x 1 and 2 x 2 fields")
    scale = max(1.0, float(np.max(np.abs(D))))
    if m == 1:
        rho = D[..., 0, 0]
        if np.min(rho) < -tol * scale and not clamp:
            raise ConeError("negative increase")
        return FormDecomposition([np.maximum(rho, 0.0)], [np.ones(1)])
    E, F, G = D[..., 0, 0], 0.5 * (D[..., 0, 1] + D[..., 1, 0]), D[..., 1, 1]
    s = 1.0 if np.sum(F > 0) >= np.sum(F < 0) else -1.0
    aF = np.abs(F)
    r1, r2 = E - aF, G - aF
    if not clamp and (np.min(r1) < -tol * scale or np.min(r2) < -tol * scale):
        raise ConeError("increase is outside the cone of dx1^2, dx2^2, (dx1 +- dx2)^2")
    rhos = [np.maximum(r1, 0.0), np.maximum(r2, 0.0), 2.0 * np.maximum(s * F, 0.0)]
    ells = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, s]) / math.sqrt(2.0)]
    minority = np.maximum(-s * F, 0.0)
    if np.max(minority) > 0.0:
        rhos.append(2.0 * minority)
        ells.append(np.array([1.0, -s]) / math.sqrt(2.0))
    dec = FormDecomposition(rhos, ells, s)
    if not clamp and np.max(np.abs(dec.reconstruct() - 0.5 * (D + np.swapaxes(D, -1, -2)))) > 10 * tol * scale:
        raise ConeError("decomposition residual above tolerance")
    return dec


@dataclass
class IterationSchedule:
    """Stage count, delta rule, epsilon budgets and the N search policy."""

    stages: int = 3
    eps_scale: float = 0.1
    n_start: int = 8
    n_cap: int = N_CAP
    points_per_period: float = 8.0
    sv_margin: float = 0.1
    strict: bool = True
    delta_rule: Callable[[int], Array] = field(default=delta_sequence)

    def __post_init__(self):
        if self.stages < 0:
            raise DomainError("stages must be >= 0")
        if self.n_start < 1 or self.n_cap < self.n_start:
            raise DomainError("need 1 <= n_start <= n_cap")

    def deltas(self) -> Array:
        d = np.asarray(self.delta_rule(self.stages), dtype=float)
        full = np.concatenate([[0.0], d])
        if np.any(np.diff(full) <= 0) or np.any(d >= 1.0):
            raise DomainError("delta_k must increase strictly inside (0, 1)")
        return d

    def sqrt_increment_sum(self) -> float:
        full = np.concatenate([[0.0], self.deltas()])
        return float(np.sum(np.sqrt(np.diff(full))))

    def eps(self, k: int, delta_norm: float) -> float:
        return self.eps_scale * 2.0 ** (-k) * delta_norm


@dataclass
class GridState:
    """Values V (*res, n) and differentials D (*res, n, m) of a map on chart grid nodes."""

    lo: Array
    hi: Array
    periodic: tuple
    V: Array
    D: Array

    @classmethod
    def sample(cls, f: ChartMap, res) -> "GridState":
        X = grid_points(f.lo, f.hi, res)
        return cls(f.lo, f.hi, tuple(f.periodic), f(X), f.jacobian(X))

    @property
    def res(self) -> tuple:
        return self.V.shape[:-1]

    @property
    def m(self) -> int:
        return self.D.shape[-1]

    @property
    def n(self) -> int:
        return self.V.shape[-1]

    def points(self) -> Array:
        return grid_points(self.lo, self.hi, self.res)

    def metric(self) -> Array:
        return pullback_from_jacobian(self.D)

    def min_sv(self) -> float:
        return float(np.min(np.linalg.svd(self.D, compute_uv=False)[..., -1]))

    def to_chartmap(self, name: str = "") -> ChartMap:
        return ChartMap.from_grid(self.V, self.lo, self.hi, jac=self.D, periodic=self.periodic, name=name)


@dataclass
class StepData:
    """One isometric Corrugation Process step on a grid."""

    state: GridState
    N: float
    ell: Array
    alpha: Array
    r: Array
    t_vec: Array
    n_vec: Array
    dfu: Array
    sup_gamma: float
    mu: Array


def _dual_vector(G: Array, ell: Array) -> Array:
    """u = G^-1 ell / ell^T G^-1 ell, G-orthogonal to ker ell with ell(u) = 1."""
    w = np.linalg.solve(G, np.broadcast_to(ell, G.shape[:-1])[..., None])[..., 0]
    return w / (w @ ell)[..., None]


def _kernel_const(ell: Array) -> Array:
    _, _, vt = np.linalg.svd(ell[None, :])
    return vt[1:].T


def isometric_grid_step(state: GridState, rho: Array, ell, N: float, target: str = "euclidean",
                        normal: Callable[[Array], Array] | None = None) -> StepData:
    """f1 = f + (r/N) K_c(alpha, N ell.x) t + (r/N) K_s(alpha, N ell.x) n with mu = f*h + rho ell (x) ell."""
    ell = np.asarray(ell, dtype=float)
    N = float(N)
    D, V = state.D, state.V
    m, n = state.m, state.n
    rho = np.broadcast_to(np.asarray(rho, dtype=float), state.res)
    if np.any(rho < 0.0):
        raise DomainError("rho must be nonnegative")
    G = pullback_from_jacobian(D)
    u = _dual_vector(G, ell)
    B = D @ _kernel_const(ell)
    if target == "totally_real":
        if n != 2 * m:
            raise ShapeError("totally real targets need n = 2m")
        B = np.concatenate([B, apply_j(np.swapaxes(B, -1, -2)).swapaxes(-1, -2)], axis=-1)
    elif target != "euclidean":
        raise ValueError("target must be 'euclidean' or 'totally_real'")
    Q = orthonormal_span(B, B.shape[-1]) if B.shape[-1] else B
    dfu = np.einsum("...nm,...m->...n", D, u)
    perp = dfu - (project(Q, dfu) if Q.shape[-1] else 0.0)
    nperp = np.linalg.norm(perp, axis=-1)
    if np.any(nperp == 0.0):
        raise ContractError("df(u) lies in P")
    r = np.sqrt(nperp**2 + rho)
    t_vec = perp / nperp[..., None]
    alpha = np.where(rho == 0.0, 0.0, pat.j0_inverse(np.where(rho == 0.0, 1.0, np.minimum(nperp / r, 1.0))))
    if target == "totally_real":
        n_vec = apply_j(t_vec)
    elif normal is not None:
        n_vec = np.asarray(normal(state.points()), dtype=float)
    else:
        if n != m + 1:
            raise ContractError("euclidean steps need codimension one or an explicit normal")
        n_vec = oriented_normal(D)
    E = np.stack([r[..., None] * t_vec, r[..., None] * n_vec, dfu], axis=-1)
    X = state.points()
    tph = N * (X @ ell)
    kc, ks = pat.k_pair(alpha, tph)
    V1 = V + (kc[..., None] * E[..., 0] + ks[..., None] * E[..., 1]) / N
    pack = np.concatenate([alpha[..., None], E[..., 0], E[..., 1]], axis=-1)
    grads = grid_gradient(pack, state.lo, state.hi, state.periodic)
    c = pat.pattern_c(alpha, tph)
    gval = np.einsum("...nk,...k->...n", E, c)
    D1 = _semi_analytic_jacobian(D, np.broadcast_to(ell, X.shape), gval, dfu, alpha, E, tph,
                                 grads[..., 0, :], grads[..., 1:1 + n, :], grads[..., 1 + n:, :], N)
    sup_gamma = _sup_loop(alpha, E)
    mu = G + rho[..., None, None] * np.outer(ell, ell)
    return StepData(GridState(state.lo, state.hi, state.periodic, V1, D1), N, ell, alpha, r, t_vec, n_vec, dfu,
                    sup_gamma, mu)


def _sup_loop(alpha: Array, E: Array, samples: int = 65) -> float:
    """sup over nodes and t of |gamma|; gamma depends on t only through s = cos 2 pi t."""
    a = alpha.ravel()
    Ef = E.reshape(-1, *E.shape[-2:])
    j0 = pat.bessel_j0(a) if a.size else a
    best = 0.0
    for s in np.linspace(-1.0, 1.0, samples):
        g = (np.cos(a * s) - j0)[:, None] * Ef[..., 0] + np.sin(a * s)[:, None] * Ef[..., 1] + Ef[..., 2]
        best = max(best, float(np.max(np.linalg.norm(g, axis=-1))))
    return best


def j_density_from_jacobian(D: Array, frame: Array | None = None) -> Array:
    """kappa = sqrt|det[df(e), J df(e)]| with (e_i) the f*h Gram-Schmidt of ``frame`` (default: chart basis)."""
    D = np.asarray(D, dtype=float)
    m = D.shape[-1]
    if D.shape[-2] != 2 * m:
        raise ShapeError("J-density needs a map into C^m")
    F = np.eye(m) if frame is None else np.asarray(frame, dtype=float)
    W = D @ F
    G = pullback_from_jacobian(W)
    ev = np.linalg.eigvalsh(G)
    if np.any(ev[..., 0] <= 1e-14 * np.maximum(ev[..., -1], 1.0)):
        raise DomainError("degenerate pullback metric")
    R = np.swapaxes(np.linalg.cholesky(G), -1, -2)
    Eo = W @ np.linalg.inv(R)
    M = np.concatenate([Eo, apply_j(np.swapaxes(Eo, -1, -2)).swapaxes(-1, -2)], axis=-1)
    return np.sqrt(np.abs(np.linalg.det(M)))


def j_density(f: ChartMap, x, frame: Array | None = None):
    """J-density of f at x (batched)."""
    out = j_density_from_jacobian(f.jacobian(np.asarray(x, dtype=float)), frame)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class JDensityReport:
    worst_margin: float
    fitted_c: float
    stage_margin: float | None

    @property
    def ok(self) -> bool:
        return math.isfinite(self.fitted_c)


def _jacobian_grid(f, res) -> Array:
    if isinstance(f, ChartMap):
        return f.jacobian(grid_points(f.lo, f.hi, res))
    if isinstance(f, GridState):
        return f.D
    return np.asarray(f, dtype=float)


def j_density_step_bound(f_before, f_after, mu, u_star, N: float, stage_factor: float | None = None,
                         res=65) -> JDensityReport:
    """Check kappa_after >= kappa_before / sqrt(mu(u*, u*)) - C/N and report the fitted C.

    Maps may be ChartMaps (sampled at ``res``), GridStates or jacobian arrays;
    ``mu`` and ``u_star`` are arrays on the same nodes.  With ``stage_factor``
    the stage form kappa_after >= kappa_before * stage_factor is checked too.
    """
    kb = j_density_from_jacobian(_jacobian_grid(f_before, res))
    ka = j_density_from_jacobian(_jacobian_grid(f_after, res))
    mu = np.asarray(mu, dtype=float)
    us = np.asarray(u_star, dtype=float)
    muu = np.einsum("...i,...ij,...j->...", us, mu, us)
    deficit = kb / np.sqrt(muu) - ka
    worst = float(np.max(deficit))
    fitted = max(worst, 0.0) * float(N)
    stage = None if stage_factor is None else float(np.min(ka - kb * stage_factor))
    return JDensityReport(-worst, fitted, stage)


@dataclass
class StepRecord:
    stage: int
    form: int
    N: float
    defect: float
    step_error: float
    eps: float
    drift: float
    drift_bound: float
    min_kappa: float
    min_sv: float
    status: str


@dataclass
class NKResult:
    """Stage maps, per-step diagnostics and Maslov step data of a run."""

    target: str
    deltas: Array
    delta_norm: float
    initial_defect: float
    stages: list
    steps: list
    shortness: list
    status: str = "ok"
    message: str = ""
    step_angles: list = field(default_factory=list)
    step_alphas: list = field(default_factory=list)
    step_phases: list = field(default_factory=list)
    step_forms: list = field(default_factory=list)
    step_states: list = field(default_factory=list)
    reference: Array | None = None

    @property
    def final(self) -> GridState:
        return self.stages[-1]

    @property
    def final_defect(self) -> float:
        return self.steps[-1].defect if self.steps else self.initial_defect

    @property
    def drift_total(self) -> float:
        return float(sum(s.drift for s in self.steps))

    @property
    def drift_bound_total(self) -> float:
        return float(sum(s.drift_bound for s in self.steps))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "form", "N", "defect", "drift", "min_kappa", "min_sv"])
        for s in self.steps:
            w.writerow([s.stage, s.form, repr(float(s.N)), repr(s.defect), repr(s.drift), repr(s.min_kappa),
                        repr(s.min_sv)])
        return buf.getvalue()


def _integral_form(ell: Array, rho: Array) -> tuple[Array, Array]:
    """Rescale (ell, rho) keeping rho ell (x) ell so that ell has integer entries when possible."""
    nz = ell[np.abs(ell) > 1e-12]
    scale = 1.0 / np.min(np.abs(nz))
    e2 = ell * scale
    if np.max(np.abs(e2 - np.round(e2))) > 1e-9:
        raise ContractError("periodic charts need covectors proportional to integer ones")
    return np.round(e2), rho / scale**2


def _resolution_cap(state: GridState, ell: Array, ppp: float) -> int:
    h = (state.hi - state.lo) / (np.asarray(state.res) - 1)
    k = np.abs(ell) * h
    return max(1, int(1.0 / (ppp * float(np.max(k)))))


def nash_kuiper_run(f0: ChartMap, g: MetricField, target: str = "euclidean", sched: IterationSchedule | None = None,
                    res=257, normal=None) -> NKResult:
    """Stages k = 1..K: decompose g_k - f*h into squares and corrugate once per form.

    N is the first value of a doubling search from ``n_start`` whose step meets
    the epsilon budget and keeps the smallest singular value above ``sv_margin``
    times its previous value.  When the cap (the smaller of ``n_cap`` and the
    grid resolution cap) is reached first, a strict schedule stops the run with
    status "convergence"; otherwise the capped step is kept and flagged.
    """
    sched = IterationSchedule() if sched is None else sched
    deltas = sched.deltas()
    state = GridState.sample(f0, res)
    X = state.points()
    Gt = g(X)
    G0 = state.metric()
    Delta = Gt - G0
    delta_norm = float(np.max(generalized_max_eig(Delta, G0)))
    init_def = float(np.max(np.linalg.norm(Delta, axis=(-2, -1))))
    result = NKResult(target, deltas, delta_norm, init_def, [state], [], [])
    if target == "totally_real":
        from .analysis import maslov_z_from_jacobian
        result.reference = state.D.copy()
        z_prev = maslov_z_from_jacobian(state.D, result.reference)
    periodic = any(state.periodic)
    for k, dk in enumerate(deltas, start=1):
        gk = G0 + dk * Delta
        eps_k = sched.eps(k, delta_norm)
        try:
            dec = decompose_metric(gk - state.metric())
        except ConeError as exc:
            if sched.strict:
                result.status, result.message = "cone", f"stage {k}: {exc}"
                return result
            dec = decompose_metric(gk - state.metric(), clamp=True)
            result.message = f"stage {k}: increase clamped to the cone"
        forms = dec.nonzero()
        eps_step = eps_k / max(len(forms), 1)
        for j, rho, ell in forms:
            if periodic:
                ell, rho = _integral_form(ell, rho)
            cap = min(sched.n_cap, _resolution_cap(state, ell, sched.points_per_period))
            sv0 = state.min_sv()
            N = min(sched.n_start, cap)
            accepted = None
            while True:
                step = isometric_grid_step(state, rho, ell, N, target, normal)
                G1 = step.state.metric()
                err = float(np.max(metric_distance(G1, step.mu, step.mu)))
                sv1 = step.state.min_sv()
                if err <= eps_step and sv1 >= sched.sv_margin * sv0:
                    accepted = "ok"
                    break
                if 2 * N > cap:
                    accepted = "capped"
                    break
                N *= 2
            drift = float(np.max(np.linalg.norm(step.state.V - state.V, axis=-1)))
            kappa = float(np.min(j_density_from_jacobian(step.state.D))) if target == "totally_real" else float("nan")
            defect = float(np.max(np.linalg.norm(Gt - G1, axis=(-2, -1))))
            result.steps.append(StepRecord(k, j, float(N), defect, err, eps_step, drift, 2.0 * step.sup_gamma / N,
                                           kappa, sv1, accepted))
            result.step_alphas.append(step.alpha)
            result.step_phases.append(N * (X @ ell))
            result.step_forms.append((k, j, float(N), ell))
            result.step_states.append(step.state)
            if target == "totally_real":
                z = maslov_z_from_jacobian(step.state.D, result.reference)
                result.step_angles.append(0.5 * np.angle(z / z_prev))
                z_prev = z
            state = step.state
            if accepted == "capped" and sched.strict:
                result.stages.append(state)
                result.status = "convergence"
                result.message = f"stage {k} form {j}: no N <= {cap} met eps {eps_step:.3g} (error {err:.3g})"
                return result
        result.stages.append(state)
        if k < len(deltas):
            nxt = G0 + deltas[k] * Delta
        else:
            nxt = G0 + (1.0 - 0.25 * (1.0 - dk)) * Delta
        gap = np.linalg.eigvalsh(nxt - state.metric())[..., 0]
        result.shortness.append(float(np.min(gap)))
    if any(s.status != "ok" for s in result.steps):
        result.status = "budget"
        result.message = "some steps exceeded their epsilon budget at the N cap"
    return result


def torus_of_revolution(scale: float = 0.6, R: float = 1.0 / (3.0 * math.pi), r: float = 1.0 / (6.0 * math.pi)) -> ChartMap:
    """Periodic chart [0,1]^2 -> R^3 of a torus of revolution, scaled; short for dx1^2 + dx2^2."""
    tp = 2.0 * math.pi

    def f(X):
        a, b = tp * X[..., 0], tp * X[..., 1]
        rad = R + r * np.cos(b)
        return scale * np.stack([rad * np.cos(a), rad * np.sin(a), r * np.sin(b)], axis=-1)

    def jac(X):
        a, b = tp * X[..., 0], tp * X[..., 1]
        rad = R + r * np.cos(b)
        d1 = np.stack([-rad * np.sin(a), rad * np.cos(a), np.zeros_like(a)], axis=-1) * tp
        d2 = np.stack([-r * np.sin(b) * np.cos(a), -r * np.sin(b) * np.sin(a), r * np.cos(b)], axis=-1) * tp
        return scale * np.stack([d1, d2], axis=-1)

    return ChartMap(f, [0.0, 0.0], [1.0, 1.0], 3, jac=jac, periodic=(True, True), name="torus")


def circle_in_c(c: float = 0.6 / (2.0 * math.pi)) -> ChartMap:
    """x -> c e^{2 pi i x} on the periodic interval [0, 1]."""
    tp = 2.0 * math.pi
    return ChartMap(lambda X: c * np.stack([np.cos(tp * X[..., 0]), np.sin(tp * X[..., 0])], axis=-1),
                    [0.0], [1.0], 2,
                    jac=lambda X: (c * tp * np.stack([-np.sin(tp * X[..., 0]), np.cos(tp * X[..., 0])], axis=-1))[..., None],
                    periodic=(True,), name="circle")


def clifford_torus(c: float = 0.6 / (2.0 * math.pi)) -> ChartMap:
    """(x1, x2) -> (c e^{2 pi i x1}, c e^{2 pi i x2}) in C^2 (interleaved coordinates)."""
    tp = 2.0 * math.pi

    def f(X):
        a, b = tp * X[..., 0], tp * X[..., 1]
        return c * np.stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)], axis=-1)

    def jac(X):
        a, b = tp * X[..., 0], tp * X[..., 1]
        z = np.zeros_like(a)
        d1 = np.stack([-np.sin(a), np.cos(a), z, z], axis=-1)
        d2 = np.stack([z, z, -np.sin(b), np.cos(b)], axis=-1)
        return c * tp * np.stack([d1, d2], axis=-1)

    return ChartMap(f, [0.0, 0.0], [1.0, 1.0], 4, jac=jac, periodic=(True, True), name="clifford")


def square_in_c2(scale: float = 0.6, twist: float = 0.0) -> ChartMap:
    """Linear map of the square [0,1]^2 into C^2 (interleaved coordinates).

    The second column leans by ``twist`` radians toward J of the first, so the
    J-density is cos(twist) and twist = 0 is a Lagrangian plane.
    """
    A = np.zeros((4, 2))
    A[0, 0] = scale
    A[2, 1] = scale * math.cos(twist)
    A[1, 1] = scale * math.sin(twist)
    return ChartMap(lambda X: X @ A.T, [0.0, 0.0], [1.0, 1.0], 4,
                    jac=lambda X: np.broadcast_to(A, np.shape(X)[:-1] + A.shape), name="square")


def flat_metric(m: int, lo=None, hi=None) -> MetricField:
    lo = [0.0] * m if lo is None else lo
    hi = [1.0] * m if hi is None else hi
    return MetricField.constant(np.eye(m), lo, hi, name="flat")
