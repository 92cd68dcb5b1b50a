"""Maslov maps through squared complex determinants, and corrugation matrices.

Maps into C^m use interleaved real coordinates, as in ``relations``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .chart import ChartMap
from .errors import ContractError, DegenerateError, ShapeError
from .relations import apply_j, oriented_normal

Array = np.ndarray
KAPPA_MIN = 1e-6


def complexify(W: Array) -> Array:
    """(..., 2m, k) real matrix -> (..., m, k) complex matrix of its columns."""
    W = np.asarray(W, dtype=float)
    if W.shape[-2] % 2:
        raise ShapeError("complex targets need an even real dimension")
    return W[..., 0::2, :] + 1j * W[..., 1::2, :]


def _jacobian(f, x) -> Array:
    if isinstance(f, ChartMap):
        return f.jacobian(np.asarray(x, dtype=float))
    return np.asarray(f, dtype=float)


def _kappa(D: Array) -> Array:
    from .nash_kuiper import j_density_from_jacobian
    return j_density_from_jacobian(D)


def maslov_z_from_jacobian(D: Array, frame: Array) -> Array:
    """det_C^2 of the columns of D in complex coordinates relative to the columns of ``frame``.

    Any real change of the source basis multiplies the determinant by a real
    number, so the argument only depends on the tangent plane.
    """
    Dc = complexify(D)
    Fc = complexify(np.broadcast_to(frame, D.shape))
    det_d = np.linalg.det(Dc)
    det_f = np.linalg.det(Fc)
    if np.any(det_f == 0.0):
        raise DegenerateError("reference frame is not totally real")
    return (det_d / det_f) ** 2


def maslov_det2(f, frame, x=None):
    """z(f) at x relative to the totally real frame (columns eps_1..eps_m); never 0 when kappa > 1e-6."""
    D = _jacobian(f, x)
    if np.any(_kappa(D) <= KAPPA_MIN):
        raise DegenerateError("map is not totally real here")
    fr = frame(np.asarray(x, dtype=float)) if callable(frame) else np.asarray(frame, dtype=float)
    z = maslov_z_from_jacobian(D, fr)
    return complex(z) if np.ndim(z) == 0 else z


def maslov_step_angle(f_before, f_after, frame, x=None, reference=None):
    """Half the argument of z(f_after) / z(f_before).

    Without ``reference`` the principal branch in (-pi/2, pi/2] is returned.
    With a reference angle field the branch closest to it is chosen instead,
    which is needed once the amplitude exceeds pi/2.
    """
    zb = maslov_det2(f_before, frame, x)
    za = maslov_det2(f_after, frame, x)
    ang = 0.5 * np.angle(np.asarray(za) / np.asarray(zb))
    ang = np.where(ang <= -np.pi / 2, ang + np.pi, ang)
    if reference is not None:
        ang = wrap_to(ang, reference)
    return float(ang) if np.ndim(ang) == 0 else ang


@dataclass
class MaslovTrace:
    """Per-step angles theta_{k,j}, accumulated arguments W and the series data.

    ``angles`` are principal values in (-pi/2, pi/2]; ``unwrapped`` picks the
    branch closest to alpha cos(2 pi N pi).  Steps where the two differ are
    listed in ``flagged``.
    """

    angles: list
    unwrapped: list
    partial: list
    alphas: list
    phases: list
    forms: list
    reference: Array | None = None
    flagged: list = field(default_factory=list)

    @property
    def W(self) -> Array:
        return self.partial[-1]

    def residuals(self) -> list[float]:
        """sup |theta_l - alpha_l cos(2 pi N_l pi_l)| per step, on the unwrapped branch."""
        return [float(np.max(np.abs(th - a * np.cos(2 * np.pi * ph))))
                for th, a, ph in zip(self.unwrapped, self.alphas, self.phases)]

    def rows(self, points: Array):
        P = np.asarray(points, dtype=float)
        P = P.reshape(-1, P.shape[-1])
        for s, (th, a, W) in enumerate(zip(self.angles, self.alphas, self.partial[1:])):
            N = self.forms[s][2]
            for p, t_, a_, w_ in zip(P, th.ravel(), a.ravel(), W.ravel()):
                x2 = p[1] if p.size > 1 else 0.0
                yield float(p[0]), float(x2), s, float(t_), float(a_), float(N), float(w_)

    def to_csv(self, points: Array) -> str:
        """Rows x1,x2,step,theta,alpha,N,W_partial over the given points."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x1", "x2", "step", "theta", "alpha", "N", "W_partial"])
        for row in self.rows(points):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def wrap_to(angle, reference) -> Array:
    """The representative of angle mod pi closest to reference."""
    ref = np.asarray(reference, dtype=float)
    return ref + np.mod(np.asarray(angle, dtype=float) - ref + np.pi / 2, np.pi) - np.pi / 2


def maslov_argument_series(run) -> MaslovTrace:
    """Accumulate W = sum 2 theta over the steps of a totally real Nash-Kuiper run."""
    if run.target != "totally_real":
        raise ContractError("Maslov data exists only for totally real runs")
    n = len(run.steps)
    if not (len(run.step_angles) == len(run.step_alphas) == len(run.step_phases) == len(run.step_forms) == n):
        raise ContractError("incomplete trace: per-step Maslov data is missing")
    W = np.zeros(run.stages[0].res)
    partial, unwrapped, flagged = [W], [], []
    for s, (th, a, ph) in enumerate(zip(run.step_angles, run.step_alphas, run.step_phases)):
        uw = wrap_to(th, a * np.cos(2 * np.pi * ph))
        if np.max(np.abs(uw - th)) > 1e-9:
            flagged.append(s)
        unwrapped.append(uw)
        W = W + 2.0 * th
        partial.append(W)
    return MaslovTrace(list(run.step_angles), unwrapped, partial, list(run.step_alphas), list(run.step_phases),
                       list(run.step_forms), run.reference, flagged)


def _unit(v: Array) -> Array:
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(nv == 0.0):
        raise DegenerateError("zero vector in a frame")
    return v / nv


def kernel_vector(ell) -> Array:
    """The basis vector (-ell_2, ell_1) of ker ell, positively oriented after any u with ell(u) = 1."""
    ell = np.asarray(ell, dtype=float)
    if ell.shape != (2,) or not np.any(ell):
        raise ShapeError("corrugation bases are implemented for nonzero covectors on surfaces")
    return np.array([-ell[1], ell[0]])


def frame_b(D: Array, ell_prev) -> Array:
    """B = (v_perp, v1, n) as columns: v1 along df(ker ell_prev), n the oriented normal."""
    D = np.asarray(D, dtype=float)
    if D.shape[-2:] != (3, 2):
        raise ShapeError("corrugation bases need surfaces in R^3")
    v1 = _unit(D @ kernel_vector(ell_prev))
    nv = oriented_normal(D)
    return np.stack([np.cross(v1, nv), v1, nv], axis=-1)


def frame_b_plus(D: Array, ell_next) -> Array:
    """B+ = (t_perp, v1+, n) with v1+ along df(ker ell_next)."""
    return frame_b(D, ell_next)


@dataclass
class CorrugationBases:
    """Frames at probe points (columns) and the rotations R, L, M = L R."""

    B: Array
    B_plus: Array
    R: Array
    B_next: Array | None = None
    L: Array | None = None
    M: Array | None = None
    t_vec: Array | None = None

    def orthogonality_residual(self) -> float:
        frames = [self.B, self.B_plus] + ([self.B_next] if self.B_next is not None else [])
        I = np.eye(3)
        return float(max(np.max(np.abs(np.swapaxes(F, -1, -2) @ F - I)) for F in frames))

    def determinants(self) -> Array:
        mats = [self.R] + ([self.L, self.M] if self.L is not None else [])
        return np.stack([np.linalg.det(A) for A in mats])


def corrugation_bases(f_kj, ell_prev, ell_next, x=None, f_next=None) -> CorrugationBases:
    """Frames B_{k,j}, B+_{k,j} of f_kj and, given f_next = f_{k,j+1}, B_{k,j+1}, L and M.

    The matrix carrying basis F to basis F' has entries <F'_i, F_l>, so that
    M = L R carries B_{k,j} to B_{k,j+1}.
    """
    D = _jacobian(f_kj, x)
    ell_next = np.asarray(ell_next, dtype=float)
    B = frame_b(D, ell_prev)
    Bp = frame_b_plus(D, ell_next)
    R = np.swapaxes(Bp, -1, -2) @ B
    G = np.swapaxes(D, -1, -2) @ D
    w = np.linalg.solve(G, np.broadcast_to(ell_next, G.shape[:-1])[..., None])[..., 0]
    u = w / (w @ ell_next)[..., None]
    t = _unit(np.einsum("...nm,...m->...n", D, u))
    out = CorrugationBases(B, Bp, R, t_vec=t)
    if f_next is not None:
        D1 = _jacobian(f_next, x)
        Bn = frame_b(D1, ell_next)
        L = np.swapaxes(Bn, -1, -2) @ Bp
        out.B_next, out.L, out.M = Bn, L, L @ R
    return out


def rotation_block(theta) -> Array:
    """[[cos, 0, sin], [0, 1, 0], [-sin, 0, cos]] for each theta."""
    th = np.asarray(theta, dtype=float)
    c, s = np.cos(th), np.sin(th)
    z, o = np.zeros_like(th), np.ones_like(th)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


@dataclass
class RotationReport:
    N: float
    residual: float
    fitted_c: float
    residuals: Array

    def within(self, C: float) -> bool:
        return self.residual <= C / self.N


def check_rotation_form(L, theta, N: float) -> RotationReport:
    """sup ||L - R(theta)||_F and C = N * sup."""
    res = np.linalg.norm(np.asarray(L, dtype=float) - rotation_block(theta), axis=(-2, -1))
    sup = float(np.max(res))
    return RotationReport(float(N), sup, sup * float(N), res)


def totally_real_corrugation_matrix(D_before: Array, D_after: Array) -> tuple[Array, Array]:
    """M carrying (v, Jv) of f_before to (v, Jv) of f_after, and its complexification.

    With F the 2m x 2m basis matrix, F_after = F_before M^T.  M commutes with
    the coefficient-space J = [[0, -I], [I, 0]].
    """
    def basis(D):
        return np.concatenate([D, apply_j(np.swapaxes(D, -1, -2)).swapaxes(-1, -2)], axis=-1)

    Fb, Fa = basis(np.asarray(D_before, dtype=float)), basis(np.asarray(D_after, dtype=float))
    MT = np.linalg.solve(Fb, Fa)
    M = np.swapaxes(MT, -1, -2)
    m = M.shape[-1] // 2
    Mc = M[..., :m, :m] + 1j * M[..., m:, :m]
    return M, Mc


def coefficient_j(m: int) -> Array:
    Z, I = np.zeros((m, m)), np.eye(m)
    return np.block([[Z, -I], [I, Z]])


def probe_grid(lo, hi, res: int, shift: float = 0.381966011250105) -> Array:
    """res^m points at (i + shift) / res of each axis; the irrational shift avoids integer phases N x."""
    lo, hi = np.atleast_1d(np.asarray(lo, dtype=float)), np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [lo[k] + (hi[k] - lo[k]) * (np.arange(res) + shift) / res for k in range(lo.size)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@dataclass
class RotationRow:
    step: int
    N: float
    residual: float
    fitted_c: float
    det_error: float
    orth_error: float


def rotation_table(run, stride: int = 1) -> list[RotationRow]:
    """Rotation-form residual of L for every step of a codimension-one run, on every ``stride``-th node."""
    if run.target != "euclidean":
        raise ContractError("corrugation matrices are built for codimension-one runs")
    if len(run.step_states) != len(run.steps):
        raise ContractError("incomplete trace: per-step states are missing")
    sl = tuple(slice(None, None, stride) for _ in range(run.stages[0].m))
    rows = []
    before = run.stages[0]
    ell_prev = None
    for s, (st, a, ph, form) in enumerate(zip(run.step_states, run.step_alphas, run.step_phases, run.step_forms)):
        ell = np.asarray(form[3], dtype=float)
        cb = corrugation_bases(before.D[sl], ell if ell_prev is None else ell_prev, ell, f_next=st.D[sl])
        rep = check_rotation_form(cb.L, a[sl] * np.cos(2 * np.pi * ph[sl]), form[2])
        rows.append(RotationRow(s, float(form[2]), rep.residual, rep.fitted_c,
                                float(np.max(np.abs(cb.determinants() - 1.0))), cb.orthogonality_residual()))
        before, ell_prev = st, ell
    return rows
