"""Circle-arc loop pattern, its Bessel average and the periodic primitives K_c, K_s.

The pattern is

    c(a, t) = (cos(a cos 2 pi t) - J0(a), sin(a cos 2 pi t), 1),   0 <= a <= alpha0,

whose average over one period is (0, 0, 1).  Its primitive has the closed form
(K_c(a, t), K_s(a, t), 0) used by every shaped corrugation.
"""

from __future__ import annotations

import functools
import math

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi

_J0_TOL = 1e-13
_J0_MAX_PANELS = 1 << 18
_FAST_PANELS = 32

# One-period table: the integrands below depend on u only through cos(2 pi u),
# so they are even and their Fourier series is a cosine series.
_M = 64
_NH = 24
_NODES = np.cos(TWO_PI * np.arange(_M) / _M)
_HARM = np.arange(1, _NH + 1, dtype=float)
_COS_TABLE = np.cos(TWO_PI * np.outer(np.arange(_M), _HARM) / _M) * (2.0 / _M)
_CHUNK = 1 << 15


def _simpson_quarter(alpha: np.ndarray, panels: int) -> np.ndarray:
    """4 * Simpson rule of cos(alpha cos 2 pi t) on [0, 1/4]."""
    t = np.linspace(0.0, 0.25, panels + 1)
    w = np.full(panels + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    vals = np.cos(np.multiply.outer(alpha, np.cos(TWO_PI * t)))
    return vals @ w * (0.25 / panels / 3.0) * 4.0


def _as_finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def bessel_j0(alpha):
    """J0(alpha) as the mean of cos(alpha cos 2 pi t) over one period.

    Composite Simpson on the quarter period (the integrand is even about both
    ends of it), doubling the panel count until two successive estimates agree
    to 1e-13.  Accepts scalars or arrays.
    """
    a = _as_finite(alpha, "alpha")
    panels = 16
    prev = _simpson_quarter(a, panels)
    while True:
        panels *= 2
        cur = _simpson_quarter(a, panels)
        if np.max(np.abs(cur - prev), initial=0.0) <= _J0_TOL or panels >= _J0_MAX_PANELS:
            break
        prev = cur
    return float(cur) if cur.ndim == 0 else cur


def _j0_fast(a: np.ndarray) -> np.ndarray:
    # fixed rule, accurate to ~1e-16 on [0, alpha0]; used inside bisection
    return _simpson_quarter(a, _FAST_PANELS)


def j0_prime(alpha) -> np.ndarray:
    """dJ0/dalpha = -mean of sin(alpha cos 2 pi t) cos 2 pi t (fixed quarter-period rule)."""
    a = _as_finite(alpha, "alpha")
    t = np.linspace(0.0, 0.25, _FAST_PANELS + 1)
    w = np.full(_FAST_PANELS + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    c = np.cos(TWO_PI * t)
    vals = np.sin(np.multiply.outer(a, c)) * c
    return -(vals @ w) * (0.25 / _FAST_PANELS / 3.0) * 4.0


@functools.cache
def alpha0() -> float:
    """First positive root of J0, by bisection on [2, 3]."""
    lo, hi = 2.0, 3.0
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if bessel_j0(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def j0_inverse(y):
    """Inverse of J0 on the monotone branch [0, alpha0].

    60 bisection steps.  Values of y within 1e-12 outside [0, 1] are clipped;
    anything further out raises DomainError.
    """
    y = _as_finite(y, "y")
    if np.any(y < -1e-12) or np.any(y > 1.0 + 1e-12):
        raise DomainError("j0_inverse expects 0 <= y <= 1")
    y = np.clip(y, 0.0, 1.0)
    a0 = alpha0()
    lo = np.zeros_like(y)
    hi = np.full_like(y, a0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        right = _j0_fast(mid) > y
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    out = 0.5 * (lo + hi)
    out = np.where(y == 1.0, 0.0, np.where(y == 0.0, a0, out))
    return float(out) if out.ndim == 0 else out


def _check_amplitude(alpha) -> np.ndarray:
    a = _as_finite(alpha, "alpha")
    if np.any(a < 0.0) or np.any(a > alpha0() + 1e-12):
        raise DomainError("amplitude must lie in [0, alpha0]")
    return a


def pattern_c(alpha, t) -> np.ndarray:
    """c(alpha, t) with a trailing axis of length 3."""
    a = _check_amplitude(alpha)
    phase = np.multiply(a, np.cos(TWO_PI * np.asarray(t, dtype=float)))
    j0 = np.broadcast_to(_j0_fast(a.ravel()).reshape(a.shape), phase.shape)
    return np.stack([np.cos(phase) - j0, np.sin(phase), np.ones_like(phase)], axis=-1)


def _primitive_of_samples(samples: np.ndarray, tfrac: np.ndarray) -> np.ndarray:
    """int_0^t (g - mean g) for even periodic g given by one-period samples."""
    coef = samples @ _COS_TABLE
    sines = np.sin(TWO_PI * np.multiply.outer(tfrac, _HARM)) / (TWO_PI * _HARM)
    return np.einsum("ph,ph->p", coef, sines)


def _kernel(alpha: np.ndarray, t: np.ndarray, which: tuple[str, ...]) -> list[np.ndarray]:
    a, tt = np.broadcast_arrays(alpha, np.asarray(t, dtype=float))
    shape = a.shape
    a = a.ravel()
    tfrac = tt.ravel() - np.floor(tt.ravel())
    outs = [np.empty(a.size) for _ in which]
    for s in range(0, a.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        arg = np.multiply.outer(a[sl], _NODES)
        cos_arg = sin_arg = None
        for k, name in enumerate(which):
            if name in ("kc", "ks_da"):
                cos_arg = np.cos(arg) if cos_arg is None else cos_arg
            if name in ("ks", "kc_da"):
                sin_arg = np.sin(arg) if sin_arg is None else sin_arg
            if name == "kc":
                samples = cos_arg
            elif name == "ks":
                samples = sin_arg
            elif name == "kc_da":
                samples = -sin_arg * _NODES
            else:
                samples = cos_arg * _NODES
            outs[k][sl] = _primitive_of_samples(samples, tfrac[sl])
    zero = a == 0.0
    res = []
    for name, o in zip(which, outs):
        if name in ("kc", "ks"):
            o[zero] = 0.0
        res.append(o.reshape(shape) if shape else float(o[0]))
    return res


def _exact_primitive(integrand, t: float) -> float:
    tf = t - math.floor(t)
    if tf == 0.0:
        return 0.0
    panels = 64
    prev = None
    while True:
        u = np.linspace(0.0, tf, panels + 1)
        w = np.full(panels + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        cur = float(integrand(u) @ w) * tf / panels / 3.0
        if prev is not None and abs(cur - prev) <= 1e-14:
            return cur
        if panels >= _J0_MAX_PANELS:
            return cur
        prev = cur
        panels *= 2


def _exact(alpha, t, kind: str):
    a, tt = np.broadcast_arrays(_check_amplitude(alpha), np.asarray(t, dtype=float))
    out = np.empty(a.shape)
    for idx in np.ndindex(a.shape):
        ai = float(a[idx])
        if kind == "kc":
            j0 = bessel_j0(ai)
            out[idx] = _exact_primitive(lambda u: np.cos(ai * np.cos(TWO_PI * u)) - j0, float(tt[idx]))
        else:
            out[idx] = _exact_primitive(lambda u: np.sin(ai * np.cos(TWO_PI * u)), float(tt[idx]))
    return float(out) if out.ndim == 0 else out


def k_c(alpha, t, exact: bool = False):
    """K_c(alpha, t) = int_0^t cos(alpha cos 2 pi u) - J0(alpha) du.

    The fast path integrates the trigonometric interpolant of a 64-sample
    one-period table term by term.  ``exact=True`` runs adaptive Simpson instead.
    """
    if exact:
        return _exact(alpha, t, "kc")
    return _kernel(_check_amplitude(alpha), t, ("kc",))[0]


def k_s(alpha, t, exact: bool = False):
    """K_s(alpha, t) = int_0^t sin(alpha cos 2 pi u) du."""
    if exact:
        return _exact(alpha, t, "ks")
    return _kernel(_check_amplitude(alpha), t, ("ks",))[0]


def k_pair(alpha, t, with_dalpha: bool = False):
    """(K_c, K_s), optionally followed by their alpha-derivatives, in one pass."""
    which = ("kc", "ks", "kc_da", "ks_da") if with_dalpha else ("kc", "ks")
    return tuple(_kernel(_check_amplitude(alpha), t, which))


class LoopPattern:
    """The pattern c together with its average and primitive."""

    dimension = 3

    @property
    def amplitude_domain(self) -> tuple[float, float]:
        return (0.0, alpha0())

    def c(self, alpha, t) -> np.ndarray:
        return pattern_c(alpha, t)

    def average(self, alpha, samples: int = 2048) -> np.ndarray:
        """Mean of c(alpha, .) by the periodic trapezoid rule."""
        t = np.arange(samples) / samples
        a = np.asarray(alpha, dtype=float)
        vals = pattern_c(a[..., None], t)
        return vals.mean(axis=-2)

    def primitive(self, alpha, t) -> np.ndarray:
        kc, ks = k_pair(alpha, t)
        kc = np.asarray(kc)
        return np.stack([kc, np.asarray(ks), np.zeros_like(kc)], axis=-1)


PATTERN = LoopPattern()
