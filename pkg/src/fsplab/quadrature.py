"""Adaptive quadrature and limit estimation used by the constitutive module.

All integrals of 1/(s P(s)) are formed in the scaled quantity P(s) I(s),
which stays O(1) even when I itself overflows.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import AUnbounded, QuadratureDivergent

RTOL = 1e-10


def quad_checked(f: Callable[[float], float], a: float, b: float,
                 points: Sequence[float] | None = None, epsrel: float = RTOL) -> float:
    """scipy QUADPACK wrapper that raises instead of warning."""
    if a == b:
        return 0.0
    kw = {}
    if points and math.isfinite(a) and math.isfinite(b):
        pts = sorted({p for p in points if a < p < b})
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            f, a, b, epsabs=0.0, epsrel=epsrel, limit=400, full_output=1, **kw
        )
    if not math.isfinite(val):
        raise QuadratureDivergent(f"non-finite integral on ({a}, {b})")
    if rest and err > max(1e3 * epsrel * abs(val), 1e-300):
        raise QuadratureDivergent(f"quadrature on ({a}, {b}) did not converge: {rest[0]}")
    return val


def _width_points(profile, a: float, b: float) -> list[float]:
    # the integrand exp(log P(a) - log P(t)) decays over ~1/elasticity in log t
    el = float(profile.elasticity(a))
    w = 1.0 / el if el > 0 else 1.0
    la = math.log(a)
    return [la + w * k for k in (0.5, 2.0, 8.0, 32.0, 128.0)]


def pi_piece(profile, a: float, b: float) -> float:
    """P(a) * int_a^b dt / (t P(t)) for 0 < a <= b."""
    if a >= b:
        return 0.0

    def f(t: float) -> float:
        return math.exp(profile.log_P_drop(a, math.exp(t)))

    return quad_checked(f, math.log(a), math.log(b), points=_width_points(profile, a, b))


def pi_values(profile, s) -> np.ndarray:
    """P(s) I(s) for an array of s in (0, M]; cumulative from M downward."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s <= 0):
        raise ValueError("P*I requires s > 0")
    if profile.kind == "power" and profile.closed_form_tail:
        return np.full(s.shape, 1.0 / profile.p)
    uniq = np.unique(s)
    M = profile.M
    tail = profile.resolved_tail()
    out = np.empty(uniq.shape)
    # J(s) = P(s) int_s^M, then P(s) I(s) = J(s) + P(s) I_tail
    J_next, b = 0.0, M
    for k in range(uniq.size - 1, -1, -1):
        a = float(uniq[k])
        J = pi_piece(profile, a, b) + math.exp(profile.log_P_drop(a, b)) * J_next if a < b else J_next
        out[k] = J
        J_next, b = J, a
    logP = np.asarray(profile.log_P(uniq), dtype=float)
    out = out + np.exp(logP + math.log(tail))
    return out[np.searchsorted(uniq, s)]


def pi_from_anchor(profile, sigma: float, b: float, pi_b: float) -> float:
    """P*I at sigma <= b given P*I at b."""
    if profile.kind == "power" and profile.closed_form_tail:
        return 1.0 / profile.p
    if sigma >= b:
        return pi_b
    return pi_piece(profile, sigma, b) + math.exp(profile.log_P_drop(sigma, b)) * pi_b


def log_cumulative(log_f: Callable[[float], float], s) -> np.ndarray:
    """log of int_0^s exp(log_f(t)) dt for each s, accumulated in log domain.

    ``log_f(sigma, anchor_index)`` receives the index of the right end of the
    piece being integrated so callers can anchor inner quantities there.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    uniq = np.unique(s[s > 0])
    out = np.full(uniq.shape, -np.inf)
    acc = -np.inf
    prev = 0.0
    for k, b in enumerate(uniq):
        b = float(b)
        m = log_f(b, k) + math.log(b)

        def g(t: float, k=k, m=m) -> float:
            sig = math.exp(t)
            if sig == 0.0:
                return 0.0
            return math.exp(log_f(sig, k) + t - m)

        lo = -math.inf if prev == 0.0 else math.log(prev)
        val = quad_checked(g, lo, math.log(b))
        piece = m + math.log(val) if val > 0 else -math.inf
        acc = np.logaddexp(acc, piece)
        out[k] = acc
        prev = b
    res = np.full(s.shape, -np.inf)
    pos = s > 0
    res[pos] = out[np.searchsorted(uniq, s[pos])]
    return res


@dataclass(frozen=True)
class LimitEstimate:
    """An endpoint limit with an uncertainty band."""

    value: float
    band: float
    s: tuple
    samples: tuple

    def contains(self, target: float, max_width: float = 1e-3) -> bool:
        """A claim 'limit = target' holds if the band covers it and is narrow."""
        if not math.isfinite(self.value):
            return not math.isfinite(target)
        return self.band < max_width and abs(self.value - target) <= max(self.band, 1e-12)


def limit_at_zero(f: Callable[[np.ndarray], np.ndarray], s_start: float,
                  s_stop: float | None = None, ratio: float = 0.5,
                  levels: int = 12) -> LimitEstimate:
    """Estimate lim_{s->0} f(s) from a geometric sequence with Aitken extrapolation.

    The model f = L + c s^q is extrapolated exactly by the Aitken step; the
    band is the spread of the last extrapolants plus the last raw increment
    when extrapolation is unreliable.
    """
    if s_stop is not None:
        levels = max(3, int(math.floor(math.log(s_stop / s_start) / math.log(ratio))) + 1)
    s = s_start * ratio ** np.arange(levels)
    v = np.asarray(f(s), dtype=float)
    d = np.diff(v)
    if np.all(np.abs(d) <= 1e-14 * max(1.0, np.max(np.abs(v)))):
        return LimitEstimate(float(v[-1]), 0.0, tuple(s), tuple(v))
    # runaway growth toward 0 means the limit is infinite
    grow = np.abs(v[1:]) > np.abs(v[:-1])
    if np.all(grow[-4:]) and np.all(np.abs(d[-3:]) >= 0.999 * np.abs(d[-4:-1])):
        return LimitEstimate(math.inf, math.inf, tuple(s), tuple(v))
    ext = []
    for k in range(len(v) - 2):
        d1, d2 = v[k + 1] - v[k], v[k + 2] - v[k + 1]
        den = d2 - d1
        if den == 0 or abs(den) < 1e-15 * max(abs(d1), 1e-300) or d1 * d2 <= 0:
            ext.append(v[k + 2])
        else:
            ext.append(v[k + 2] - d2 * d2 / den)
    ext = np.asarray(ext)
    value = float(ext[-1])
    band = float(abs(ext[-1] - ext[-2]) if ext.size > 1 else abs(d[-1]))
    return LimitEstimate(value, band, tuple(s), tuple(v))


def sup_on_interval(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                    n: int = 160) -> tuple[float, float]:
    """Maximise f on [lo, hi] by a log grid refined with a bounded search."""
    s = np.geomspace(lo, hi, n)
    v = np.asarray(f(s), dtype=float)
    if not np.all(np.isfinite(v)):
        raise AUnbounded("non-finite value while searching for a supremum")
    k = int(np.argmax(v))
    if 0 < k < n - 1:
        res = optimize.minimize_scalar(
            lambda t: -float(np.asarray(f(np.array([math.exp(t)])))[0]),
            bounds=(math.log(s[k - 1]), math.log(s[k + 1])), method="bounded",
            options={"xatol": 1e-10},
        )
        if -res.fun > v[k]:
            return float(-res.fun), float(math.exp(res.x))
    return float(v[k]), float(s[k])
