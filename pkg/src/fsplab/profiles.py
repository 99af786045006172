"""Degeneracy profiles P(s) on a working interval [0, M].

Every profile is evaluated through ``log_P`` so that kinds such as
``exp(-1/s**gamma)`` stay representable for small concentrations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import DomainError, NotDegenerate, RatioUnbounded

KINDS = (
    "power",
    "exp-inverse",
    "zeta-bounded",
    "zeta-unbounded",
    "tabulated",
    "calibration",
)

# the zeta kinds use int_s^M zeta(t)/t dt; this is its closed form when known
ZetaIntegral = Callable[[float, float], float]


@dataclass(frozen=True)
class ZetaForm:
    """A positive function zeta on (0, M] defining P = exp(-int_s^M zeta/t dt)."""

    fn: Callable[[float], float]
    integral: Optional[ZetaIntegral] = None
    label: str = "callable"

    def integrate(self, a: float, b: float) -> float:
        """Return int_a^b zeta(t)/t dt."""
        if a == b:
            return 0.0
        if self.integral is not None:
            return self.integral(a, b)
        val, _ = integrate.quad(
            lambda t: self.fn(math.exp(t)), math.log(a), math.log(b),
            epsabs=0.0, epsrel=1e-12, limit=200,
        )
        return val


def zeta_loglinear(c: float, d: float = 0.0, M: float = 1.0) -> ZetaForm:
    """zeta(s) = c + d*ln(M/s): bounded for d = 0, unbounded at 0 for d > 0."""
    if c <= 0 or d < 0:
        raise ValueError("zeta_loglinear needs c > 0 and d >= 0")

    def fn(s: float) -> float:
        return c + d * math.log(M / s)

    def integral(a: float, b: float) -> float:
        la, lb = math.log(M / a), math.log(M / b)
        # antiderivative of zeta(t)/t in t is -(c*L + d*L^2/2) with L = ln(M/t)
        return (c * la + 0.5 * d * la * la) - (c * lb + 0.5 * d * lb * lb)

    return ZetaForm(fn=fn, integral=integral, label=f"loglinear(c={c},d={d})")


@dataclass(frozen=True)
class DegeneracyProfile:
    """The degeneracy profile P together with its tail policy.

    ``tail_policy`` is ``"closed-form"`` (power kind only: the tail of I is
    integrated to infinity exactly) or ``"additive-constant"`` in which case
    ``I(s) = int_s^M dt/(t P(t)) + I_tail``.
    """

    kind: str
    M: float = 1.0
    p: float = 1.0
    gamma: float = 1.0
    zeta: Optional[ZetaForm] = None
    zeta0: Optional[ZetaForm] = None
    samples_s: Optional[tuple] = None
    samples_P: Optional[tuple] = None
    diffusivity: float = 1.0
    tail_policy: str = "additive-constant"
    I_tail: Optional[float] = None
    ellipticity: tuple = (1.0, 1.0)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.tail_policy not in ("closed-form", "additive-constant"):
            raise ValueError(f"unknown tail policy {self.tail_policy!r}")
        if self.tail_policy == "closed-form" and self.kind != "power":
            raise ValueError("closed-form tail is only available for the power kind")
        if self.I_tail is not None and not self.I_tail > 0:
            raise ValueError("I_tail must be positive")
        if self.kind == "power" and not self.p > 0:
            raise ValueError("power exponent must be positive")
        if self.kind == "exp-inverse" and not self.gamma > 0:
            raise ValueError("exp-inverse exponent must be positive")
        if self.kind in ("zeta-bounded", "zeta-unbounded") and self.zeta is None:
            raise ValueError(f"{self.kind} profile needs a zeta function")
        if self.kind == "tabulated":
            s = np.asarray(self.samples_s, dtype=float)
            P = np.asarray(self.samples_P, dtype=float)
            if s.ndim != 1 or s.shape != P.shape or s.size < 2:
                raise ValueError("tabulated profile needs matching 1-D samples")
            if np.any(np.diff(s) <= 0) or s[0] < 0:
                raise ValueError("tabulated abscissae must be increasing and >= 0")

    # -- evaluation -------------------------------------------------------
    @property
    def is_calibration(self) -> bool:
        return self.kind == "calibration"

    @property
    def closed_form_tail(self) -> bool:
        return self.tail_policy == "closed-form"

    @property
    def analytic(self) -> bool:
        return self.kind in ("power", "exp-inverse", "zeta-bounded", "zeta-unbounded")

    def _check_domain(self, s: np.ndarray) -> None:
        if np.any(s < 0):
            raise DomainError("profile evaluated at negative concentration")
        if not self.closed_form_tail and not self.is_calibration:
            if np.any(s > self.M * (1 + 1e-12)):
                raise DomainError(f"profile evaluated beyond M={self.M}")

    def log_P(self, s):
        """Natural log of P, vectorised; -inf at s = 0."""
        arr = np.asarray(s, dtype=float)
        self._check_domain(arr)
        with np.errstate(divide="ignore"):
            out = self._log_P(arr)
        return out if np.ndim(s) else float(out)

    def _log_P(self, s: np.ndarray) -> np.ndarray:
        k = self.kind
        if k == "power":
            return self.p * np.log(s)
        if k == "exp-inverse":
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(s > 0, -np.power(s, -self.gamma), -np.inf)
        if k in ("zeta-bounded", "zeta-unbounded"):
            flat = s.ravel()
            out = np.array([
                -self.zeta.integrate(v, self.M) if v > 0 else -np.inf for v in flat
            ])
            return out.reshape(s.shape)
        if k == "tabulated":
            return np.log(self._interp(s))
        return np.full(s.shape, math.log(self.diffusivity))

    def _interp(self, s: np.ndarray) -> np.ndarray:
        xs = np.asarray(self.samples_s, dtype=float)
        ys = np.asarray(self.samples_P, dtype=float)
        if xs[0] > 0:
            xs = np.concatenate(([0.0], xs))
            ys = np.concatenate(([0.0], ys))
        return np.interp(s, xs, ys)

    def P(self, s):
        arr = np.asarray(s, dtype=float)
        out = np.exp(self.log_P(arr))
        return out if np.ndim(s) else float(out)

    def log_P_drop(self, s: float, t: float) -> float:
        """log P(s) - log P(t) for 0 < s <= t, without forming either log."""
        if self.kind in ("zeta-bounded", "zeta-unbounded"):
            return -self.zeta.integrate(s, t)
        if self.kind == "power":
            return self.p * math.log(s / t)
        if self.kind == "exp-inverse":
            g = self.gamma
            return t ** (-g) - s ** (-g)
        return float(self.log_P(s) - self.log_P(t))

    def elasticity(self, s):
        """s P'(s) / P(s); piecewise for tabulated profiles."""
        arr = np.asarray(s, dtype=float)
        self._check_domain(arr)
        k = self.kind
        if k == "power":
            out = np.full(arr.shape, self.p)
        elif k == "exp-inverse":
            out = self.gamma * np.power(arr, -self.gamma)
        elif k in ("zeta-bounded", "zeta-unbounded"):
            out = np.array([self.zeta.fn(v) for v in arr.ravel()]).reshape(arr.shape)
        elif k == "tabulated":
            xs = np.asarray(self.samples_s, dtype=float)
            ys = np.asarray(self.samples_P, dtype=float)
            if xs[0] > 0:
                xs = np.concatenate(([0.0], xs))
                ys = np.concatenate(([0.0], ys))
            idx = np.clip(np.searchsorted(xs, arr, side="right") - 1, 0, xs.size - 2)
            slope = (ys[idx + 1] - ys[idx]) / (xs[idx + 1] - xs[idx])
            out = arr * slope / self._interp(arr)
        else:
            out = np.zeros(arr.shape)
        return out if np.ndim(s) else float(out)

    def resolved_tail(self) -> float:
        """The constant added to int_s^M; continues P linearly past M by default."""
        if self.closed_form_tail:
            return 0.0
        if self.I_tail is not None:
            return float(self.I_tail)
        # int_M^inf dt / (t * P(M) t / M) = 1 / P(M)
        return 1.0 / self.P(self.M)

    def probe_floor(self) -> float:
        """Smallest s at which log-domain evaluation is trusted."""
        if self.kind == "exp-inverse":
            # s**-gamma <= 1e3 keeps the log-domain sums well conditioned
            return min(0.5 * self.M, 1e3 ** (-1.0 / self.gamma))
        if self.kind == "tabulated":
            xs = [v for v in self.samples_s if v > 0]
            return xs[0]
        return 1e-8 * self.M

    # -- validation -------------------------------------------------------
    def validate(self, C: float = math.inf, n: int = 400) -> None:
        """Check P(0) = 0 and 0 < P <= C on a log grid of (0, M]."""
        if self.is_calibration:
            return
        s = np.geomspace(self.probe_floor(), self.M, n)
        logP = np.asarray(self.log_P(s), dtype=float)
        if not np.all(np.isfinite(logP)):
            raise NotDegenerate("P must be positive on (0, M]")
        P_max = float(np.exp(np.max(logP)))
        if P_max > C:
            raise RatioUnbounded(f"sup P = {P_max:.6g} exceeds C = {C}")

    def describe(self) -> dict:
        d = {"kind": self.kind, "M": self.M, "tail_policy": self.tail_policy,
             "I_tail": self.resolved_tail()}
        if self.kind == "power":
            d["p"] = self.p
        elif self.kind == "exp-inverse":
            d["gamma"] = self.gamma
        elif self.kind in ("zeta-bounded", "zeta-unbounded"):
            d["zeta"] = self.zeta.label
            if self.zeta0 is not None:
                d["zeta0"] = self.zeta0.label
        elif self.kind == "tabulated":
            d["n_samples"] = len(self.samples_s)
        else:
            d["diffusivity"] = self.diffusivity
        d.update(self.meta)
        return d


# -- constructors -------------------------------------------------------------
def power(p: float, M: float = 1.0, tail_policy: str = "closed-form",
          I_tail: Optional[float] = None) -> DegeneracyProfile:
    return DegeneracyProfile("power", M=M, p=p, tail_policy=tail_policy, I_tail=I_tail)


def exp_inverse(gamma: float, M: float = 1.0, I_tail: Optional[float] = None) -> DegeneracyProfile:
    return DegeneracyProfile("exp-inverse", M=M, gamma=gamma, I_tail=I_tail)


def zeta_bounded(zeta: ZetaForm, M: float = 1.0, I_tail: Optional[float] = None,
                 bounds: Optional[tuple] = None, n: int = 200) -> DegeneracyProfile:
    """Profile with k1 < zeta < k2; bounds are measured on a grid when omitted."""
    s = np.geomspace(1e-8 * M, M, n)
    z = np.array([zeta.fn(v) for v in s])
    k1, k2 = (float(z.min()), float(z.max())) if bounds is None else bounds
    if not (k1 > 0 and np.all(z >= k1 - 1e-12) and np.all(z <= k2 + 1e-12)):
        raise ValueError("zeta must stay inside (k1, k2) with k1 > 0")
    return DegeneracyProfile("zeta-bounded", M=M, zeta=zeta, I_tail=I_tail,
                             meta={"zeta_bounds": [k1, k2]})


def zeta_unbounded(zeta: ZetaForm, zeta0: Optional[ZetaForm] = None, M: float = 1.0,
                   I_tail: Optional[float] = None, n: int = 200) -> DegeneracyProfile:
    """Profile with zeta ~ zeta0, zeta0 non-increasing and s|zeta0'|/zeta0 bounded."""
    zeta0 = zeta0 or zeta
    s = np.geomspace(1e-8 * M, M, n)
    z = np.array([zeta.fn(v) for v in s])
    z0 = np.array([zeta0.fn(v) for v in s])
    ratio = z / z0
    if np.any(np.diff(z0) > 1e-12 * np.abs(z0[1:])):
        raise ValueError("zeta0 must be non-increasing")
    # s |zeta0'| / zeta0 by differences in log s
    c0 = float(np.max(np.abs(np.diff(z0)) / np.diff(np.log(s)) / z0[1:]))
    return DegeneracyProfile(
        "zeta-unbounded", M=M, zeta=zeta, zeta0=zeta0, I_tail=I_tail,
        meta={"zeta_ratio_bounds": [float(ratio.min()), float(ratio.max())], "C0": c0},
    )


def tabulated(s, P, M: Optional[float] = None, I_tail: Optional[float] = None) -> DegeneracyProfile:
    s = tuple(float(v) for v in s)
    P = tuple(float(v) for v in P)
    return DegeneracyProfile("tabulated", M=M or s[-1], samples_s=s, samples_P=P, I_tail=I_tail)


def calibration(diffusivity: float = 1.0) -> DegeneracyProfile:
    """Constant diffusivity; used only to validate the solver."""
    if not diffusivity > 0:
        raise ValueError("diffusivity must be positive")
    return DegeneracyProfile("calibration", diffusivity=diffusivity)


def reduce_hypothesis(tau_fn, sigma_fn, samples, C: float = math.inf,
                      degeneracy_tol: float = 1e-6) -> DegeneracyProfile:
    """Form P = sigma/tau on a grid of (0, M] for the scalar covariance case.

    The scalar case sigma_ij = sigma * delta_ij gives the two-sided bound
    with c1 = c2 = 1.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 1 or s.size < 2 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
        raise ValueError("samples must be an increasing grid on (0, M]")
    tau = np.array([tau_fn(v) for v in s], dtype=float)
    sigma = np.array([sigma_fn(v) for v in s], dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    P = sigma / tau
    if np.max(P) > C:
        raise RatioUnbounded(f"sup sigma/tau = {np.max(P):.6g} exceeds C = {C}")
    # P(0+) by linear extrapolation of the two smallest samples
    p0 = P[0] - s[0] * (P[1] - P[0]) / (s[1] - s[0])
    if min(P[0], max(p0, 0.0)) > degeneracy_tol:
        raise NotDegenerate(f"P(0+) ~ {min(P[0], p0):.3g} does not vanish")
    if np.any(P <= 0):
        raise NotDegenerate("P must be positive away from 0")
    prof = tabulated(s, P)
    object.__setattr__(prof, "ellipticity", (1.0, 1.0))
    return prof
