"""Constitutive functions I, H, h, F, G built from a degeneracy profile.

With the integral I(s) = int_s^inf dt/(t P(t)) and exponent Lambda,

    H = (Lambda I)^(-1/Lambda),  h = H',  F = h P = H^(Lambda+1)/s,
    G = int_0^s sqrt(F'),

so that [s F]^(lambda/2) = H with lambda = 2/(Lambda+1).  Everything is
computed from log P and the scaled product P*I, which keeps the
exp-inverse family representable.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import interpolate

from . import quadrature as q
from .errors import (AUnbounded, DegenerateRatio, DomainError, InadmissibleLambda,
                     NonMonotoneF)
from .profiles import DegeneracyProfile

PROBE_POINTS = 200
MU_FLOOR = 1e-3


@dataclass(frozen=True)
class AdmissibilityReport:
    """Numerical certificate of the structural conditions on P for one Lambda.

    ``C1`` is an empirical supremum on the probe grid, not a bound.
    """

    profile: dict
    Lambda: float
    lambda_: float
    A: float
    a: float
    a_band: float
    B: float
    B_limit: float
    mu: float
    C1: float
    C1_limit: float
    lambda_range: tuple
    s_min: float
    passed: dict = field(default_factory=dict)
    C1_kind: str = "empirical"

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        d["lambda_range"] = list(self.lambda_range)
        return d


class _Core:
    """Log-domain formulas shared by the analysis and the bundle."""

    def __init__(self, profile: DegeneracyProfile, Lambda: float):
        if profile.is_calibration:
            raise ValueError("calibration profiles carry no constitutive bundle")
        if not Lambda > 0:
            raise ValueError("Lambda must be positive")
        self.profile = profile
        self.Lambda = float(Lambda)
        self.c = (self.Lambda + 1.0) / self.Lambda
        self.log_scale = -(1.0 / self.Lambda + 1.0) * math.log(self.Lambda)

    def check(self, s: np.ndarray) -> None:
        p = self.profile
        if not p.closed_form_tail and np.any(s > p.M * (1 + 1e-12)):
            raise DomainError(f"evaluation beyond M={p.M}")

    def logs(self, s) -> dict:
        """log P, P*I, log I, log H, log F, log h, log F' at s > 0."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        self.check(s)
        L = self.Lambda
        logP = np.asarray(self.profile.log_P(s), dtype=float)
        pi = q.pi_values(self.profile, s)
        logI = np.log(pi) - logP
        logs = np.log(s)
        logH = -(math.log(L) + logI) / L
        logF = self.log_scale - logs - (1.0 / L + 1.0) * logI
        with np.errstate(divide="ignore", invalid="ignore"):
            logFp = (self.log_scale - 2.0 * logs - (1.0 / L + 2.0) * logI - logP
                     + np.log(self.c - pi))
        return {"logP": logP, "PI": pi, "logI": logI, "logH": logH, "logF": logF,
                "logh": logF - logP, "logFp": logFp}

    def log_Fp_scalar(self, sig: float, pi: float, logP: float) -> float:
        L = self.Lambda
        logI = math.log(pi) - logP
        gap = self.c - pi
        if gap <= 0 or pi <= 0:
            return -math.inf
        return (self.log_scale - 2.0 * math.log(sig) - (1.0 / L + 2.0) * logI - logP
                + math.log(gap))

    def log_G(self, s) -> np.ndarray:
        """log G(s) = log int_0^s sqrt(F'), with P*I anchored at each knot."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        prof = self.profile
        if prof.kind == "power" and prof.closed_form_tail:
            return self._log_G_power(s)
        pos = s[s > 0]
        uniq = np.unique(pos)
        if uniq.size == 0:
            return np.full(s.shape, -np.inf)
        self.check(uniq)
        pis = q.pi_values(prof, uniq)
        logPs = np.asarray(prof.log_P(uniq), dtype=float)

        def half_log_Fp(sig: float, k: int) -> float:
            b = float(uniq[k])
            drop = prof.log_P_drop(sig, b) if sig < b else 0.0
            if drop < -740.0:
                # P(sig)/P(b) underflows; F' carries P^(1/Lambda+1) and is negligible
                return -math.inf
            pi = q.pi_from_anchor(prof, sig, b, float(pis[k]))
            logP = float(logPs[k]) + drop
            return 0.5 * self.log_Fp_scalar(sig, pi, logP)

        vals = q.log_cumulative(half_log_Fp, uniq)
        out = np.full(s.shape, -np.inf)
        m = s > 0
        out[m] = vals[np.searchsorted(uniq, s[m])]
        return out


    def _log_G_power(self, s: np.ndarray) -> np.ndarray:
        # F = K s^alpha with alpha = p(Lambda+1)/Lambda - 1, so
        # G = sqrt(K alpha) * 2/(alpha+1) * s^((alpha+1)/2)
        p, L = self.profile.p, self.Lambda
        alpha = p * self.c - 1.0
        if alpha <= 0:
            return np.full(s.shape, np.nan)
        logK = self.c * math.log(p / L)
        with np.errstate(divide="ignore"):
            return (0.5 * (logK + math.log(alpha)) + math.log(2.0 / (alpha + 1.0))
                    + 0.5 * (alpha + 1.0) * np.log(s))


def _probe_grid(profile: DegeneracyProfile, n: int = PROBE_POINTS) -> np.ndarray:
    return np.geomspace(profile.probe_floor(), profile.M, n)


def analyze_profile(profile: DegeneracyProfile, Lambda: float,
                    n_probe: int = PROBE_POINTS) -> AdmissibilityReport:
    """Estimate A, a, B, mu and C1 and check the admissibility conditions."""
    core = _Core(profile, Lambda)
    c = core.c
    lo, hi = profile.probe_floor(), profile.M
    passed: dict = {}

    degenerate = profile.log_P(0.0) == -math.inf
    try:
        profile.validate()
        passed["P_degenerate"] = bool(degenerate)
    except Exception:
        passed["P_degenerate"] = False

    def PI(s):
        return q.pi_values(profile, s)

    def sIPp(s):
        return q.pi_values(profile, s) * profile.elasticity(s)

    if profile.kind == "power" and profile.closed_form_tail:
        a = A = 1.0 / profile.p
        a_band = 0.0
        B = B_lim = 1.0
    else:
        la = q.limit_at_zero(PI, 0.5 * hi, s_stop=lo)
        a, a_band = la.value, la.band
        A_grid, _ = q.sup_on_interval(PI, lo, hi)
        A = max(A_grid, a)
        lb = q.limit_at_zero(sIPp, 0.5 * hi, s_stop=lo)
        B_lim = lb.value
        B_grid, _ = q.sup_on_interval(sIPp, lo, hi)
        B = max(B_grid, B_lim)
    passed["A_finite"] = math.isfinite(A)
    passed["a_finite"] = math.isfinite(a)
    passed["F_increasing"] = bool(c > A)
    passed["F_vanishes_at_0"] = bool(c > a)
    passed["B_finite"] = math.isfinite(B)
    mu = max(B, MU_FLOOR)

    C1 = C1_lim = math.nan
    if passed["F_increasing"] and passed["A_finite"]:
        s = _probe_grid(profile, n_probe)
        logs = core.logs(s)
        logG = core.log_G(s)
        ratio = np.exp(logs["logF"] - logG - 0.5 * logs["logFp"])
        C1 = float(np.max(ratio))

        def ratio_fn(x):
            lg = core.logs(x)
            return np.exp(lg["logF"] - core.log_G(x) - 0.5 * lg["logFp"])

        C1_lim = q.limit_at_zero(ratio_fn, s[len(s) // 4], ratio=0.5, levels=8).value
    passed["C1_finite"] = bool(math.isfinite(C1))

    lam_range = (0.0, math.inf) if A <= 1 else (0.0, 1.0 / (A - 1.0))
    return AdmissibilityReport(
        profile=profile.describe(), Lambda=float(Lambda), lambda_=2.0 / (Lambda + 1.0),
        A=float(A), a=float(a), a_band=float(a_band), B=float(B), B_limit=float(B_lim),
        mu=float(mu), C1=C1, C1_limit=float(C1_lim), lambda_range=lam_range,
        s_min=float(lo), passed=passed,
    )


@dataclass(frozen=True)
class ConstitutiveBundle:
    """Immutable evaluators for I, H, h, F, F', G and the energy weight."""

    profile: DegeneracyProfile
    Lambda: float
    report: AdmissibilityReport
    core: _Core = field(repr=False, compare=False)

    @property
    def lambda_(self) -> float:
        return 2.0 / (self.Lambda + 1.0)

    @property
    def M(self) -> float:
        return self.profile.M

    @property
    def A(self) -> float:
        return self.report.A

    @property
    def a(self) -> float:
        return self.report.a

    @property
    def B(self) -> float:
        return self.report.B

    @property
    def C1(self) -> float:
        return self.report.C1

    # -- evaluators -----------------------------------------------------------
    def _eval(self, s, key: str, zero: float = 0.0):
        arr = np.asarray(s, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        out = np.full(flat.shape, zero)
        pos = flat > 0
        if np.any(pos):
            if key == "logG":
                out[pos] = np.exp(self.core.log_G(flat[pos]))
            else:
                lg = self.core.logs(flat[pos])
                out[pos] = lg["PI"] if key == "PI" else np.exp(lg[key])
        out = out.reshape(arr.shape)
        return out if arr.ndim else float(out)

    def PI(self, s):
        """P(s) I(s)."""
        return self._eval(s, "PI", zero=self.report.a)

    def I(self, s):
        return self._eval(s, "logI", zero=math.inf)

    def H(self, s):
        return self._eval(s, "logH")

    def h(self, s):
        return self._eval(s, "logh", zero=math.nan)

    def F(self, s):
        return self._eval(s, "logF")

    def Fprime(self, s):
        return self._eval(s, "logFp", zero=math.nan)

    def Gprime(self, s):
        return np.sqrt(self.Fprime(s))

    def G(self, s):
        return self._eval(s, "logG")

    def Htilde_prime(self, s, eps: float = 0.0):
        """sqrt(h / (F + eps)); equals P^(-1/2) when eps = 0."""
        return np.sqrt(self.h(s) / (self.F(s) + eps))

    def Htilde(self, s: float, eps: float = 0.0) -> float:
        """int_eps^s sqrt(h/(F+eps)) dt."""
        lo = eps
        if s <= lo:
            return 0.0
        if lo == 0.0:
            def f(t: float) -> float:
                sig = math.exp(t)
                return 0.0 if sig == 0.0 else sig * float(self.Htilde_prime(sig))

            return q.quad_checked(f, -math.inf, math.log(s))
        return q.quad_checked(lambda t: float(self.Htilde_prime(t, eps)), lo, s)

    # -- bulk evaluation --------------------------------------------------------
    @cached_property
    def _log_tables(self):
        prof = self.profile
        lo = prof.probe_floor()
        s = np.geomspace(lo, prof.M, 600)
        lg = self.core.logs(s)
        lg["logG"] = self.core.log_G(s)
        x = np.log(s)
        return lo, {k: interpolate.PchipInterpolator(x, lg[k]) for k in ("logH", "logG", "logF", "logFp")}

    def fast_log(self, key: str, s) -> np.ndarray:
        """log H, log G, log F or log F' ("Fp") on large arrays (trajectories); -inf at s <= 0.

        Power profiles use closed forms.  Other kinds interpolate log values on
        600 log-spaced knots and continue log-linearly below the probe floor.
        """
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, -np.inf)
        pos = s > 0
        if not np.any(pos):
            return out
        sp = s[pos]
        prof = self.profile
        if prof.kind == "power" and prof.closed_form_tail:
            if key == "G":
                out[pos] = self.core._log_G_power(sp)
            elif key == "Fp":
                out[pos] = self.core.logs(sp)["logFp"]
            else:
                out[pos] = self.core.logs(sp)["log" + key]
            return out
        lo, tabs = self._log_tables
        f = tabs["log" + key]
        x = np.log(np.clip(sp, None, prof.M))
        xlo = math.log(lo)
        slope = float(f.derivative()(xlo))
        out[pos] = np.where(x >= xlo, f(np.maximum(x, xlo)), f(xlo) + slope * (x - xlo))
        return out

    def fast(self, key: str, s) -> np.ndarray:
        return np.exp(self.fast_log(key, s))

    # -- solver support -------------------------------------------------------
    @cached_property
    def _pi_table(self):
        prof = self.profile
        lo = prof.probe_floor() if prof.kind in ("exp-inverse", "tabulated") else 1e-12 * prof.M
        s = np.geomspace(lo, prof.M, 1200)
        pi = q.pi_values(prof, s)
        return lo, interpolate.PchipInterpolator(np.log(s), pi, extrapolate=False)

    def coefficient(self, u, eps: float):
        """Frozen-coefficient diffusivity (F(u) + eps) / h(u) = P(u) + eps / h(u).

        Closed-form profiles are exact; others interpolate P*I from a table
        of 1200 log-spaced quadrature values (clamped below the table floor).
        """
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise DomainError("coefficient needs u > 0")
        prof, L = self.profile, self.Lambda
        logP = np.asarray(prof.log_P(u), dtype=float)
        if prof.kind == "power" and prof.closed_form_tail:
            pi = np.full(u.shape, 1.0 / prof.p)
        else:
            lo, tab = self._pi_table
            pi = tab(np.log(np.clip(u, lo, prof.M)))
        logI = np.log(pi) - logP
        logh = self.core.log_scale - np.log(u) - (1.0 / L + 1.0) * logI - logP
        with np.errstate(over="ignore"):
            return np.exp(logP) + eps * np.exp(-logh)


def build_bundle(profile: DegeneracyProfile, Lambda: float,
                 n_probe: int = PROBE_POINTS) -> ConstitutiveBundle:
    """Construct the bundle after checking admissibility for this Lambda."""
    report = analyze_profile(profile, Lambda, n_probe=n_probe)
    if not (report.passed["A_finite"] and report.passed["a_finite"]):
        raise AUnbounded(f"P*I is unbounded near 0 (A={report.A}, a={report.a})")
    c = (Lambda + 1.0) / Lambda
    if not c > report.A:
        raise InadmissibleLambda(
            f"(Lambda+1)/Lambda = {c:.6g} <= A = {report.A:.6g}; admissible Lambda in "
            f"{report.lambda_range}"
        )
    core = _Core(profile, Lambda)
    bundle = ConstitutiveBundle(profile=profile, Lambda=float(Lambda), report=report, core=core)
    s = _probe_grid(profile, n_probe)
    lg = core.logs(s)
    if np.any(~np.isfinite(lg["logFp"])):
        raise NonMonotoneF("F' <= 0 detected on the probe grid")
    for key in ("logH", "logF"):
        if np.any(np.diff(lg[key]) <= 0):
            raise NonMonotoneF(f"{key[3:]} is not strictly increasing on the probe grid")
    return bundle


def verify_A2(bundle: ConstitutiveBundle, s_samples) -> float:
    """max |[s F(s)]^(lambda/2) / H(s) - 1| over the samples."""
    s = np.atleast_1d(np.asarray(s_samples, dtype=float))
    if np.any(s <= 0) or np.any(s > bundle.M * (1 + 1e-12)):
        raise DomainError("A-2 samples must lie in (0, M]")
    lg = bundle.core.logs(s)
    lam = bundle.lambda_
    dev = np.expm1(0.5 * lam * (np.log(s) + lg["logF"]) - lg["logH"])
    return float(np.max(np.abs(dev)))


def ratio_HG(bundle: ConstitutiveBundle, s: float, tol: float = 1e-12) -> float:
    """H'(s)/G'(s) from the closed form in I, P and Lambda.

    H'/G' = sqrt(K) (I^(1/Lambda) P)^(-1/2) ((Lambda+1)/Lambda - P I)^(-1/2)
    with K = Lambda^(-1/Lambda-1).
    """
    if not 0 < s <= bundle.M * (1 + 1e-12):
        raise DomainError("ratio_HG needs 0 < s <= M")
    lg = bundle.core.logs(np.array([s]))
    pi = float(lg["PI"][0])
    gap = bundle.core.c - pi
    if gap <= tol:
        raise DegenerateRatio(f"(Lambda+1)/Lambda - P*I = {gap:.3g} at s={s}")
    L = bundle.Lambda
    log_ipl = float(lg["logI"][0]) / L + float(lg["logP"][0])
    return math.exp(0.5 * bundle.core.log_scale - 0.5 * log_ipl) / math.sqrt(gap)


def eval_I(profile: DegeneracyProfile, s):
    """I(s) = int_s^inf dt/(t P(t)) with the profile's tail policy."""
    arr = np.asarray(s, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if np.any(flat <= 0):
        raise DomainError("I(s) needs s > 0")
    logP = np.asarray(profile.log_P(flat), dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(np.log(q.pi_values(profile, flat)) - logP).reshape(arr.shape)
    return out if arr.ndim else float(out)
