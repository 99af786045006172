"""Shrinking-ball iteration: radii, cutoffs, exponents, the energy functional Y_n,
the smallness threshold, the iteration lemma and empirical support fronts.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .constitutive import ConstitutiveBundle
from .errors import (BadB, BadParams, CenterNotClean, DimensionUnsupported,
                     InsufficientSnapshots)
from .solver import Trajectory

MIN_SNAPSHOTS = 8


def b_from_radii(R: float, Rprime: float) -> float:
    """Solve (b-2)/(b-1) = R'/R for b."""
    if not 0 < Rprime < R:
        raise BadParams("need 0 < R' < R")
    rho = Rprime / R
    return (2.0 - rho) / (1.0 - rho)


def radii(b: float, R: float, n) -> float:
    """R_n = R (b - 2 + b^-n) / (b - 1); n = inf gives the limit radius."""
    if not b > 2:
        raise BadB(f"b = {b} must exceed 2")
    if n == math.inf:
        return R * (b - 2.0) / (b - 1.0)
    if n < 0:
        raise ValueError("n must be non-negative")
    return R * (b - 2.0 + b ** (-float(n))) / (b - 1.0)


def sobolev_constant(N: int) -> float:
    """Sharp S with ||psi||^2_{2N/(N-2)} <= S ||grad psi||^2_2 in R^N, N >= 3."""
    if N < 3:
        raise DimensionUnsupported("critical Sobolev embedding needs N >= 3")
    return (special.gamma(N) / special.gamma(N / 2.0)) ** (2.0 / N) / (math.pi * N * (N - 2.0))


@dataclass(frozen=True)
class DeGiorgiParams:
    N: int
    b: float
    R: float
    Rprime: float
    lambda_: float
    j: float
    k: float
    gamma: float
    S: float
    C1: float
    D: float
    threshold: float

    @property
    def log_threshold(self) -> float:
        kj = self.k * self.j
        return -math.log(self.D) / kj - 2.0 * math.log(self.b) / kj ** 2

    def radius(self, n) -> float:
        return radii(self.b, self.R, n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


def exponents(N: int, lambda_: float, b: float, R: float, C1: float,
              S: Optional[float] = None, Rprime: Optional[float] = None) -> DeGiorgiParams:
    """Exponents j, k, gamma and the constants D and threshold of the iteration."""
    if N < 3:
        raise DimensionUnsupported(f"j = 2/(N-2) is undefined for N = {N}")
    if not 0 < lambda_ < 2:
        raise BadParams("lambda must lie in (0, 2)")
    if not b > 2:
        raise BadB(f"b = {b} must exceed 2")
    S = sobolev_constant(N) if S is None else float(S)
    j = 2.0 / (N - 2.0)
    k = (2.0 - lambda_) / (2.0 + 2.0 * j - lambda_)
    gamma = (1.0 - (1.0 + j) * k) / (k * j)
    if abs(gamma - lambda_ / (2.0 - lambda_)) > 1e-9 * max(1.0, gamma):
        raise AssertionError("gamma identity failed")
    D = b ** 4 / R ** 2 * (2.0 * C1 ** 2 + 1.0) * S ** (k * (1.0 + j))
    with np.errstate(over="ignore", under="ignore"):
        threshold = float(np.exp(-math.log(D) / (k * j) - 2.0 * math.log(b) / (k * j) ** 2))
    Rp = radii(b, R, math.inf) if Rprime is None else float(Rprime)
    return DeGiorgiParams(N=N, b=b, R=R, Rprime=Rp, lambda_=lambda_, j=j, k=k, gamma=gamma,
                          S=S, C1=C1, D=D, threshold=threshold)


def params_for(bundle: ConstitutiveBundle, N: int, R: float, Rprime: float,
               S: Optional[float] = None) -> DeGiorgiParams:
    """Parameters for a bundle and a pair of radii R' < R."""
    return exponents(N, bundle.lambda_, b_from_radii(R, Rprime), R, bundle.C1, S, Rprime)


def cutoff(x, n: int, params: DeGiorgiParams, x0=0.0):
    """theta_n = min((R_n - |x - x0|)_+ / (R_n - R_{n+1}), 1)."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    d = np.abs(x - x0) if x0.ndim == 0 else np.linalg.norm(x - x0, axis=-1)
    Rn, Rn1 = params.radius(n), params.radius(n + 1)
    out = np.minimum(np.maximum(Rn - d, 0.0) / (Rn - Rn1), 1.0)
    return out if out.ndim else float(out)


# -- functional Y_n ---------------------------------------------------------------
def _window(traj: Trajectory, Tprime: float) -> np.ndarray:
    if not 0 < Tprime <= traj.T * (1 + 1e-12):
        raise ValueError(f"T' = {Tprime} outside (0, {traj.T}]")
    idx = np.nonzero(traj.times <= Tprime * (1 + 1e-12))[0]
    if idx.size < MIN_SNAPSHOTS:
        raise InsufficientSnapshots(f"{idx.size} snapshots in [0, {Tprime}], need {MIN_SNAPSHOTS}")
    return idx


def _time_integral(times: np.ndarray, vals: np.ndarray, Tprime: float) -> float:
    """Trapezoid of vals over [0, T'], interpolating the last partial interval."""
    k = np.searchsorted(times, Tprime, side="right")
    total = float(integrate.trapezoid(vals[:k], times[:k])) if k > 1 else 0.0
    if k < len(times) and times[k - 1] < Tprime:
        t0, t1 = times[k - 1], times[k]
        w = (Tprime - t0) / (t1 - t0)
        v_end = vals[k - 1] + w * (vals[k] - vals[k - 1])
        total += 0.5 * (vals[k - 1] + v_end) * (Tprime - t0)
    return total


def _excess(traj: Trajectory, excess: bool) -> np.ndarray:
    u = traj.excess if excess else traj.snapshots
    return np.maximum(u, 0.0)


@dataclass(frozen=True)
class YParts:
    sup_H: float
    grad_G: float
    scale: float

    @property
    def value(self) -> float:
        return self.scale * (self.sup_H + self.grad_G)


def Y_parts(traj: Trajectory, bundle: ConstitutiveBundle, params: DeGiorgiParams,
            Tprime: float, n: int, excess: bool = True, x0: float = 0.0) -> YParts:
    """sup_t int theta_n^2 H(u) and int int |grad(theta_n G(u))|^2 over [0, T']."""
    _window(traj, Tprime)
    geo = traj.geometry
    th = cutoff(geo.nodes, n, params, x0)
    u = _excess(traj, excess)
    k_end = min(np.searchsorted(traj.times, Tprime, side="right") + 1, len(traj.times))
    u = u[:k_end]
    H = bundle.fast("H", u)
    G = bundle.fast("G", u)
    idx = traj.times[:k_end] <= Tprime * (1 + 1e-12)
    sup_H = float(np.max((H[idx] * th ** 2) @ geo.weights))
    grads = (np.diff(th * G, axis=1) / geo.dx) ** 2 @ geo.edge_weights
    grad_G = _time_integral(traj.times[:k_end], grads, Tprime)
    return YParts(sup_H, grad_G, Tprime ** params.gamma)


def evaluate_Y(traj: Trajectory, bundle: ConstitutiveBundle, params: DeGiorgiParams,
               Tprime: float, n: int, excess: bool = True, x0: float = 0.0) -> float:
    """Y_n(T') on the stored snapshots (trapezoid in space and time)."""
    return Y_parts(traj, bundle, params, Tprime, n, excess, x0).value


@dataclass(frozen=True)
class RecursionCheck:
    rhs: tuple
    margins: tuple

    def ok(self, Y: Sequence[float], rel: float = 1e-6) -> bool:
        floor = -rel * max(max(Y, default=0.0), 0.0)
        return all(m >= floor for m in self.margins)


def check_recursion(Y: Sequence[float], params: DeGiorgiParams) -> RecursionCheck:
    """Margins D (b^2)^(n-1) Y_{n-1}^(1+kj) - Y_n for n = 1, 2, ..."""
    Y = [float(v) for v in Y]
    e = 1.0 + params.k * params.j
    rhs, margins = [], []
    for n in range(1, len(Y)):
        prev = Y[n - 1]
        r = 0.0 if prev == 0 else math.exp(
            math.log(params.D) + 2.0 * (n - 1) * math.log(params.b) + e * math.log(prev))
        rhs.append(r)
        margins.append(r - Y[n])
    return RecursionCheck(tuple(rhs), tuple(margins))


def find_T_star(traj: Trajectory, bundle: ConstitutiveBundle, params: DeGiorgiParams,
                n: int = 0, iters: int = 50, excess: bool = True) -> float:
    """Largest T' (by bisection) with Y_n(T') <= threshold; 0 if none qualifies."""
    t_min = float(traj.times[MIN_SNAPSHOTS - 1])
    thr = params.threshold

    def ok(T: float) -> bool:
        return evaluate_Y(traj, bundle, params, T, n, excess) <= thr

    if ok(traj.T):
        return traj.T
    if not ok(t_min):
        return 0.0
    lo, hi = t_min, traj.T
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


# -- iteration lemma ------------------------------------------------------------
@dataclass(frozen=True)
class LadyzhenskayaResult:
    log_y: tuple
    log_bound: tuple
    log_decay: Optional[tuple]
    threshold: float
    log_threshold: float
    converges: bool

    @property
    def y(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_y))


def ladyzhenskaya(y0: float, c: float, b: float, eps: float, n_max: int = 50) -> LadyzhenskayaResult:
    """Iterate y_{n+1} = c b^n y_n^(1+eps) in logs, with the explicit bounds.

    The threshold is theta_L = c^(-1/eps) b^(-1/eps^2); when y0 <= theta_L and
    b > 1 the sequence obeys y_n <= theta_L b^(-n/eps).
    """
    if not (c > 0 and eps > 0 and b >= 1 and y0 >= 0 and n_max >= 0):
        raise BadParams("need c > 0, eps > 0, b >= 1, y0 >= 0")
    lc, lb = math.log(c), math.log(b)
    log_thr = -lc / eps - lb / eps ** 2
    ly0 = math.log(y0) if y0 > 0 else -math.inf
    log_y, log_bound = [ly0], [ly0]
    cur = ly0
    for n in range(n_max):
        cur = lc + n * lb + (1.0 + eps) * cur if cur > -math.inf else -math.inf
        log_y.append(cur)
        m = n + 1
        grow = ((1.0 + eps) ** m - 1.0) / eps
        log_bound.append(grow * lc + (grow / eps - m / eps) * lb + (1.0 + eps) ** m * ly0
                         if ly0 > -math.inf else -math.inf)
    conv = ly0 <= log_thr
    decay = tuple(log_thr - n * lb / eps for n in range(n_max + 1)) if conv and b > 1 else None
    with np.errstate(over="ignore", under="ignore"):
        thr = float(np.exp(log_thr))
    return LadyzhenskayaResult(tuple(log_y), tuple(log_bound), decay, thr, log_thr, conv)


# -- fronts ---------------------------------------------------------------------
@dataclass
class FrontTrace:
    times: np.ndarray
    front_radius: np.ndarray
    tol: float
    x0: float
    domain_radius: float

    def localization_time(self, Rprime: float) -> float:
        """sup{t : front(s) >= R' for every snapshot s <= t}; 0 if the first fails."""
        bad = np.nonzero(self.front_radius < Rprime)[0]
        if bad.size == 0:
            return float(self.times[-1])
        if bad[0] == 0:
            return 0.0
        return float(self.times[bad[0] - 1])

    def write_csv(self, path, preamble: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["t", "front_radius"])
            for t, r in zip(self.times, self.front_radius):
                w.writerow([repr(float(t)), repr(float(r))])


def front_trace(traj: Trajectory, x0: float = 0.0, tol: float = 1e-6,
                excess: bool = True) -> FrontTrace:
    """Per snapshot, distance from x0 to the nearest node with u > eps + tol."""
    geo = traj.geometry
    if geo.kind == "radial" and x0 != 0.0:
        raise ValueError("radial trajectories are centred at r = 0")
    x = geo.nodes
    d = np.abs(x - x0)
    dom = float(d.max())
    u = traj.excess if excess else traj.snapshots
    dirty = u > tol
    centre = int(np.argmin(d))
    if dirty[0, centre]:
        raise CenterNotClean(f"u(x0, 0) exceeds eps + {tol}")
    fr = np.where(dirty.any(axis=1), np.where(dirty, d, np.inf).min(axis=1), dom)
    return FrontTrace(traj.times.copy(), fr, tol, x0, dom)


@dataclass
class DeGiorgiReport:
    params: DeGiorgiParams
    Tprime: float
    Y: list
    recursion: RecursionCheck
    T_star: float
    extra: dict = field(default_factory=dict)

    def threshold_json(self) -> dict:
        p = self.params
        return {"b": p.b, "R": p.R, "Rprime": p.Rprime, "lambda": p.lambda_, "j": p.j,
                "k": p.k, "gamma": p.gamma, "S": p.S, "D": p.D, "threshold": p.threshold,
                "T_star": self.T_star, **self.extra}

    def write_ygrid(self, path, preamble: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["n", "R_n", "Y_n", "recursion_rhs", "margin"])
            for n, y in enumerate(self.Y):
                rhs = self.recursion.rhs[n - 1] if n > 0 else ""
                mar = self.recursion.margins[n - 1] if n > 0 else ""
                w.writerow([n, repr(self.params.radius(n)), repr(float(y)),
                            repr(rhs) if n else "", repr(mar) if n else ""])


def analyze(traj: Trajectory, bundle: ConstitutiveBundle, params: DeGiorgiParams,
            Tprime: Optional[float] = None, n_max: int = 8) -> DeGiorgiReport:
    """Y_0..Y_{n_max} at T', recursion margins and the bisected T*."""
    if params.N != traj.geometry.N or traj.geometry.kind != "radial":
        raise DimensionUnsupported("Y_n needs a radial trajectory with matching N")
    T = traj.T if Tprime is None else Tprime
    Y = [evaluate_Y(traj, bundle, params, T, n) for n in range(n_max + 1)]
    rec = check_recursion(Y, params)
    T_star = find_T_star(traj, bundle, params)
    return DeGiorgiReport(params, T, Y, rec, T_star)
