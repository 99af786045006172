"""Audits of the a-priori inequalities on bundles and stored trajectories."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .constitutive import ConstitutiveBundle
from .degiorgi import DeGiorgiParams, Y_parts, _time_integral, _window
from .errors import DimensionUnsupported, InsufficientSnapshots, RampActive
from .solver import Trajectory

ENERGY_FLOOR = 1e-30


@dataclass(frozen=True)
class PointSample:
    u: float
    grad_u: np.ndarray
    theta: float
    grad_theta: np.ndarray
    bundle: ConstitutiveBundle

    def __post_init__(self):
        gu = np.atleast_1d(np.asarray(self.grad_u, dtype=float))
        gt = np.atleast_1d(np.asarray(self.grad_theta, dtype=float))
        object.__setattr__(self, "grad_u", gu)
        object.__setattr__(self, "grad_theta", gt)
        if gu.shape != gt.shape:
            raise ValueError("grad_u and grad_theta must have the same dimension")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")
        if not (0 < self.u and math.isfinite(self.u)):
            raise ValueError("u must be positive")
        if not (np.all(np.isfinite(gu)) and np.all(np.isfinite(gt))):
            raise ValueError("gradients must be finite")


def _gap(logF, logG, logFp, C1, gu, th, gt):
    """Vectorised gap; gu, gt have shape (..., d).

    The quadratic form is evaluated after dividing by F' = G'^2, using the
    ratios F/F' and G/G' formed in logs, then multiplied back.  This keeps the
    sign exact where F and G underflow.
    """
    fr = np.exp(logF - logFp)
    gr = np.exp(logG - 0.5 * logFp)
    du = np.sum(gu * gu, axis=-1)
    dt = np.sum(gt * gt, axis=-1)
    cross = np.sum(gu * gt, axis=-1)
    lhs = th ** 2 * du + 2.0 * th * fr * cross
    v = th[..., None] * gu + gr[..., None] * gt
    rhs = 0.5 * np.sum(v * v, axis=-1) - (2.0 * C1 ** 2 + 1.0) * gr ** 2 * dt
    scaled = lhs - rhs
    return np.exp(logFp) * scaled, scaled


def lemma1_gap(sample: PointSample) -> float:
    """grad u . grad(theta^2 F(u)) - [1/2 |grad(theta G(u))|^2 - (2 C1^2 + 1) G^2 |grad theta|^2]."""
    b = sample.bundle
    u = np.array([sample.u])
    gap, _ = _gap(b.fast_log("F", u), b.fast_log("G", u), b.fast_log("Fp", u), b.C1,
                  sample.grad_u[None, :], np.array([sample.theta]), sample.grad_theta[None, :])
    return float(gap[0])


def lemma1_sweep(bundle: ConstitutiveBundle, n: int = 10_000, dim: int = 3,
                 seed: int = 0) -> dict:
    """Random (u, grad u, theta, grad theta) samples; returns the smallest gap.

    ``min_scaled_gap`` is the gap divided by F'(u), which is O(1) even where
    the gap itself underflows.
    """
    rng = np.random.default_rng(seed)
    lo = bundle.report.s_min
    u = np.exp(rng.uniform(math.log(lo), math.log(bundle.M), n))
    gu = rng.normal(size=(n, dim)) * 10.0 ** rng.uniform(-3, 3, (n, 1))
    gt = rng.normal(size=(n, dim)) * 10.0 ** rng.uniform(-3, 3, (n, 1))
    th = rng.uniform(0.0, 1.0, n)
    gaps, scaled = _gap(bundle.fast_log("F", u), bundle.fast_log("G", u),
                        bundle.fast_log("Fp", u), bundle.C1, gu, th, gt)
    k = int(np.argmin(scaled))
    return {"n": n, "seed": seed, "min_gap": float(np.min(gaps)),
            "min_scaled_gap": float(scaled[k]), "argmin_u": float(u[k]),
            "negative": int(np.sum(scaled < 0))}


# -- integral audits --------------------------------------------------------------
@dataclass(frozen=True)
class Lemma2Result:
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs


def lemma2_check(traj: Trajectory, bundle: ConstitutiveBundle, params: DeGiorgiParams,
                 K_radius: Optional[float] = None, t: Optional[float] = None,
                 n: int = 0) -> Lemma2Result:
    """int_0^t int_K G^2(u) against c1 t^(1-(1+j)k) [sup int theta_n^2 H + int int |grad(theta_n G)|^2]^(1+jk).

    K = B_{K_radius} must lie where theta_n = 1, i.e. K_radius <= R_{n+1}.
    """
    if traj.geometry.kind != "radial" or traj.geometry.N != params.N:
        raise DimensionUnsupported("the integral audit needs a radial trajectory with matching N")
    t = traj.T if t is None else t
    Rk = params.radius(n + 1)
    K_radius = Rk if K_radius is None else K_radius
    if K_radius > Rk * (1 + 1e-12):
        raise ValueError(f"theta_{n} is not 1 on B_{K_radius}; need K_radius <= {Rk}")
    _window(traj, t)
    geo = traj.geometry
    inside = geo.nodes <= K_radius
    G2 = bundle.fast("G", np.maximum(traj.excess, 0.0)) ** 2
    per_t = G2[:, inside] @ geo.weights[inside]
    lhs = _time_integral(traj.times, per_t, t)
    parts = Y_parts(traj, bundle, params, t, n)
    k, j = params.k, params.j
    c1 = params.S ** (k * (1.0 + j))
    base = parts.sup_H + parts.grad_G
    rhs = 0.0 if base == 0 else c1 * t ** (1.0 - (1.0 + j) * k) * base ** (1.0 + j * k)
    return Lemma2Result(float(lhs), float(rhs))


def energy_terms(traj: Trajectory, bundle: Optional[ConstitutiveBundle] = None,
                 t_start: float = 0.0) -> dict:
    """Terms of int int (d Htilde(u)/dt)^2 + 1/2 int |grad u(T)|^2 = 1/2 int |grad u(t_start)|^2.

    With Htilde' = sqrt(h/(F+eps)) = c^(-1/2), the time derivative is
    (du/dt)/sqrt(c), evaluated between consecutive snapshots with c frozen at
    the earlier one.  Node terms use the control volumes of the stencil,
    gradient terms the matching edge weights.
    """
    phi = traj.phi
    if phi is not None and getattr(phi, "sup", 0.0) != 0.0:
        t_ramp = getattr(phi, "t_ramp", 0.0)
        if t_start < t_ramp:
            raise RampActive(f"boundary data still ramping until t={t_ramp}")
    times = traj.times
    k0 = int(np.searchsorted(times, t_start - 1e-12 * max(1.0, traj.T)))
    if len(times) - k0 < 2:
        raise InsufficientSnapshots("need two snapshots after t_start")
    geo = traj.geometry
    w = traj.excess[k0:]
    c = traj.coefficient(bundle)[k0:]
    dt = np.diff(times[k0:])
    dw = np.diff(w, axis=0)
    vol = geo.volumes
    free = ~geo.dirichlet
    kinetic = float(np.sum(((dw[:, free] ** 2) / c[:-1, free]) @ vol[free] / dt))
    ew = geo.edge_weights
    grad0 = 0.5 * float((np.diff(w[0]) / geo.dx) ** 2 @ ew)
    gradT = 0.5 * float((np.diff(w[-1]) / geo.dx) ** 2 @ ew)
    return {"kinetic": kinetic, "grad_final": gradT, "grad_initial": grad0}


def energy_residual(traj: Trajectory, bundle: Optional[ConstitutiveBundle] = None,
                    t_start: float = 0.0) -> float:
    """|LHS - RHS| / max(RHS, floor) for the energy identity; 0 for constant states."""
    e = energy_terms(traj, bundle, t_start)
    lhs = e["kinetic"] + e["grad_final"]
    rhs = e["grad_initial"]
    return abs(lhs - rhs) / max(rhs, ENERGY_FLOOR)


@dataclass(frozen=True)
class GradGResult:
    lhs: float
    rhs_initial: float
    rhs_cutoff: float

    @property
    def rhs(self) -> float:
        return self.rhs_initial + self.rhs_cutoff

    @property
    def c_min(self) -> float:
        return 0.0 if self.lhs == 0 else self.lhs / self.rhs


def radial_cutoff(inner: float, outer: float) -> Callable[[np.ndarray], np.ndarray]:
    """1 on [0, inner], linear to 0 at outer."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    return lambda r: np.clip((outer - np.asarray(r, dtype=float)) / (outer - inner), 0.0, 1.0)


def grad_G_check(traj: Trajectory, bundle: ConstitutiveBundle,
                 theta: Union[np.ndarray, Callable]) -> GradGResult:
    """int int |grad(theta G)|^2 against int theta^2 G(u_0)^2 and int int |grad theta|^2 G^2.

    G is applied to the excess u - eps; edge quantities use midpoint weights.
    """
    geo = traj.geometry
    th = np.asarray(theta(geo.nodes) if callable(theta) else theta, dtype=float)
    if th.shape != geo.nodes.shape:
        raise ValueError("theta must be given on the grid nodes")
    G = bundle.fast("G", np.maximum(traj.excess, 0.0))
    ew = geo.edge_weights
    lhs_t = (np.diff(th * G, axis=1) / geo.dx) ** 2 @ ew
    gth2 = (np.diff(th) / geo.dx) ** 2
    G2e = 0.5 * (G[:, 1:] ** 2 + G[:, :-1] ** 2)
    cut_t = (G2e * gth2) @ ew
    T = traj.T
    lhs = _time_integral(traj.times, lhs_t, T)
    rhs_cut = _time_integral(traj.times, cut_t, T)
    rhs_init = float((th ** 2 * G[0] ** 2) @ geo.weights)
    return GradGResult(float(lhs), rhs_init, float(rhs_cut))


def h_over_F_check(bundle: ConstitutiveBundle, s) -> float:
    """max |h P / F - 1| on the given points (F = h P)."""
    lg = bundle.core.logs(np.asarray(s, dtype=float))
    return float(np.max(np.abs(np.expm1(lg["logh"] + lg["logP"] - lg["logF"]))))


def audit(traj: Trajectory, bundle: ConstitutiveBundle, params: DeGiorgiParams,
          theta: Union[np.ndarray, Callable], n_samples: int = 10_000, seed: int = 0,
          t_start: float = 0.0) -> dict:
    """All audits for one run, shaped like estimates.json."""
    l1 = lemma1_sweep(bundle, n_samples, dim=max(traj.geometry.N, 1), seed=seed)
    l2 = lemma2_check(traj, bundle, params)
    gg = grad_G_check(traj, bundle, theta)
    return {
        "lemma1_min_gap": l1["min_gap"],
        "lemma1": l1,
        "lemma2": {"lhs": l2.lhs, "rhs": l2.rhs},
        "energy_residual": energy_residual(traj, bundle, t_start),
        "grad_G": {"lhs": gg.lhs, "rhs": gg.rhs, "c_min": gg.c_min},
    }
