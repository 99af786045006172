"""Frozen-coefficient solver for u_t = c(u) Lap u with a positive floor eps.

In bundle mode c(u) = (F(u) + eps) / h(u); in calibration mode c is a
constant diffusivity.  Each implicit step solves one tridiagonal M-matrix
system, so nodal values stay between the data bounds.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import linalg, special

from .constitutive import ConstitutiveBundle
from .errors import (CflViolation, DimensionMismatch, DomainError, FsplabError,
                     StepBlowup)
from .profiles import DegeneracyProfile

log = logging.getLogger(__name__)

Model = Union[ConstitutiveBundle, DegeneracyProfile, float]


def ball_measure(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / special.gamma(N / 2.0)


@dataclass(frozen=True)
class Geometry:
    """Uniform grid on [0, L]; radial grids carry the symmetry node r = 0."""

    kind: str
    L: float
    m: int
    N: int = 1

    def __post_init__(self):
        if self.kind not in ("interval", "radial"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.m < 16:
            raise ValueError("need m >= 16 cells")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.kind == "radial" and self.N < 1:
            raise ValueError("radial geometry needs N >= 1")

    @classmethod
    def interval(cls, L: float, m: int) -> "Geometry":
        return cls("interval", L, m, 1)

    @classmethod
    def radial(cls, N: int, L: float, m: int) -> "Geometry":
        return cls("radial", L, m, N)

    @property
    def dx(self) -> float:
        return self.L / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.dx

    @property
    def edges(self) -> np.ndarray:
        """Midpoints between consecutive nodes."""
        return (np.arange(self.m) + 0.5) * self.dx

    @property
    def dirichlet(self) -> np.ndarray:
        mask = np.zeros(self.m + 1, dtype=bool)
        mask[-1] = True
        if self.kind == "interval":
            mask[0] = True
        return mask

    def _density(self, r: np.ndarray) -> np.ndarray:
        if self.kind == "interval":
            return np.ones_like(r)
        return ball_measure(self.N) * r ** (self.N - 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights of the volume measure at the nodes."""
        w = np.full(self.m + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w * self._density(self.nodes)

    @property
    def volumes(self) -> np.ndarray:
        """Control volumes of the finite-volume stencil (pair exactly with edge_weights)."""
        x = self.nodes
        rp = np.minimum(x + 0.5 * self.dx, self.L)
        rm = np.maximum(x - 0.5 * self.dx, 0.0)
        if self.kind == "interval":
            return rp - rm
        return ball_measure(self.N) * (rp ** self.N - rm ** self.N) / self.N

    @property
    def edge_weights(self) -> np.ndarray:
        """Midpoint weights for quantities living on edges (gradients)."""
        return self.dx * self._density(self.edges)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, f))

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """One-sided differences on edges."""
        return np.diff(f, axis=-1) / self.dx

    def grad_sq_integral(self, f: np.ndarray) -> float:
        """int |grad f|^2 with edge differences and midpoint weights."""
        return float(np.dot(self.edge_weights, self.gradient(f) ** 2))

    def stencil(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rows (lower, diag, upper) of the discrete Laplacian; Dirichlet rows are zero.

        The radial operator is the finite-volume form
        N [r_{i+1/2}^{N-1} (u_{i+1}-u_i) - r_{i-1/2}^{N-1} (u_i-u_{i-1})] /
        (dx (r_{i+1/2}^N - r_{i-1/2}^N)),
        which reduces to 2N (u_1-u_0)/dx^2 at r = 0 and has non-negative
        off-diagonals for every N.
        """
        n, dx = self.m + 1, self.dx
        lo, di, up = np.zeros(n), np.zeros(n), np.zeros(n)
        if self.kind == "interval":
            lo[:] = up[:] = 1.0 / dx ** 2
            di[:] = -2.0 / dx ** 2
        else:
            N = self.N
            i = np.arange(n, dtype=float)
            rp = (i + 0.5) * dx
            rm = np.maximum(i - 0.5, 0.0) * dx
            vol = (rp ** N - rm ** N) / N
            up[:] = rp ** (N - 1) / (dx * vol)
            lo[:] = rm ** (N - 1) / (dx * vol)
            lo[0] = 0.0
            di[:] = -(lo + up)
        mask = self.dirichlet
        lo[mask] = di[mask] = up[mask] = 0.0
        return lo, di, up

    def describe(self) -> dict:
        return {"kind": self.kind, "L": self.L, "m": self.m, "N": self.N}


def laplacian_apply(geometry: Geometry, u) -> np.ndarray:
    """Discrete Laplacian at the free nodes; NaN on Dirichlet nodes."""
    u = np.asarray(u, dtype=float)
    if u.shape != (geometry.m + 1,):
        raise DimensionMismatch(f"field has shape {u.shape}, grid has {geometry.m + 1} nodes")
    lo, di, up = geometry.stencil()
    out = di * u
    out[1:] += lo[1:] * u[:-1]
    out[:-1] += up[:-1] * u[1:]
    out[geometry.dirichlet] = np.nan
    return out


# -- data ---------------------------------------------------------------------
@dataclass(frozen=True)
class Bump:
    """Smooth cos^2 bump of given height, centred at `center` with half-width `radius`."""

    center: float
    radius: float
    height: float

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = np.abs(x - self.center) / self.radius
        return np.where(z < 1.0, self.height * np.cos(0.5 * np.pi * z) ** 2, 0.0)

    @property
    def sup(self) -> float:
        return self.height

    @property
    def clean_radius(self) -> float:
        """Largest r such that the bump vanishes on [0, r)."""
        return max(self.center - self.radius, 0.0)

    def describe(self) -> dict:
        return {"kind": "bump", "center": self.center, "radius": self.radius,
                "height": self.height}


@dataclass(frozen=True)
class Ramp:
    """phi(t) = phi_max * min(t / t_ramp, 1); vanishes at t = 0."""

    phi_max: float = 0.0
    t_ramp: float = 1.0

    def __call__(self, t: float) -> float:
        if self.phi_max == 0.0:
            return 0.0
        return self.phi_max * min(t / self.t_ramp, 1.0)

    @property
    def sup(self) -> float:
        return self.phi_max

    def describe(self) -> dict:
        return {"kind": "ramp", "phi_max": self.phi_max, "t_ramp": self.t_ramp}


@dataclass(frozen=True)
class SineMode:
    """amplitude * sin(k x), the first Dirichlet mode on (0, pi) for k = 1."""

    amplitude: float = 1.0
    k: float = 1.0

    def __call__(self, x) -> np.ndarray:
        return self.amplitude * np.sin(self.k * np.asarray(x, dtype=float))

    @property
    def sup(self) -> float:
        return abs(self.amplitude)

    @property
    def clean_radius(self) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"kind": "sine", "amplitude": self.amplitude, "k": self.k}


def _sup(fn, default: float = 0.0) -> float:
    return float(getattr(fn, "sup", default))


def _describe(fn) -> object:
    if fn is None:
        return None
    d = getattr(fn, "describe", None)
    return d() if d else repr(fn)


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float
    T: float
    scheme: str = "implicit"
    dt: Optional[float] = None
    g: Optional[Callable] = None
    phi: Optional[Callable] = None
    snapshot_stride: int = 1
    inner_radius: float = 0.0
    safety: float = 0.45

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.scheme not in ("implicit", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.phi is not None and self.phi(0.0) != 0.0:
            raise ValueError("phi must vanish at t = 0")

    def with_epsilon(self, eps: float) -> "SolverConfig":
        from dataclasses import replace
        return replace(self, epsilon=eps)

    def describe(self) -> dict:
        return {"epsilon": self.epsilon, "T": self.T, "scheme": self.scheme, "dt": self.dt,
                "g": _describe(self.g), "phi": _describe(self.phi),
                "snapshot_stride": self.snapshot_stride, "inner_radius": self.inner_radius}


@dataclass
class Trajectory:
    geometry: Geometry
    times: np.ndarray
    excess: np.ndarray
    epsilon: float
    scheme: str
    mode: str
    dt: float
    bound: float
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    phi: Optional[Callable] = field(default=None, repr=False)
    g: Optional[Callable] = field(default=None, repr=False)
    diffusivity: Optional[float] = None

    @property
    def snapshots(self) -> np.ndarray:
        """Nodal values u = eps + excess."""
        return self.epsilon + self.excess

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def max_principle_ok(self, tol: float = 1e-12) -> bool:
        """eps <= u <= eps + bound at every stored node, checked on the excess."""
        slack = tol * max(1.0, self.bound)
        return bool(np.all(self.excess >= -slack) and np.all(self.excess <= self.bound + slack))

    def coefficient(self, bundle: Optional[ConstitutiveBundle] = None) -> np.ndarray:
        """Frozen coefficient c(u_k) at every stored snapshot."""
        if self.mode == "calibration":
            return np.full(self.excess.shape, float(self.diffusivity))
        if bundle is None:
            raise ValueError("bundle-mode trajectories need their bundle")
        return bundle.coefficient(self.snapshots, self.epsilon)

    def metadata(self) -> dict:
        return {"geometry": self.geometry.describe(), "epsilon": self.epsilon,
                "scheme": self.scheme, "mode": self.mode, "dt": self.dt,
                "bound": self.bound, "config": self.config,
                "diagnostics": self.diagnostics}

    def write_csv(self, path, preamble: Sequence[str] = ()) -> None:
        """One row per snapshot: t, u_0, ..., u_m."""
        with open(path, "w", newline="") as fh:
            for line in preamble:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["t"] + [f"u_{i}" for i in range(self.geometry.m + 1)])
            for t, row in zip(self.times, self.snapshots):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    def write_sidecar(self, path, extra: Optional[dict] = None) -> None:
        meta = self.metadata()
        if extra:
            meta.update(extra)
        with open(path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=float)


# -- time stepping ------------------------------------------------------------
def _coefficient_fn(model: Model) -> tuple[Callable, str, float]:
    if isinstance(model, ConstitutiveBundle):
        return (lambda u, eps: model.coefficient(u, eps)), "bundle", model.M
    D = calibration_diffusivity(model)
    return (lambda u, eps: np.full(np.shape(u), D)), "calibration", math.inf


def calibration_diffusivity(model) -> float:
    if isinstance(model, DegeneracyProfile):
        if not model.is_calibration:
            raise TypeError("pass a ConstitutiveBundle for degenerate profiles")
        D = model.diffusivity
    else:
        D = float(model)
        if not D > 0:
            raise ValueError("diffusivity must be positive")
    return D


def _check_data(geometry: Geometry, cfg: SolverConfig, g0: np.ndarray) -> None:
    if np.any(g0 < 0):
        raise ValueError("initial excess g must be non-negative")
    if cfg.inner_radius > 0:
        inner = geometry.nodes < cfg.inner_radius
        if np.any(g0[inner] != 0):
            raise ValueError("g must vanish on the inner region")


def solve(model: Model, geometry: Geometry, config: SolverConfig) -> Trajectory:
    """Advance u from eps + g to time T with Dirichlet data eps + phi(t)."""
    coef, mode, M = _coefficient_fn(model)
    eps = config.epsilon
    x = geometry.nodes
    g0 = np.zeros_like(x) if config.g is None else np.asarray(config.g(x), dtype=float)
    _check_data(geometry, config, g0)
    phi = config.phi or (lambda t: 0.0)
    bound = max(float(g0.max()), _sup(config.phi))
    if eps + bound > M * (1 + 1e-12):
        raise DomainError(f"eps + sup data = {eps + bound} exceeds M = {M}")

    lo, di, up = geometry.stencil()
    free = ~geometry.dirichlet
    if config.scheme == "explicit":
        span = np.linspace(eps, eps + bound, 64) if bound > 0 else np.array([eps])
        c_max = float(np.max(coef(span, eps)))
        dt_cfl = 1.0 / (c_max * float(np.max(np.abs(di))))
        dt = config.dt if config.dt is not None else config.safety * 2.0 * dt_cfl
    else:
        dt = config.dt if config.dt is not None else geometry.dx
    nsteps = max(1, int(math.ceil(config.T / dt - 1e-9)))
    dt = config.T / nsteps

    # advance the excess w = u - eps so that tiny excesses are not lost to
    # cancellation against eps; the coefficient is evaluated at eps + w
    w = g0.copy()
    w[geometry.dirichlet] = phi(0.0)
    tol = 1e-10 * max(1.0, bound)
    times, snaps = [0.0], [w.copy()]
    wmax, wmin = [float(w.max())], [float(w.min())]
    stride = config.snapshot_stride
    ab = np.zeros((3, w.size))
    for n in range(1, nsteps + 1):
        t = n * dt
        c = np.where(free, coef(eps + w, eps), 0.0)
        if config.scheme == "implicit":
            # (I - dt c L) w^{n+1} = w^n on free rows; identity on Dirichlet rows
            ab[0, 1:] = -dt * c[:-1] * up[:-1]
            ab[1, :] = 1.0 - dt * c * di
            ab[2, :-1] = -dt * c[1:] * lo[1:]
            rhs = w.copy()
            rhs[geometry.dirichlet] = phi(t)
            w = linalg.solve_banded((1, 1), ab, rhs, check_finite=False)
        else:
            if np.any(dt * c * np.abs(di) > 1.0 + 1e-12):
                raise CflViolation(f"dt={dt:.3g} violates dt*c*|diag| <= 1 at step {n}")
            lap = di * w
            lap[1:] += lo[1:] * w[:-1]
            lap[:-1] += up[:-1] * w[1:]
            w = w + dt * c * lap
            w[geometry.dirichlet] = phi(t)
        if not np.all(np.isfinite(w)) or w.min() < -tol or w.max() > bound + tol:
            raise StepBlowup(f"nodal values left [eps, eps+{bound}] at step {n} (t={t:.4g})")
        wmax.append(float(w.max()))
        wmin.append(float(w.min()))
        if n % stride == 0 or n == nsteps:
            times.append(t)
            snaps.append(w.copy())

    diag = {"steps": nsteps, "max_per_step": [eps + v for v in wmax],
            "min_per_step": [eps + v for v in wmin],
            "max_principle": bool(min(wmin) >= -tol and max(wmax) <= bound + tol)}
    log.debug("solve: %s mode, %d steps of dt=%.3g", mode, nsteps, dt)
    return Trajectory(geometry=geometry, times=np.asarray(times), excess=np.asarray(snaps),
                      epsilon=eps, scheme=config.scheme, mode=mode, dt=dt, bound=bound,
                      config=config.describe(), diagnostics=diag, phi=config.phi, g=config.g,
                      diffusivity=None if mode == "bundle" else calibration_diffusivity(model))


@dataclass
class SweepResult:
    epsilons: list
    trajectories: list
    sup_differences: list
    comparison_excess: list

    @property
    def comparison_ok(self) -> bool:
        return all(v <= 1e-10 for v in self.comparison_excess)


def epsilon_sweep(model: Model, geometry: Geometry, base_config: SolverConfig,
                  eps_list: Sequence[float], workers: int = 1) -> SweepResult:
    """Solve for each eps on a shared grid and compare consecutive runs.

    ``comparison_excess[k]`` is max(u_{eps_{k+1}} - u_{eps_k} - (eps_k - eps_{k+1})),
    which is <= 0 when the eps-comparison principle holds.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ValueError("eps_list is empty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")

    def run(eps: float) -> Trajectory:
        try:
            return solve(model, geometry, base_config.with_epsilon(eps))
        except FsplabError as exc:
            exc.epsilon = eps
            exc.args = (f"eps={eps:g}: {exc}",)
            raise

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(run, eps_list))
    else:
        trajs = [run(e) for e in eps_list]
    diffs, comp = [], []
    for (e1, a), (e2, b) in zip(zip(eps_list, trajs), zip(eps_list[1:], trajs[1:])):
        if a.snapshots.shape != b.snapshots.shape:
            raise DimensionMismatch("sweep runs produced different snapshot grids")
        diffs.append(float(np.max(np.abs(a.snapshots - b.snapshots))))
        # u_small - u_large - (e_large - e_small), formed from the excesses
        comp.append(float(np.max(b.excess - a.excess)) - 2.0 * (e1 - e2))
    return SweepResult(eps_list, trajs, diffs, comp)
