"""Gaussian-shape-preserving dynamics of the first and second cumulants.

Natural units throughout: hbar = 1. The drift of the first cumulants is
``dS/dt = (M - lambda(t)) S`` and that of the second cumulants is
``dX/dt = (R - 2 lambda(t)) X + D(t)``, with ``S`` and ``X`` the
dimensionless cumulant vectors defined by :class:`CumulantVectors`.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import quad_vec, solve_ivp

from .errors import SolverFailure, UncertaintyViolation

HBAR = 1.0
SR_BOUND = HBAR**2 / 4
SR_TOL = 1e-9

# |eta t| below which the hyperbolic ratios switch to their Taylor series
_SERIES_RADIUS = 1e-6


@dataclass(frozen=True)
class HamiltonianParams:
    m: float = 1.0
    omega: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")

    @property
    def eta_squared(self) -> float:
        """delta**2 - omega**2; negative in the oscillating regime."""
        return self.delta**2 - self.omega**2


TimeFunction = Callable[[np.ndarray], np.ndarray]


def _const(value: float) -> TimeFunction:
    def f(t):
        return np.full(np.shape(t), float(value)) if np.ndim(t) else float(value)

    return f


@dataclass(frozen=True)
class MecSet:
    """The four master-equation coefficients as vectorised functions of time."""

    lam: TimeFunction
    dqq: TimeFunction
    dpp: TimeFunction
    dqp: TimeFunction

    @classmethod
    def constant(cls, lam=0.0, dqq=0.0, dpp=0.0, dqp=0.0) -> "MecSet":
        return cls(_const(lam), _const(dqq), _const(dpp), _const(dqp))

    @classmethod
    def zero(cls) -> "MecSet":
        return cls.constant()


@dataclass(frozen=True)
class CumulantVectors:
    s: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class GaussianState:
    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    cov_qp: float

    @property
    def determinant(self) -> float:
        return self.var_q * self.var_p - self.cov_qp**2

    def satisfies_uncertainty(self, tol: float = SR_TOL) -> bool:
        return self.var_q > 0 and self.var_p > 0 and self.determinant >= SR_BOUND - tol

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_q, self.mean_p, self.var_q, self.var_p, self.cov_qp])

    @classmethod
    def from_array(cls, a) -> "GaussianState":
        return cls(*(float(v) for v in a))

    def to_vectors(self, params: HamiltonianParams) -> CumulantVectors:
        mw = params.m * params.omega
        s = np.array([np.sqrt(mw) * self.mean_q, self.mean_p / np.sqrt(mw)]) / np.sqrt(HBAR)
        x = np.array([mw * self.var_q, self.var_p / mw, self.cov_qp]) / HBAR
        return CumulantVectors(s, x)

    @classmethod
    def from_vectors(cls, vec: CumulantVectors, params: HamiltonianParams) -> "GaussianState":
        mw = params.m * params.omega
        s = np.asarray(vec.s) * np.sqrt(HBAR)
        x = np.asarray(vec.x) * HBAR
        return cls(s[0] / np.sqrt(mw), s[1] * np.sqrt(mw), x[0] / mw, x[1] * mw, x[2])

    @classmethod
    def coherent(cls, mean_q: float = 0.0, mean_p: float = 0.0,
                 params: HamiltonianParams | None = None) -> "GaussianState":
        """Minimum-uncertainty state with the oscillator's ground-state widths."""
        params = params or HamiltonianParams()
        mw = params.m * params.omega
        return cls(mean_q, mean_p, HBAR / (2 * mw), HBAR * mw / 2, 0.0)


@dataclass(frozen=True)
class DriftMatrices:
    m2: np.ndarray
    r3: np.ndarray


def build_drift_matrices(params: HamiltonianParams) -> DriftMatrices:
    d, w = params.delta, params.omega
    m2 = np.array([[d, w], [-w, -d]], dtype=float)
    r3 = np.array([[2 * d, 0.0, 2 * w], [0.0, -2 * d, -2 * w], [-w, w, 0.0]], dtype=float)
    return DriftMatrices(m2, r3)


def diffusion_vector(mecs: MecSet, params: HamiltonianParams, t) -> np.ndarray:
    """D(t) = (2/hbar) (m w Dqq, Dpp/(m w), Dqp); shape (3,) or (3, len(t))."""
    mw = params.m * params.omega
    return (2.0 / HBAR) * np.array([mw * mecs.dqq(t), mecs.dpp(t) / mw, mecs.dqp(t)])


def _hyperbolic_pair(eta2: float, t: float) -> tuple[float, float, float]:
    """Return (cosh(eta t), sinh(eta t)/eta, (cosh(eta t) - 1)/eta**2).

    Valid for either sign of eta**2; negative values give the trigonometric
    continuation eta = i Omega.
    """
    x2 = eta2 * t * t
    if abs(x2) < _SERIES_RADIUS**2:
        c = 1 + x2 / 2 + x2 * x2 / 24
        s = t * (1 + x2 / 6 + x2 * x2 / 120)
        h = t * t * (0.5 + x2 / 24 + x2 * x2 / 720)
        return c, s, h
    if eta2 > 0:
        eta = np.sqrt(eta2)
        return np.cosh(eta * t), np.sinh(eta * t) / eta, 2 * np.sinh(eta * t / 2) ** 2 / eta2
    big_omega = np.sqrt(-eta2)
    c = np.cos(big_omega * t)
    # 1 - cos written as 2 sin^2 to avoid cancellation
    return c, np.sin(big_omega * t) / big_omega, -2 * np.sin(big_omega * t / 2) ** 2 / eta2


def expM(params: HamiltonianParams, t: float) -> np.ndarray:
    """Closed-form exp(t M); uses M @ M = eta**2 I."""
    m2 = build_drift_matrices(params).m2
    c, s, _ = _hyperbolic_pair(params.eta_squared, float(t))
    return c * np.eye(2) + s * m2


def expR(params: HamiltonianParams, t: float) -> np.ndarray:
    """Closed-form exp(t R) from the spectrum {0, +2 eta, -2 eta} of R.

    R**3 = 4 eta**2 R, so exp(tR) = I + sinh(2 eta t)/(2 eta) R
    + (cosh(2 eta t) - 1)/(4 eta**2) R**2.
    """
    r3 = build_drift_matrices(params).r3
    # the pair at (4 eta^2, t) yields the 2 eta t quantities directly
    _, s, h = _hyperbolic_pair(4 * params.eta_squared, float(t))
    return np.eye(3) + s * r3 + h * (r3 @ r3)


@dataclass(frozen=True)
class Trajectory:
    """Cumulant trajectory; ``data`` columns are mean_q, mean_p, var_q, var_p, cov_qp."""

    times: np.ndarray
    data: np.ndarray
    violations: tuple = field(default=(), compare=False)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> GaussianState:
        return GaussianState.from_array(self.data[i])

    @property
    def states(self) -> list[GaussianState]:
        return [GaussianState.from_array(row) for row in self.data]

    def s_vectors(self, params: HamiltonianParams) -> np.ndarray:
        mw = params.m * params.omega
        return np.column_stack([np.sqrt(mw) * self.data[:, 0], self.data[:, 1] / np.sqrt(mw)])

    def x_vectors(self, params: HamiltonianParams) -> np.ndarray:
        mw = params.m * params.omega
        return np.column_stack([mw * self.data[:, 2], self.data[:, 3] / mw, self.data[:, 4]])

    @classmethod
    def from_states(cls, times, states: Iterable[GaussianState]) -> "Trajectory":
        return cls(np.asarray(times, dtype=float), np.array([s.as_array() for s in states]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mean_q", "mean_p", "var_q", "var_p", "cov_qp"])
            for t, row in zip(self.times, self.data):
                w.writerow([f"{t:.15g}"] + [f"{v:.15g}" for v in row])

    @classmethod
    def read_csv(cls, path) -> "Trajectory":
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(raw[:, 0], raw[:, 1:])


def _check_uncertainty(traj_data: np.ndarray, times: np.ndarray, tol: float) -> tuple:
    det = traj_data[:, 2] * traj_data[:, 3] - traj_data[:, 4] ** 2
    bad = np.nonzero(det < SR_BOUND - tol)[0]
    if bad.size:
        warnings.warn(
            f"Schrodinger-Robertson bound violated at {bad.size} grid points "
            f"(first t={times[bad[0]]:.6g}, det={det[bad[0]]:.6g}); "
            "the coefficient set is unphysical",
            UncertaintyViolation,
            stacklevel=3,
        )
    return tuple(float(times[i]) for i in bad)


def evolve_cumulants(
    init: GaussianState,
    mecs: MecSet,
    params: HamiltonianParams,
    grid: Sequence[float],
    rtol: float = 1e-10,
    atol: float = 1e-12,
    method: str = "DOP853",
) -> Trajectory:
    """Integrate the cumulant equations and sample them on ``grid``.

    The grid must be strictly increasing and start at 0.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0:
        raise ValueError("grid must be a 1-D array starting at t=0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    mats = build_drift_matrices(params)
    vec = init.to_vectors(params)
    y0 = np.concatenate([vec.s, vec.x])

    def rhs(t, y):
        lam = float(mecs.lam(t))
        ds = mats.m2 @ y[:2] - lam * y[:2]
        dx = mats.r3 @ y[2:] - 2 * lam * y[2:] + diffusion_vector(mecs, params, t)
        return np.concatenate([ds, dx])

    if grid.size == 1:
        ys = y0[None, :]
    else:
        sol = solve_ivp(rhs, (0.0, grid[-1]), y0, method=method, t_eval=grid,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise SolverFailure(sol.message)
        ys = sol.y.T

    data = _vectors_to_data(ys[:, :2], ys[:, 2:], params)
    bad = _check_uncertainty(data, grid, SR_TOL)
    return Trajectory(grid, data, bad)


def _vectors_to_data(s: np.ndarray, x: np.ndarray, params: HamiltonianParams) -> np.ndarray:
    mw = params.m * params.omega
    sh = np.sqrt(HBAR)
    return np.column_stack([
        s[:, 0] * sh / np.sqrt(mw),
        s[:, 1] * sh * np.sqrt(mw),
        x[:, 0] * HBAR / mw,
        x[:, 1] * HBAR * mw,
        x[:, 2] * HBAR,
    ])


def exact_first_cumulants(init: GaussianState, params: HamiltonianParams, times,
                          capital_lambda: TimeFunction) -> np.ndarray:
    """S(t) = exp(-Lambda(t)) exp(tM) S(0) for each time; shape (n, 2)."""
    s0 = init.to_vectors(params).s
    times = np.asarray(times, dtype=float)
    big_l = np.asarray(capital_lambda(times), dtype=float)
    return np.array([np.exp(-bl) * (expM(params, t) @ s0) for t, bl in zip(times, big_l)])


def exact_cumulants(
    init: GaussianState,
    mecs: MecSet,
    params: HamiltonianParams,
    times,
    capital_lambda: TimeFunction,
    epsabs: float = 1e-13,
    epsrel: float = 1e-12,
) -> Trajectory:
    """Propagator solution, with the diffusion integral done by adaptive quadrature.

    Requires the antiderivative ``capital_lambda`` of ``mecs.lam``.
    """
    times = np.asarray(times, dtype=float)
    x0 = init.to_vectors(params).x
    s = exact_first_cumulants(init, params, times, capital_lambda)
    xs = []
    for t in times:
        lt = float(capital_lambda(t))

        def integrand(tp, t=t, lt=lt):
            w = np.exp(-2 * (lt - float(capital_lambda(tp))))
            return w * (expR(params, t - tp) @ diffusion_vector(mecs, params, tp))

        if t > 0:
            acc, _ = quad_vec(integrand, 0.0, t, epsabs=epsabs, epsrel=epsrel, limit=2000)
        else:
            acc = np.zeros(3)
        xs.append(np.exp(-2 * lt) * (expR(params, t) @ x0) + acc)
    return Trajectory(times, _vectors_to_data(s, np.array(xs), params))
