"""Differential reconstruction: pointwise coefficient estimates from incremental ratios.

Cumulants measured at ``t`` and ``t + dt`` give time derivatives by finite
differences; the cumulant equations then become linear in the unknown
coefficients. The increments are taken on the plain first moments, which is
what inverts ``d<q>/dt = (delta - lambda)<q> + <p>/m``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .dynamics import HBAR, GaussianState, HamiltonianParams, Trajectory, expM
from .errors import BothDenominatorsVanish, VanishingComponent

MIN_DENOMINATOR = 1e-9


@dataclass(frozen=True)
class FiniteDiffConfig:
    delta_t: float = 1e-4
    scheme: str = "forward"

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if self.scheme not in ("forward", "centered"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class LambdaEstimate:
    q: float
    p: float
    combined: float


@dataclass(frozen=True)
class DiffusionEstimate:
    dqq: float
    dpp: float
    dqp: float
    delta_qform: float
    delta_pform: float


def cumulant_rates(state_t: GaussianState, state_next: GaussianState, cfg: FiniteDiffConfig,
                   state_prev: GaussianState | None = None) -> np.ndarray:
    """Finite-difference time derivatives of (mean_q, mean_p, var_q, var_p, cov_qp)."""
    if cfg.scheme == "centered":
        if state_prev is None:
            raise ValueError("the centered scheme needs the state at t - dt")
        return (state_next.as_array() - state_prev.as_array()) / (2 * cfg.delta_t)
    return (state_next.as_array() - state_t.as_array()) / cfg.delta_t


def lambda_expt_point(state_t, state_next, params: HamiltonianParams, cfg: FiniteDiffConfig,
                      state_prev=None) -> LambdaEstimate:
    """Position- and momentum-based friction estimates and their weighted mean.

    Each variant divides by a first moment, so its error is amplified by
    1/|<q>| or 1/|<p>|. The combination weights each by the square of its
    (dimensionless) denominator.
    """
    m, w, d = params.m, params.omega, params.delta
    rq, rp = cumulant_rates(state_t, state_next, cfg, state_prev)[:2]
    q, p = state_t.mean_q, state_t.mean_p
    lam_q = d + (p / m - rq) / q if abs(q) > MIN_DENOMINATOR else np.nan
    lam_p = -d - (m * w**2 * q + rp) / p if abs(p) > MIN_DENOMINATOR else np.nan
    if np.isnan(lam_q) and np.isnan(lam_p):
        raise BothDenominatorsVanish(
            "both first moments vanish; shift the measurement time along the free rotation")
    if np.isnan(lam_q):
        return LambdaEstimate(lam_q, lam_p, lam_p)
    if np.isnan(lam_p):
        return LambdaEstimate(lam_q, lam_p, lam_q)
    wq = m * w * q**2
    wp = p**2 / (m * w)
    return LambdaEstimate(lam_q, lam_p, (wq * lam_q + wp * lam_p) / (wq + wp))


def lambda_rotating_point(state_t, state_next, t: float, params: HamiltonianParams,
                          cfg: FiniteDiffConfig, state_prev=None) -> float:
    """Incremental ratio of Lambda(t) in the frame co-rotating with the Hamiltonian drift.

    The rotated first cumulants only decay, so the estimate carries no
    error from the free oscillation.
    """
    def rotated(state, tt):
        return expM(params, -tt) @ state.to_vectors(params).s

    now = rotated(state_t, t)
    j = 0 if abs(now[0]) >= abs(now[1]) else 1
    if abs(now[j]) < MIN_DENOMINATOR:
        raise VanishingComponent(f"rotated first cumulants vanish at t={t:.6g}")
    ahead = rotated(state_next, t + cfg.delta_t)[j]
    if cfg.scheme == "centered":
        if state_prev is None:
            raise ValueError("the centered scheme needs the state at t - dt")
        behind = rotated(state_prev, t - cfg.delta_t)[j]
        return float(np.log(behind / ahead) / (2 * cfg.delta_t))
    return float(np.log(now[j] / ahead) / cfg.delta_t)


def dqq_expt_point(state_t, state_next, lam, params, cfg, state_prev=None) -> float:
    r = cumulant_rates(state_t, state_next, cfg, state_prev)
    return (lam - params.delta) * state_t.var_q - state_t.cov_qp / params.m + r[2] / 2


def dpp_expt_point(state_t, state_next, lam, params, cfg, state_prev=None) -> float:
    r = cumulant_rates(state_t, state_next, cfg, state_prev)
    m, w = params.m, params.omega
    return (lam + params.delta) * state_t.var_p + m * w**2 * state_t.cov_qp + r[3] / 2


def dqp_expt_point(state_t, state_next, lam, params, cfg, state_prev=None) -> float:
    r = cumulant_rates(state_t, state_next, cfg, state_prev)
    m, w = params.m, params.omega
    return (m * w**2 / 2 * state_t.var_q - state_t.var_p / (2 * m)
            + lam * state_t.cov_qp + r[4] / 2)


def diffusion_expt_point(state_t, state_next, lam, params, cfg, state_prev=None) -> DiffusionEstimate:
    """All three diffusion estimates plus the two forms of Delta = 2 m w Dqq / hbar."""
    dqq = dqq_expt_point(state_t, state_next, lam, params, cfg, state_prev)
    dpp = dpp_expt_point(state_t, state_next, lam, params, cfg, state_prev)
    dqp = dqp_expt_point(state_t, state_next, lam, params, cfg, state_prev)
    mw = params.m * params.omega
    return DiffusionEstimate(dqq, dpp, dqp, 2 * mw * dqq / HBAR, 2 * dpp / (HBAR * mw))


@dataclass(frozen=True)
class DifferentialEstimates:
    times: np.ndarray
    lambda_q: np.ndarray
    lambda_p: np.ndarray
    lambda_combined: np.ndarray
    dqq: np.ndarray
    dpp: np.ndarray
    dqp: np.ndarray
    delta_qform: np.ndarray
    delta_pform: np.ndarray
    lambda_rotating: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return (self.delta_qform + self.delta_pform) / 2

    def __len__(self):
        return len(self.times)

    def to_csv(self, path) -> None:
        names = [f.name for f in fields(self)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t" if n == "times" else n for n in names])
            cols = [getattr(self, n) for n in names]
            for row in zip(*cols):
                w.writerow([f"{v:.15g}" for v in row])


StateSource = Callable[[np.ndarray], Trajectory]


def required_times(times, cfg: FiniteDiffConfig) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    parts = [times, times + cfg.delta_t]
    if cfg.scheme == "centered":
        parts.append(times - cfg.delta_t)
    allt = np.concatenate(parts)
    return np.unique(allt[allt >= 0])


def reconstruct_differential(source: StateSource, times, params: HamiltonianParams,
                             cfg: FiniteDiffConfig, lambda_source: str = "moments"
                             ) -> DifferentialEstimates:
    """Pointwise estimates at each requested time.

    ``source`` maps an increasing array of times to a :class:`Trajectory`
    (oracle dynamics or simulated tomography). ``lambda_source`` selects
    which friction estimate enters the diffusion estimators: ``"moments"``
    (position/momentum incremental ratios) or ``"rotating"`` (incremental
    ratio of Lambda). Under the centered scheme, times closer than ``dt`` to
    the origin fall back to forward differences.
    """
    if lambda_source not in ("moments", "rotating"):
        raise ValueError(f"unknown lambda_source {lambda_source!r}")
    times = np.asarray(times, dtype=float)
    cols = {f.name: np.empty(len(times)) for f in fields(DifferentialEstimates) if f.name != "times"}
    if len(times) == 0:
        return DifferentialEstimates(times, **cols)
    needed = required_times(times, cfg)
    traj = source(needed)
    lookup = {float(t): i for i, t in enumerate(traj.times)}
    fwd = FiniteDiffConfig(cfg.delta_t, "forward")

    for k, t in enumerate(times):
        st = traj[lookup[float(t)]]
        nxt = traj[lookup[float(t + cfg.delta_t)]]
        prev = None
        c = cfg
        if cfg.scheme == "centered":
            tp = float(t - cfg.delta_t)
            if tp >= 0:
                prev = traj[lookup[tp]]
            else:
                c = fwd
        lam = lambda_expt_point(st, nxt, params, c, prev)
        lam_rot = lambda_rotating_point(st, nxt, float(t), params, c, prev)
        lam_used = lam.combined if lambda_source == "moments" else lam_rot
        dif = diffusion_expt_point(st, nxt, lam_used, params, c, prev)
        cols["lambda_q"][k] = lam.q
        cols["lambda_p"][k] = lam.p
        cols["lambda_combined"][k] = lam.combined
        cols["lambda_rotating"][k] = lam_rot
        cols["dqq"][k] = dif.dqq
        cols["dpp"][k] = dif.dpp
        cols["dqp"][k] = dif.dqp
        cols["delta_qform"][k] = dif.delta_qform
        cols["delta_pform"][k] = dif.delta_pform
    return DifferentialEstimates(times, **cols)
