"""Integral reconstruction: Lambda(t) from first cumulants, D(t) from second ones.

The first cumulants in the frame co-rotating with the Hamiltonian drift,
``S~(t) = exp(-tM) S(t)``, decay as ``exp(-Lambda(t)) S~(0)``. The second
cumulants in the analogous frame, ``X~(t) = exp(2 Lambda) exp(-tR) X(t)``,
grow by the accumulated transformed diffusion.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dynamics import HBAR, HamiltonianParams, Trajectory, expM, expR
from .errors import InconsistentComponents, VanishingComponent

USABLE_COMPONENT = 1e-6
VANISHING_COMPONENT = 1e-12


@dataclass(frozen=True)
class LambdaIntegralSeries:
    times: np.ndarray
    values: np.ndarray
    component_used: np.ndarray
    discrepancy: np.ndarray  # |Lambda_1 - Lambda_2| where both usable, else nan


@dataclass(frozen=True)
class DiffusionIntegralRecord:
    times: np.ndarray
    rhs: np.ndarray
    xtilde: np.ndarray
    dtilde: np.ndarray


@dataclass(frozen=True)
class DiffusionSeries:
    times: np.ndarray
    dqq: np.ndarray
    dpp: np.ndarray
    dqp: np.ndarray

    @property
    def vector(self):
        return np.column_stack([self.dqq, self.dpp, self.dqp])


def s_tilde(s_t, params: HamiltonianParams, t: float) -> np.ndarray:
    return expM(params, -t) @ np.asarray(s_t, dtype=float)


def lambda_capital_expt(states: Trajectory, params: HamiltonianParams,
                        consistency_tol: float | None = 1e-6) -> LambdaIntegralSeries:
    """Lambda(t_i) = ln(S~_j(0)/S~_j(t_i)) on the trajectory grid (t_0 must be 0).

    Per time the component with the larger |S~_j(t)| is used. When both are
    usable their estimates are compared; a gap above ``consistency_tol``
    means the data do not follow a GSP model with the given Hamiltonian.
    ``consistency_tol=None`` records the gap without raising.
    """
    times = np.asarray(states.times, dtype=float)
    if times[0] != 0:
        raise ValueError("the series must start at t = 0")
    s = states.s_vectors(params)
    st = np.array([s_tilde(v, params, t) for v, t in zip(s, times)])
    s0 = st[0]
    values = np.empty(len(times))
    used = np.empty(len(times), dtype=int)
    gap = np.full(len(times), np.nan)
    for i, row in enumerate(st):
        ok0 = np.abs(s0) > VANISHING_COMPONENT
        mag = np.where(ok0, np.abs(row), -1.0)
        if np.all(mag < VANISHING_COMPONENT):
            raise VanishingComponent(f"both rotated first cumulants vanish at t={times[i]:.6g}")
        # ties go to the first component
        j = 0 if mag[0] >= mag[1] else 1
        ratio = s0[j] / row[j]
        if ratio <= 0:
            raise InconsistentComponents(
                f"rotated component {j + 1} changed sign at t={times[i]:.6g}")
        values[i] = np.log(ratio)
        used[i] = j + 1
        both = (np.abs(s0) > USABLE_COMPONENT) & (np.abs(row) > USABLE_COMPONENT)
        if both.all():
            r = s0 / row
            if np.all(r > 0):
                gap[i] = abs(np.log(r[0]) - np.log(r[1]))
            else:
                gap[i] = np.inf
            if consistency_tol is not None and gap[i] > consistency_tol:
                raise InconsistentComponents(
                    f"components disagree by {gap[i]:.3g} at t={times[i]:.6g}")
    values[0] = 0.0
    return LambdaIntegralSeries(times, values, used, gap)


def diffusion_rhs(states: Trajectory, lambda_series: LambdaIntegralSeries,
                  params: HamiltonianParams) -> DiffusionIntegralRecord:
    times = np.asarray(states.times, dtype=float)
    if not np.array_equal(times, lambda_series.times):
        raise ValueError("Lambda series and states must share a grid")
    x = states.x_vectors(params)
    x0 = x[0]
    big_l = lambda_series.values
    rhs = np.array([xi - np.exp(-2 * bl) * (expR(params, t) @ x0)
                    for xi, t, bl in zip(x, times, big_l)])
    xt = np.array([np.exp(2 * bl) * (expR(params, -t) @ xi) for xi, t, bl in zip(x, times, big_l)])
    if len(times) >= 3:
        dt = np.gradient(xt, times, axis=0, edge_order=2)
    elif len(times) == 2:
        dt = np.repeat(((xt[1] - xt[0]) / (times[1] - times[0]))[None, :], 2, axis=0)
    else:
        dt = np.full_like(xt, np.nan)
    return DiffusionIntegralRecord(times, rhs, xt, dt)


def recover_diffusion(record: DiffusionIntegralRecord, lambda_series: LambdaIntegralSeries,
                      params: HamiltonianParams) -> DiffusionSeries:
    d = np.array([np.exp(-2 * bl) * (expR(params, t) @ dt)
                  for t, bl, dt in zip(record.times, lambda_series.values, record.dtilde)])
    mw = params.m * params.omega
    return DiffusionSeries(
        record.times,
        dqq=HBAR * d[:, 0] / (2 * mw),
        dpp=HBAR * mw * d[:, 1] / 2,
        dqp=HBAR * d[:, 2] / 2,
    )


def series_to_csv(lambda_series: LambdaIntegralSeries, record: DiffusionIntegralRecord, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "lambda_capital", "rhs_1", "rhs_2", "rhs_3",
                    "dtilde_1", "dtilde_2", "dtilde_3"])
        for i, t in enumerate(record.times):
            row = [t, lambda_series.values[i], *record.rhs[i], *record.dtilde[i]]
            w.writerow([f"{v:.15g}" for v in row])
