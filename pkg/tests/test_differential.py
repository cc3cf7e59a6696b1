import math

import numpy as np
import pytest

from mecrecon import ohmic
from mecrecon.differential import (
    DifferentialEstimates,
    FiniteDiffConfig,
    diffusion_expt_point,
    lambda_expt_point,
    reconstruct_differential,
    required_times,
)
from mecrecon.dynamics import GaussianState, HamiltonianParams, MecSet, evolve_cumulants
from mecrecon.errors import BothDenominatorsVanish
from mecrecon.harness import oracle_source

pytestmark = pytest.mark.filterwarnings("ignore::mecrecon.errors.UncertaintyViolation")

P0 = HamiltonianParams(1, 1, 0)
MARK = ohmic.PRESETS["markovian"]
NONM = ohmic.PRESETS["non-markovian"]
PROBE = GaussianState(3.0, 2.0, 0.5, 0.5, 0.0)
SQUEEZED = GaussianState(3.0, 2.0, 0.3, 1.2, 0.1)


def ode_source(mecs, params, init):
    return lambda times: evolve_cumulants(init, mecs, params, np.concatenate([[0.0], times])
                                          if times[0] != 0 else times)


def _pair(mecs, init, t, dt, params=P0):
    tr = evolve_cumulants(init, mecs, params, [0.0, t, t + dt])
    return tr[1], tr[2]


def test_config_validation():
    with pytest.raises(ValueError):
        FiniteDiffConfig(0.0)
    with pytest.raises(ValueError):
        FiniteDiffConfig(1e-3, "backward")


def test_lambda_free_oscillation_is_order_dt():
    cfg = FiniteDiffConfig(1e-3)
    a, b = _pair(MecSet.zero(), GaussianState(1.0, 0.5, 0.5, 0.5, 0.0), 0.7, cfg.delta_t)
    est = lambda_expt_point(a, b, P0, cfg)
    assert abs(est.combined) <= 2 * cfg.delta_t


def test_lambda_constant():
    cfg = FiniteDiffConfig(1e-3)
    a, b = _pair(MecSet.constant(lam=0.1), GaussianState(1.0, 0.5, 0.5, 0.5, 0.0), 2.0,
                 cfg.delta_t)
    est = lambda_expt_point(a, b, P0, cfg)
    assert abs(est.combined - 0.1) <= 1e-3
    assert abs(est.q - est.p) <= 5 * cfg.delta_t


def test_lambda_denominators():
    cfg = FiniteDiffConfig(1e-3)
    zero = GaussianState(0.0, 0.0, 0.5, 0.5, 0.0)
    with pytest.raises(BothDenominatorsVanish):
        lambda_expt_point(zero, zero, P0, cfg)
    # only the momentum variant is defined
    a, b = _pair(MecSet.constant(lam=0.1), GaussianState(0.0, 1.0, 0.5, 0.5, 0.0), 0.0 + 1e-12,
                 cfg.delta_t)
    a = GaussianState(0.0, a.mean_p, a.var_q, a.var_p, a.cov_qp)
    est = lambda_expt_point(a, b, P0, cfg)
    assert math.isnan(est.q) and est.combined == est.p


def test_combined_weights_favour_larger_moment():
    cfg = FiniteDiffConfig(1e-3)
    a = GaussianState(1.0, 0.01, 0.5, 0.5, 0.0)
    b = GaussianState(1.0 - 1e-4, 0.01 - 1e-3, 0.5, 0.5, 0.0)
    est = lambda_expt_point(a, b, P0, cfg)
    wq, wp = 1.0, 1e-4
    assert est.combined == pytest.approx((wq * est.q + wp * est.p) / (wq + wp), rel=1e-12)


def test_squared_moment_reading_rejected_by_forward_model():
    # the increments of <q>^2 do not invert the first-moment equation
    cfg = FiniteDiffConfig(1e-5)
    a, b = _pair(MecSet.constant(lam=0.1), GaussianState(1.0, 0.5, 0.5, 0.5, 0.0), 1.0,
                 cfg.delta_t)
    lin = 0.0 + (a.mean_p - (b.mean_q - a.mean_q) / cfg.delta_t) / a.mean_q
    sq = 0.0 + (a.mean_p - (b.mean_q**2 - a.mean_q**2) / cfg.delta_t) / a.mean_q
    assert abs(lin - 0.1) < 1e-4
    assert abs(sq - 0.1) > 1e-2


def test_zero_coefficients_give_zero_diffusion():
    cfg = FiniteDiffConfig(1e-4)
    a, b = _pair(MecSet.zero(), GaussianState(1.0, 0.5, 0.5, 0.5, 0.0), 1.3, cfg.delta_t)
    d = diffusion_expt_point(a, b, 0.0, P0, cfg)
    assert max(abs(d.dqq), abs(d.dpp), abs(d.dqp)) <= 10 * cfg.delta_t


def test_stationary_delta_markovian():
    cfg = FiniteDiffConfig(1e-3 / MARK.omega_c)
    src = oracle_source(MARK, PROBE)
    est = reconstruct_differential(src, np.array([10 / MARK.omega_c]), MARK.hamiltonian(), cfg,
                                   "rotating")
    assert est.delta[0] == pytest.approx(0.1980, abs=2e-4)
    assert est.lambda_rotating[0] == pytest.approx(0.009901, abs=2e-5)


def test_q_and_p_forms_agree_on_squeezed_probe():
    src = oracle_source(MARK, SQUEEZED)
    t = np.array([1 / MARK.omega_c, 4 / MARK.omega_c])
    gaps = []
    for k in (1e-3, 5e-4):
        est = reconstruct_differential(src, t, MARK.hamiltonian(), FiniteDiffConfig(k), "rotating")
        gaps.append(np.max(np.abs(est.delta_qform - est.delta_pform)))
    assert gaps[0] > 0 and gaps[1] < 0.6 * gaps[0]
    assert gaps[0] <= 0.05


def test_benchmark_lambda_at_one_over_omega_c():
    cfg = FiniteDiffConfig(1e-3 / MARK.omega_c)
    src = oracle_source(MARK, PROBE)
    t = np.array([1 / MARK.omega_c])
    est = reconstruct_differential(src, t, MARK.hamiltonian(), cfg)
    # O(dt) bias w^2 dt / 2 of the moment-based estimator, plus nothing else
    assert abs(est.lambda_combined[0] - ohmic.lambda_theor(MARK, t[0])) <= cfg.delta_t


def test_seven_point_plan_markovian():
    cfg = FiniteDiffConfig(1e-3 / MARK.omega_c)
    plan = np.arange(7) / (2 * 19.4 / (2 * math.pi))
    est = reconstruct_differential(oracle_source(MARK, PROBE), plan, MARK.hamiltonian(), cfg)
    assert np.max(np.abs(est.lambda_combined - ohmic.lambda_theor(MARK, plan))) <= 2e-3


def test_empty_plan():
    est = reconstruct_differential(oracle_source(MARK, PROBE), np.array([]), MARK.hamiltonian(),
                                   FiniteDiffConfig())
    assert len(est) == 0


def test_required_times_and_centered_fallback():
    cfg = FiniteDiffConfig(0.1, "centered")
    np.testing.assert_allclose(required_times([0.0, 0.5], cfg), [0.0, 0.1, 0.4, 0.5, 0.6])
    est = reconstruct_differential(oracle_source(MARK, PROBE), np.array([0.0, 0.5]),
                                   MARK.hamiltonian(), FiniteDiffConfig(1e-3, "centered"))
    assert np.all(np.isfinite(est.delta))


def _errors(p, scheme, ks, t):
    src = oracle_source(p, PROBE)
    rows = []
    for k in ks:
        cfg = FiniteDiffConfig(k / p.omega_c, scheme)
        e = reconstruct_differential(src, t, p.hamiltonian(), cfg, "rotating")
        rows.append([np.max(np.abs(e.lambda_combined - ohmic.lambda_theor(p, t))),
                     np.max(np.abs(e.lambda_rotating - ohmic.lambda_theor(p, t))),
                     np.max(np.abs(e.delta - ohmic.delta_theor(p, t)))])
    return np.array(rows)


@pytest.mark.parametrize("p", [MARK, NONM], ids=["markovian", "non-markovian"])
def test_forward_order_one(p):
    t = np.array([1 / p.omega_c, 3 / p.omega_c])
    errs = _errors(p, "forward", (1e-2, 5e-3, 2.5e-3), t)
    ratios = errs[:-1] / errs[1:]
    assert np.all(np.abs(ratios - 2) <= 0.4)


@pytest.mark.parametrize("p", [MARK, NONM], ids=["markovian", "non-markovian"])
def test_centered_order_two(p):
    t = np.array([1 / p.omega_c, 3 / p.omega_c])
    errs = _errors(p, "centered", (1e-2, 5e-3, 2.5e-3), t)
    assert np.all(np.log2(errs[:-1] / errs[1:]) >= 1.9)


def test_richardson_limit():
    t = np.array([2 / MARK.omega_c])
    src = oracle_source(MARK, PROBE)
    vals = []
    for k in (2e-3, 1e-3):
        e = reconstruct_differential(src, t, MARK.hamiltonian(), FiniteDiffConfig(k / MARK.omega_c),
                                     "rotating")
        vals.append(np.array([e.lambda_combined[0], e.delta[0]]))
    extrap = 2 * vals[1] - vals[0]
    truth = [ohmic.lambda_theor(MARK, t[0]), ohmic.delta_theor(MARK, t[0])]
    assert np.max(np.abs(extrap - truth)) <= 1e-6


def test_csv_columns(tmp_path):
    est = reconstruct_differential(oracle_source(MARK, PROBE), np.array([0.0, 0.1]),
                                   MARK.hamiltonian(), FiniteDiffConfig(1e-4))
    assert isinstance(est, DifferentialEstimates)
    path = tmp_path / "d.csv"
    est.to_csv(path)
    head = path.read_text().splitlines()[0].split(",")
    assert head[:9] == ["t", "lambda_q", "lambda_p", "lambda_combined", "dqq", "dpp", "dqp",
                        "delta_qform", "delta_pform"]
