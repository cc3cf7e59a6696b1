"""Symplectic tomograms of Gaussian states and their inversion to cumulants."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SR_BOUND, SR_TOL, GaussianState
from .errors import (
    DegenerateCovariance,
    InsufficientPoints,
    NonConcaveFit,
    NonPositiveLineVariance,
    NonPositiveValue,
    UncertaintyViolation,
)

_R2 = 1 / math.sqrt(2)


@dataclass(frozen=True)
class TomographyLine:
    mu: float
    nu: float

    def __post_init__(self):
        if self.mu == 0 and self.nu == 0:
            raise ValueError("(mu, nu) = (0, 0) does not define a line")

    def mean(self, state: GaussianState) -> float:
        return self.mu * state.mean_q + self.nu * state.mean_p

    def variance(self, state: GaussianState) -> float:
        return (self.mu**2 * state.var_q + self.nu**2 * state.var_p
                + 2 * self.mu * self.nu * state.cov_qp)


Q_LINE = TomographyLine(1.0, 0.0)
P_LINE = TomographyLine(0.0, 1.0)
DIAG_LINE = TomographyLine(_R2, _R2)


@dataclass(frozen=True)
class TomogramSample:
    line: TomographyLine
    x: float
    value: float
    sigma_noise: float = 0.0


@dataclass(frozen=True)
class MeasurementPlan:
    """X abscissae on the position, momentum and diagonal lines."""

    q: tuple = (-1.5, -0.5, 0.5, 1.5)
    p: tuple = (-1.5, -0.5, 0.5, 1.5)
    diag: tuple = (-0.5, 0.5)
    lines: tuple = field(default=(Q_LINE, P_LINE, DIAG_LINE), repr=False)

    @property
    def size(self) -> int:
        return len(self.q) + len(self.p) + len(self.diag)

    def items(self):
        return zip(self.lines, (self.q, self.p, self.diag))

    @classmethod
    def around(cls, state: GaussianState, offsets=(0.5, 1.5), diag_offsets=(0.5,)):
        """Points at mean +/- offset * std on each line, from a best-current-guess state."""

        def pts(line, offs):
            m, sd = line.mean(state), math.sqrt(line.variance(state))
            return tuple(sorted(m + sgn * o * sd for o in offs for sgn in (-1, 1)))

        return cls(pts(Q_LINE, offsets), pts(P_LINE, offsets), pts(DIAG_LINE, diag_offsets))

    @classmethod
    def pilot(cls, prior: GaussianState | None = None):
        """Coarse three-point plan at {-1, 0, 1}, optionally centred and scaled by a prior."""
        if prior is None:
            return cls((-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0), (0.0,))

        def pts(line, n):
            m, sd = line.mean(prior), math.sqrt(line.variance(prior))
            return tuple(m + k * sd for k in n)

        return cls(pts(Q_LINE, (-1, 0, 1)), pts(P_LINE, (-1, 0, 1)), pts(DIAG_LINE, (0,)))


def wigner_at(state: GaussianState, q, p):
    det = state.determinant
    if not det > 0:
        raise DegenerateCovariance(f"covariance determinant {det} is not positive")
    dq = np.asarray(q) - state.mean_q
    dp = np.asarray(p) - state.mean_p
    quad = (state.var_q * dp**2 + state.var_p * dq**2 - 2 * state.cov_qp * dq * dp) / (2 * det)
    return np.exp(-quad) / (2 * np.pi * np.sqrt(det))


def tomogram_at(state: GaussianState, line: TomographyLine, x):
    var = line.variance(state)
    if not var > 0:
        raise NonPositiveLineVariance(f"line ({line.mu}, {line.nu}) has variance {var}")
    d = np.asarray(x) - line.mean(state)
    return np.exp(-d**2 / (2 * var)) / np.sqrt(2 * np.pi * var)


def synthesize(state: GaussianState, plan: MeasurementPlan, noise_sigma: float = 0.0,
               seed=None) -> list[TomogramSample]:
    """Ideal tomogram values on the plan, plus i.i.d. Gaussian noise.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = []
    for line, xs in plan.items():
        ideal = tomogram_at(state, line, np.asarray(xs, dtype=float))
        noisy = ideal + rng.normal(0.0, noise_sigma, size=ideal.shape) if noise_sigma else ideal
        out.extend(TomogramSample(line, float(x), float(v), noise_sigma) for x, v in zip(xs, noisy))
    return out


def _group(samples):
    groups: dict[tuple, list] = {}
    for smp in samples:
        groups.setdefault((round(smp.line.mu, 12), round(smp.line.nu, 12)), []).append(smp)
    return groups


def _key(line):
    return round(line.mu, 12), round(line.nu, 12)


def fit_log_quadratic(xs, values) -> tuple[float, float]:
    """Mean and variance of a Gaussian through >= 3 (x, value) points.

    Fits ln(value) = a x^2 + b x + c; exact for three points, least squares
    beyond.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(np.unique(xs)) < 3:
        raise InsufficientPoints("need at least three distinct abscissae on a line")
    if np.any(values <= 0):
        raise NonPositiveValue("tomogram value <= 0; the log-quadratic fit is undefined")
    centre = xs.mean()
    scale = max(np.ptp(xs), 1e-300)
    u = (xs - centre) / scale
    A = np.column_stack([u**2, u, np.ones_like(u)])
    (a, b, _), *_ = np.linalg.lstsq(A, np.log(values), rcond=None)
    if a >= 0:
        raise NonConcaveFit("log-tomogram is not concave; noise too large for the plan")
    var_u = -1 / (2 * a)
    return centre + scale * (-b / (2 * a)), var_u * scale**2


def fit_known_mean_variance(xs, values, mean: float, guess: float) -> float:
    """Variance of a Gaussian with known mean from >= 1 points (Gauss-Newton on 1/var)."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if xs.size == 0:
        raise InsufficientPoints("no points on the line")
    if np.any(values <= 0):
        raise NonPositiveValue("tomogram value <= 0; the log fit is undefined")
    d2 = (xs - mean) ** 2
    y = np.log(values)
    u = 1 / guess
    for _ in range(100):
        r = 0.5 * np.log(u / (2 * np.pi)) - 0.5 * d2 * u - y
        j = 0.5 / u - 0.5 * d2
        jj = float(j @ j)
        if jj == 0:
            raise NonConcaveFit("degenerate abscissae for the variance fit")
        step = float(j @ r) / jj
        u_new = u - step
        if u_new <= 0:
            u_new = u / 2
        if abs(u_new - u) <= 1e-15 * abs(u):
            u = u_new
            break
        u = u_new
    return 1 / u


def tc_invert(samples) -> GaussianState:
    """Recover the five cumulants from tomogram points on the three canonical lines."""
    groups = _group(samples)
    try:
        qs, ps = groups[_key(Q_LINE)], groups[_key(P_LINE)]
    except KeyError as exc:
        raise InsufficientPoints("position and momentum lines are both required") from exc
    mq, vq = fit_log_quadratic([s.x for s in qs], [s.value for s in qs])
    mp, vp = fit_log_quadratic([s.x for s in ps], [s.value for s in ps])
    ds = groups.get(_key(DIAG_LINE))
    if not ds:
        raise InsufficientPoints("the diagonal line is needed for the covariance")
    md = (mq + mp) * _R2
    xs, vals = [s.x for s in ds], [s.value for s in ds]
    if len(set(xs)) >= 3:
        _, vd = fit_log_quadratic(xs, vals)
    else:
        vd = fit_known_mean_variance(xs, vals, md, guess=(vq + vp) / 2)
    cov = vd - (vq + vp) / 2
    state = GaussianState(mq, mp, vq, vp, cov)
    if state.determinant < SR_BOUND - SR_TOL:
        warnings.warn(
            f"reconstructed cumulants violate the uncertainty bound (det={state.determinant:.6g})",
            UncertaintyViolation,
            stacklevel=2,
        )
    return state


def measure_state(state: GaussianState, noise_sigma: float, rng, prior: GaussianState | None = None,
                  refine: bool = True) -> GaussianState:
    """Simulated T-C measurement: pilot plan, then a refined plan around the pilot estimate."""
    pilot = tc_invert(synthesize(state, MeasurementPlan.pilot(prior), noise_sigma, rng))
    if not refine:
        return pilot
    return tc_invert(synthesize(state, MeasurementPlan.around(pilot), noise_sigma, rng))


def samples_to_csv(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu", "nu", "x", "value", "sigma_noise"])
        for s in samples:
            w.writerow([f"{s.line.mu:.15g}", f"{s.line.nu:.15g}", f"{s.x:.15g}",
                        f"{s.value:.15g}", f"{s.sigma_noise:.15g}"])


def samples_from_csv(path) -> list[TomogramSample]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(TomogramSample(TomographyLine(float(row["mu"]), float(row["nu"])),
                                      float(row["x"]), float(row["value"]),
                                      float(row["sigma_noise"])))
    return out
