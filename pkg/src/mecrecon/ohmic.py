"""Weak-coupling, high-temperature Ohmic quantum Brownian motion benchmark.

Every benchmark function has the shape ``c0 + c1*t + Re(A exp(z t))`` with
``z = -omega_c + i*omega``, which gives both the time-domain values and the
closed-form Fourier transforms of their restriction to ``[0, tbar]``.
Fourier convention: ``F[g](s) = int g(t) exp(i s t) dt``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import HBAR, HamiltonianParams, MecSet

K_B = 1.0


@dataclass(frozen=True)
class OhmicParams:
    alpha: float = 0.1
    omega_c: float = 10.0
    temperature: float = 10.0
    omega: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError("omega_c must be positive")
        if not self.omega > 0 or not self.m > 0:
            raise ValueError("omega and m must be positive")
        if self.alpha > 0.3:
            warnings.warn(f"alpha={self.alpha} is outside the weak-coupling regime", stacklevel=2)
        if self.temperature < 2 * HBAR * self.omega / K_B:
            warnings.warn(f"T={self.temperature} is too low for the high-temperature form",
                          stacklevel=2)

    def hamiltonian(self) -> HamiltonianParams:
        return HamiltonianParams(m=self.m, omega=self.omega, delta=0.0)

    def replace(self, **kw) -> "OhmicParams":
        d = dict(alpha=self.alpha, omega_c=self.omega_c, temperature=self.temperature,
                 omega=self.omega, m=self.m)
        d.update(kw)
        return OhmicParams(**d)


PRESETS = {
    "markovian": OhmicParams(alpha=0.1, omega_c=10.0, temperature=10.0),
    "non-markovian": OhmicParams(alpha=0.1, omega_c=0.1, temperature=10.0),
}


def stationary_values(p: OhmicParams) -> tuple[float, float]:
    """Long-time limits (lambda_inf, Delta_inf)."""
    wc2, w2 = p.omega_c**2, p.omega**2
    lam_inf = p.alpha**2 * wc2 * p.omega / (wc2 + w2)
    delta_inf = 2 * p.alpha**2 * wc2 / (wc2 + w2) * K_B * p.temperature / HBAR
    return lam_inf, delta_inf


@dataclass(frozen=True)
class _ExpForm:
    """g(t) = c0 + c1 t + Re(A exp(z t))."""

    c0: float
    c1: float
    amp: complex
    z: complex

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.c0 + self.c1 * t + np.real(self.amp * np.exp(self.z * t))

    def fourier(self, s, tbar: float):
        """Transform of the restriction of g to [0, tbar]."""
        s = np.asarray(s, dtype=float)
        u = 1j * s * tbar
        out = self.c0 * tbar * _phi1(u) + self.c1 * tbar**2 * _psi(u)
        out = out + 0.5 * self.amp * tbar * _phi1((self.z + 1j * s) * tbar)
        out = out + 0.5 * np.conj(self.amp) * tbar * _phi1((np.conj(self.z) + 1j * s) * tbar)
        return out


def _phi1(x):
    """(exp(x) - 1)/x, equal to 1 at x = 0."""
    x = np.asarray(x, dtype=complex)
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 1.0 + 0j, np.expm1(x) / safe)


_PSI_TERMS = np.array([1.0 / (math.factorial(k) * (k + 2)) for k in range(24)])


def _psi(x):
    """int_0^1 tau exp(x tau) d tau = (exp(x)(x - 1) + 1)/x**2.

    The closed form cancels badly near x = 0; a power series is used inside
    |x| < 0.5.
    """
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.5
    series = np.polynomial.polynomial.polyval(x, _PSI_TERMS)
    safe = np.where(small, 1.0, x)
    closed = (np.expm1(safe) * (safe - 1) + safe) / safe**2
    return np.where(small, series, closed)


def _z(p: OhmicParams) -> complex:
    return complex(-p.omega_c, p.omega)


def _lambda_form(p: OhmicParams) -> _ExpForm:
    lam_inf, _ = stationary_values(p)
    return _ExpForm(lam_inf, 0.0, -lam_inf * complex(1.0, -p.omega_c / p.omega), _z(p))


def _delta_form(p: OhmicParams) -> _ExpForm:
    _, d_inf = stationary_values(p)
    return _ExpForm(d_inf, 0.0, -d_inf * complex(1.0, p.omega / p.omega_c), _z(p))


def _capital_lambda_form(p: OhmicParams) -> _ExpForm:
    wc, w = p.omega_c, p.omega
    k = p.alpha**2 * wc**2 * w**2 / (wc**2 + w**2) ** 2
    amp = k * complex(2 * wc / w, -(wc**2 - w**2) / w**2)
    return _ExpForm(-2 * k * wc / w, k * (wc**2 + w**2) / w, amp, _z(p))


def lambda_theor(p: OhmicParams, t):
    return _lambda_form(p)(t)


def delta_theor(p: OhmicParams, t):
    return _delta_form(p)(t)


def capital_lambda_theor(p: OhmicParams, t):
    """Antiderivative of :func:`lambda_theor` vanishing at t = 0."""
    return _capital_lambda_form(p)(t)


def fourier_capital_lambda(p: OhmicParams, tbar: float, s):
    return _capital_lambda_form(p).fourier(s, tbar)


def fourier_lambda_small(p: OhmicParams, tbar: float, s):
    return _lambda_form(p).fourier(s, tbar)


def fourier_delta(p: OhmicParams, tbar: float, s):
    return _delta_form(p).fourier(s, tbar)


def mec_set(p: OhmicParams) -> MecSet:
    """Coefficients with m w Dqq/hbar = Dpp/(hbar m w) = Delta/2 and Dqp = 0."""
    mw = p.m * p.omega
    lam = _lambda_form(p)
    dl = _delta_form(p)
    return MecSet(
        lam=lam,
        dqq=lambda t: HBAR * dl(t) / (2 * mw),
        dpp=lambda t: HBAR * mw * dl(t) / 2,
        dqp=lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0,
    )


# name -> (time function, fourier transform of its restriction)
CURVES = {
    "capital_lambda": (capital_lambda_theor, fourier_capital_lambda),
    "lambda": (lambda_theor, fourier_lambda_small),
    "delta": (delta_theor, fourier_delta),
}
