"""Uniform (Shannon) and additive random sampling.

Covers the truncated sinc series on uniform samples, effective bandwidths
from a spectrum and a relative threshold, restriction of a function to a
finite support with a trusted sub-window, and additive random sampling
plans with a numerical alias-free test on the spacing's characteristic
function.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptySpectrum, GridTooCoarse, NoBandwidth, UnknownCharacteristicFunction

MIN_DISCRETE_POINTS = 4096


@dataclass(frozen=True)
class SampledFunction:
    times: np.ndarray
    values: np.ndarray
    support: tuple[float, float]
    trusted: tuple[float, float]
    bandwidth_w: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        lo, hi = self.support
        if t.size and (t[0] < lo or t[-1] > hi):
            raise ValueError("sample times fall outside the support")
        if not (lo <= self.trusted[0] <= self.trusted[1] <= hi):
            raise ValueError("trusted window must lie inside the support")
        if self.bandwidth_w is not None and t.size > 1:
            spacing = 1 / (2 * self.bandwidth_w)
            idx = np.rint(t / spacing)
            if np.max(np.abs(t - idx * spacing)) > 1e-12 * max(1.0, t[-1]):
                raise ValueError("samples are not on the 1/(2W) grid")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value", "in_trusted"])
            for t, v in zip(self.times, self.values):
                inside = int(self.trusted[0] <= t <= self.trusted[1])
                w.writerow([f"{t:.15g}", f"{v:.15g}", inside])


@dataclass(frozen=True)
class SpectrumEstimate:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    source: str = "analytic"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "magnitude"])
            for s, m in zip(self.frequencies, self.magnitudes):
                w.writerow([f"{s:.15g}", f"{m:.15g}"])


def shannon_reconstruct(f: SampledFunction, t):
    """Truncated sinc series sum_n f(n/2W) sinc(2W t - n) over the stored samples.

    Samples missing from the grid count as zero, which is the zero extension
    outside the support. At a stored sample time the stored value is returned
    as is.
    """
    if f.bandwidth_w is None:
        raise NoBandwidth("the sampled function carries no bandwidth")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    times = np.asarray(f.times, dtype=float)
    values = np.asarray(f.values, dtype=float)
    spacing = 1 / (2 * f.bandwidth_w)
    n = np.rint(times / spacing)
    out = np.empty(t.shape)
    # chunk the evaluation grid to bound memory
    for lo in range(0, t.size, 512):
        tt = t[lo:lo + 512]
        arg = tt[:, None] / spacing - n[None, :]
        out[lo:lo + 512] = np.sinc(arg) @ values
    hit = np.searchsorted(times, t)
    ok = hit < times.size
    exact = np.zeros(t.shape, dtype=bool)
    exact[ok] = times[hit[ok]] == t[ok]
    out[exact] = values[hit[exact]]
    return out


def effective_bandwidth(spec: SpectrumEstimate, threshold_rel: float,
                        criterion: str = "peak") -> float:
    """Effective bandwidth W in cycles per unit time, W = s_max / (2 pi).

    ``criterion="peak"``: s_max is the largest |s| where |F(s)| is at least
    ``threshold_rel`` times the peak magnitude. ``criterion="integral"``:
    s_max is the smallest half-width whose symmetric interval holds at least
    ``1 - threshold_rel`` of the spectral energy on the grid.
    """
    if not 0 < threshold_rel < 1:
        raise ValueError("threshold_rel must lie in (0, 1)")
    s = np.asarray(spec.frequencies, dtype=float)
    mag = np.asarray(spec.magnitudes, dtype=float)
    if s.size == 0 or not np.any(mag > 0):
        raise EmptySpectrum("spectrum is empty or identically zero")
    a = np.abs(s)
    if criterion == "peak":
        above = mag >= threshold_rel * mag.max()
        return float(a[above].max() / (2 * np.pi))
    if criterion == "integral":
        order = np.argsort(a)
        a_sorted = a[order]
        energy = mag[order] ** 2
        # trapezoid-like weights on the possibly non-uniform |s| ordering
        w = np.gradient(np.sort(s))[order] if s.size > 1 else np.ones(1)
        cum = np.cumsum(energy * np.abs(w))
        k = np.searchsorted(cum, (1 - threshold_rel) * cum[-1])
        return float(a_sorted[min(k, a_sorted.size - 1)] / (2 * np.pi))
    raise ValueError(f"unknown bandwidth criterion {criterion!r}")


def analytic_spectrum(transform: Callable, s_max: float, step: float) -> SpectrumEstimate:
    """Magnitudes of a closed-form transform on a symmetric grid [-s_max, s_max]."""
    n = int(math.ceil(s_max / step))
    s = np.arange(-n, n + 1) * step
    return SpectrumEstimate(s, np.abs(transform(s)), "analytic")


def bandwidth_of_transform(transform: Callable, tbar: float, threshold_rel: float,
                           criterion: str = "peak", s_start: float | None = None,
                           max_doublings: int = 30) -> tuple[float, SpectrumEstimate]:
    """Effective bandwidth of a closed-form transform of a [0, tbar]-supported function.

    The scanned range is doubled until the upper half of the grid lies
    entirely below the threshold. The grid step resolves the 2 pi / tbar
    oscillation period of the spectrum.
    """
    step = math.pi / (16 * tbar)
    s_max = s_start or 64 * math.pi / tbar
    peak = float(np.abs(transform(np.array([0.0])))[0])
    for _ in range(max_doublings):
        spec = analytic_spectrum(transform, s_max, step)
        peak = max(peak, spec.magnitudes.max())
        tail = spec.magnitudes[np.abs(spec.frequencies) > s_max / 2]
        if criterion == "integral" or tail.max() < threshold_rel * peak:
            if criterion == "integral":
                # energy outside the grid must be negligible against the threshold
                inner = spec.magnitudes[np.abs(spec.frequencies) <= s_max / 2]
                if (tail**2).sum() > 1e-3 * threshold_rel * (inner**2).sum():
                    s_max *= 2
                    continue
            return effective_bandwidth(spec, threshold_rel, criterion), spec
        s_max *= 2
    raise EmptySpectrum("spectrum did not fall below the threshold within the scanned range")


def uniform_plan(w: float, support_length: float) -> np.ndarray:
    """Reconstruction points n/(2W), n = 1 .. floor(2 W L).

    The origin is not counted: it is the preparation time, whose sample is
    added separately by the caller.
    """
    if not w > 0 or not support_length > 0:
        raise ValueError("W and the support length must be positive")
    spacing = 1 / (2 * w)
    count = int(math.floor(2 * w * support_length * (1 + 1e-14)))
    return np.arange(1, count + 1) * spacing


def point_count(w: float, support_length: float) -> int:
    return len(uniform_plan(w, support_length))


@dataclass(frozen=True)
class TrustedWindow:
    tbar: float
    xi: float
    gibbs_exposed: bool = False

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.tbar)

    @property
    def trusted(self) -> tuple[float, float]:
        return (0.0, self.tbar - self.xi)

    def indicator(self, t):
        t = np.asarray(t, dtype=float)
        return ((t >= 0) & (t <= self.tbar)).astype(float)

    def restrict(self, func: Callable) -> Callable:
        def restricted(t):
            t = np.asarray(t, dtype=float)
            return np.where((t >= 0) & (t <= self.tbar), func(np.clip(t, 0, self.tbar)), 0.0)

        return restricted

    def trusted_grid(self, n: int = 2001) -> np.ndarray:
        return np.linspace(*self.trusted, n)


def restrict_and_window(tbar: float, xi: float, min_fraction: float = 0.01) -> TrustedWindow:
    """Support [0, tbar] with trusted window [0, tbar - xi].

    A margin below ``min_fraction * tbar`` is accepted but flagged, since the
    Gibbs overshoot at the cut then reaches into the trusted region.
    """
    if not tbar > 0 or not xi > 0 or not xi < tbar:
        raise ValueError("need tbar > xi > 0")
    exposed = xi < min_fraction * tbar
    if exposed:
        warnings.warn(f"trusted margin xi={xi} is small; Gibbs overshoot enters the window",
                      stacklevel=2)
    return TrustedWindow(tbar, xi, exposed)


def discrete_spectrum(values, times, pad_factor: int = 4) -> SpectrumEstimate:
    """Trapezoid-rule transform of a function sampled on a dense uniform grid over its support."""
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.size < MIN_DISCRETE_POINTS:
        raise GridTooCoarse(f"need at least {MIN_DISCRETE_POINTS} points, got {values.size}")
    dt = np.diff(times)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise GridTooCoarse("grid must be uniform")
    h = dt[0]
    w = np.ones_like(values)
    w[0] = w[-1] = 0.5
    n_pad = pad_factor * values.size
    # exp(+i s t) convention; magnitudes do not depend on the sign choice
    coeffs = np.fft.ifft(values * w, n=n_pad) * n_pad * h * np.exp(0j)
    s = 2 * np.pi * np.fft.fftfreq(n_pad, d=h)
    coeffs = coeffs * np.exp(1j * s * times[0])
    s = np.fft.fftshift(s)
    mags = np.abs(np.fft.fftshift(coeffs))
    return SpectrumEstimate(s, mags, "discrete")


@dataclass(frozen=True)
class SpacingDistribution:
    family: str
    mean: float
    shape: float = 1.0

    def __post_init__(self):
        if self.family not in ("exponential", "gamma", "delta"):
            raise UnknownCharacteristicFunction(f"unsupported spacing family {self.family!r}")
        if not self.mean > 0:
            raise ValueError("mean spacing must be positive")
        if self.family == "gamma" and not self.shape > 0:
            raise ValueError("gamma shape must be positive")

    def characteristic(self, omega):
        omega = np.asarray(omega, dtype=float)
        h = self.mean
        if self.family == "exponential":
            return 1 / (1 - 1j * omega * h)
        if self.family == "gamma":
            return (1 - 1j * omega * h / self.shape) ** (-self.shape)
        return np.exp(1j * omega * h)

    def draw(self, rng, n: int) -> np.ndarray:
        if self.family == "exponential":
            return rng.exponential(self.mean, n)
        if self.family == "gamma":
            return rng.gamma(self.shape, self.mean / self.shape, n)
        return np.full(n, self.mean)


@dataclass(frozen=True)
class RandomSamplingPlan:
    dist: SpacingDistribution
    times: np.ndarray

    @property
    def count(self) -> int:
        return len(self.times)


def random_plan(dist: SpacingDistribution, n: int, seed=None) -> RandomSamplingPlan:
    """Times t_0 = 0, t_k = t_{k-1} + gamma_k for k < n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if dist.family == "delta":
        return RandomSamplingPlan(dist, np.arange(n) * dist.mean)
    rng = np.random.default_rng(seed)
    gaps = dist.draw(rng, n - 1)
    return RandomSamplingPlan(dist, np.concatenate([[0.0], np.cumsum(gaps)]))


@dataclass(frozen=True)
class AliasVerdict:
    alias_free: bool
    collision: tuple[float, float] | None
    omega_max: float
    grid_points: int

    def describe(self) -> str:
        if self.alias_free:
            return (f"alias-free: characteristic function injective on "
                    f"[-{self.omega_max:.6g}, {self.omega_max:.6g}] ({self.grid_points} points)")
        a, b = self.collision
        return f"aliasing: phi({a:.6g}) = phi({b:.6g})"


def alias_free_check(dist: SpacingDistribution, n_grid: int = 200_001,
                     omega_max: float | None = None) -> AliasVerdict:
    """Numerical injectivity scan of the spacing's characteristic function.

    Two grid points that are not neighbours along the curve but lie closer
    in value than the curve's own local sampling step mark a collision.
    """
    omega_max = omega_max or 100.0 / dist.mean
    om = np.linspace(-omega_max, omega_max, n_grid)
    phi = dist.characteristic(om)
    pts = np.column_stack([phi.real, phi.imag])
    seg = np.abs(np.diff(phi))
    local = np.empty(n_grid)
    local[0], local[-1] = seg[0], seg[-1]
    local[1:-1] = np.minimum(seg[:-1], seg[1:])
    tree = cKDTree(pts)
    dist_k, idx_k = tree.query(pts, k=6)
    far = np.abs(idx_k - np.arange(n_grid)[:, None]) > 2
    close = dist_k < 0.75 * local[:, None]
    hits = np.argwhere(far & close)
    if hits.size:
        i, col = hits[0]
        j = idx_k[i, col]
        return AliasVerdict(False, (float(om[i]), float(om[j])), omega_max, n_grid)
    return AliasVerdict(True, None, omega_max, n_grid)
