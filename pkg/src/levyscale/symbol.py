"""Characteristic exponent of the truncated isotropic Levy measure.

The measure is ``nu(dh) = ell(|h|)/|h|^d 1{|h| < 1} dh`` and, after
averaging over spheres,

    psi(xi) = sigma_{d-1} int_0^1 (1 - omega_d(|xi| s)) ell(s)/s ds,

with ``omega_d`` the spherical average of ``cos``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, QuadratureError
from .scale import ScaleCalculus, sphere_area


def radial_average(d: int, t):
    """Average of ``cos(t w_1)`` over the unit sphere of R^d.

    ``cos t`` for d=1, ``J_0(t)`` for d=2 and ``sin(t)/t`` for d=3.
    """
    t = np.asarray(t, dtype=float)
    if d == 1:
        out = np.cos(t)
    elif d == 2:
        out = special.j0(t)
    elif d == 3:
        out = np.sinc(t / math.pi)
    else:
        raise DomainError(f"dimension must be 1, 2 or 3, got {d}")
    return float(out) if out.ndim == 0 else out


def one_minus_average(d: int, t):
    """``1 - radial_average(d, t)`` without cancellation at small ``t``."""
    t = np.asarray(t, dtype=float)
    if d == 1:
        out = 2.0 * np.sin(0.5 * t) ** 2
    elif d in (2, 3):
        small = t < 1.0
        ts = np.where(small, t, 0.0)
        q = ts * ts
        series = np.zeros_like(t)
        term = np.ones_like(t)
        for k in range(1, 12):
            # d=2: -(-t^2/4)^k/(k!)^2 ; d=3: (-1)^(k+1) t^(2k)/(2k+1)!
            if d == 2:
                term = term * (-q / 4.0) / (k * k)
            else:
                term = term * (-q) / ((2 * k) * (2 * k + 1))
            series = series - term
        big = 1.0 - (special.j0(t) if d == 2 else np.sinc(t / math.pi))
        out = np.where(small, series, big)
    else:
        raise DomainError(f"dimension must be 1, 2 or 3, got {d}")
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=8)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_sum(f, edges, order):
    """Composite Gauss-Legendre over consecutive ``edges``; returns the panel integrals."""
    x, w = _gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    width = b - a
    nodes = a + width * x[None, :]
    return (f(nodes) * w[None, :]).sum(axis=1) * width[:, 0]


@dataclass(frozen=True)
class ComparabilityScan:
    xi: np.ndarray
    psi: np.ndarray
    L_inv_xi: np.ndarray  # L(1/xi)
    ratio: np.ndarray

    @property
    def min_ratio(self) -> float:
        return float(self.ratio.min())

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max())

    @property
    def constant(self) -> float:
        """Empirical two-sided constant ``c = max(max_ratio, 1/min_ratio)``."""
        return max(self.max_ratio, 1.0 / self.min_ratio)

    def rows(self):
        return zip(self.xi.tolist(), self.psi.tolist(), self.L_inv_xi.tolist(), self.ratio.tolist())


@dataclass(frozen=True)
class SymbolEvaluator:
    d: int
    calc: ScaleCalculus
    osc_panels_per_period: int = 2
    tail_tol: float = 1e-10
    order: int = 16
    # dyadic levels refining towards s = 0 before the analytic remainder
    levels: int = 40

    def __post_init__(self):
        sphere_area(self.d)
        if self.osc_panels_per_period < 1:
            raise DomainError("osc_panels_per_period must be >= 1")

    def _integrand(self, xi):
        ell = self.calc.ell
        d = self.d
        return lambda s: one_minus_average(d, xi * s) * ell(s) / s

    def _integral(self, xi, order):
        f = self._integrand(xi)
        width = 2.0 * math.pi / (xi * self.osc_panels_per_period)
        s0 = min(width, 1.0)
        graded = s0 * 0.5 ** np.arange(self.levels, -1, -1)
        parts = list(_panel_sum(f, graded, order))
        if s0 < 1.0:
            n_full = int(math.floor((1.0 - s0) / width))
            edges = s0 + width * np.arange(n_full + 1)
            if edges[-1] < 1.0:
                edges = np.append(edges, 1.0)
            parts.extend(_panel_sum(f, edges, order))
        return math.fsum(parts), graded[0]

    def psi(self, xi_norm: float) -> float:
        """Characteristic exponent at ``|xi| = xi_norm``."""
        if not xi_norm >= 0.0:
            raise DomainError(f"xi_norm={xi_norm} must be nonnegative")
        if xi_norm == 0.0:
            return 0.0
        hi, s_min = self._integral(xi_norm, 2 * self.order)
        lo, _ = self._integral(xi_norm, self.order)
        # below s_min, 1 - omega(t) = t^2/(2d) to far below working precision
        remainder = xi_norm**2 / (2.0 * self.d) * self.calc.small_moment(s_min)
        total = hi + remainder
        err = abs(hi - lo)
        if err > self.tail_tol * abs(total) and err > 1e-300:
            raise QuadratureError(f"psi({xi_norm}): error estimate {err:.3g}", abserr=err)
        return sphere_area(self.d) * total

    def comparability_scan(self, xi_min: float, xi_max: float, points: int) -> ComparabilityScan:
        """``psi(xi)/L(1/xi)`` on a log grid of ``points`` values in ``[xi_min, xi_max]``."""
        if not 5.0 <= xi_min < xi_max:
            raise DomainError(f"need 5 <= xi_min < xi_max, got {xi_min}, {xi_max}")
        if points < 2:
            raise DomainError("points must be >= 2")
        if xi_max > 1e15:
            raise DomainError("xi_max beyond the radius floor")
        xi = np.geomspace(xi_min, xi_max, points)
        psi = np.array([self.psi(v) for v in xi])
        Lv = np.array([self.calc.big_L(1.0 / v) for v in xi])
        return ComparabilityScan(xi, psi, Lv, psi / Lv)
