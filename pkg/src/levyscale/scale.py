"""Intrinsic scale calculus for a regularly varying small-jump profile.

Given a profile ``ell`` on (0, 1) with regular-variation index ``-alpha``,
this module evaluates

* ``L(r) = int_r^1 ell(s)/s ds`` and its inverse,
* the intrinsic dilation ``phi_a(r) = L^{-1}(L(r)/a)``,
* the mass of annuli under ``ell(|x|) / (L(|x|) |x|^d) dx``,
* the dyadic radii ``r_n = L^{-1}(L(r/2) a^(n-1))``,
* Karamata and Potter diagnostics.

Every built-in family has an exact antiderivative for ``L``; adaptive
quadrature is kept as an independent route and is the only route for
custom profiles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, QuadratureError, RangeError

LN2 = math.log(2.0)

# string id -> row number of the family table
FAMILIES = {
    "rv-log2": 1,  # s^-beta ln(2/s)^2
    "power": 2,  # s^-beta
    "log": 3,  # ln(2/s)
    "const": 4,  # 1
    "invlog": 5,  # ln(2/s)^-1
    "invlog2": 6,  # ln(2/s)^-2, finite Levy measure
    "custom": 0,
}

RADIUS_FLOOR = 1e-15


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (counting measure for d=1)."""
    if d == 1:
        return 2.0
    if d == 2:
        return 2.0 * math.pi
    if d == 3:
        return 4.0 * math.pi
    raise DomainError(f"dimension must be 1, 2 or 3, got {d}")


@dataclass(frozen=True)
class ScaleFunction:
    """The profile ``ell``: a built-in family or a user supplied function.

    ``alpha`` is the negated regular-variation index.  It is implied by the
    family for built-ins and must be declared for ``custom``.
    """

    family: str
    beta: Optional[float] = None
    alpha: Optional[float] = None
    custom_eval: Optional[Callable[[float], float]] = None
    # L(0+) of a custom profile; infinite unless declared
    custom_limit: float = math.inf

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; choose from {sorted(FAMILIES)}")
        row = FAMILIES[self.family]
        if row in (1, 2):
            if self.beta is None or not 0.0 < self.beta < 2.0:
                raise DomainError(f"family {self.family!r} needs beta in (0, 2), got {self.beta}")
            implied = float(self.beta)
        elif row == 0:
            if self.custom_eval is None:
                raise DomainError("custom family needs custom_eval")
            if self.alpha is None or not 0.0 <= self.alpha < 2.0:
                raise DomainError(f"custom family must declare alpha in [0, 2), got {self.alpha}")
            implied = float(self.alpha)
        else:
            implied = 0.0
        if self.alpha is not None and not math.isclose(self.alpha, implied, abs_tol=1e-15):
            raise DomainError(f"alpha={self.alpha} contradicts family {self.family!r} (alpha={implied})")
        object.__setattr__(self, "alpha", implied)

    @property
    def row(self) -> int:
        return FAMILIES[self.family]

    def __call__(self, s):
        """Evaluate ``ell(s)``; accepts scalars or arrays."""
        row = self.row
        if row == 0:
            if np.ndim(s) == 0:
                return float(self.custom_eval(float(s)))
            return np.array([self.custom_eval(float(v)) for v in np.ravel(s)]).reshape(np.shape(s))
        s = np.asarray(s, dtype=float)
        if row == 1:
            out = s ** (-self.beta) * np.log(2.0 / s) ** 2
        elif row == 2:
            out = s ** (-self.beta)
        elif row == 3:
            out = np.log(2.0 / s)
        elif row == 4:
            out = np.ones_like(s)
        elif row == 5:
            out = 1.0 / np.log(2.0 / s)
        else:
            out = np.log(2.0 / s) ** -2
        return float(out) if out.ndim == 0 else out

    def log_ell(self, log_s):
        """``ln ell(s)`` as a function of ``ln s``; stable for very small s."""
        row = self.row
        if row == 0:
            s = math.exp(log_s)
            if s == 0.0:
                return -math.inf
            return math.log(self.custom_eval(s))
        x = LN2 - log_s  # ln(2/s)
        if row == 1:
            return -self.beta * log_s + 2.0 * math.log(x)
        if row == 2:
            return -self.beta * log_s
        if row == 3:
            return math.log(x)
        if row == 4:
            return 0.0
        if row == 5:
            return -math.log(x)
        return -2.0 * math.log(x)


def _family1_P(x, beta):
    return x * x / beta - 2.0 * x / beta**2 + 2.0 / beta**3


def closed_L(row: int, beta: float, r):
    """Exact ``L(r)`` for built-in rows; vectorised over ``r``."""
    r = np.asarray(r, dtype=float)
    if row == 1:
        x = np.log(2.0 / r)
        out = r ** (-beta) * _family1_P(x, beta) - _family1_P(LN2, beta)
    elif row == 2:
        out = np.expm1(-beta * np.log(r)) / beta
    elif row == 3:
        x = np.log(2.0 / r)
        out = 0.5 * (x - LN2) * (x + LN2)
    elif row == 4:
        out = -np.log(r)
    elif row == 5:
        out = np.log(np.log(2.0 / r) / LN2)
    elif row == 6:
        out = 1.0 / LN2 - 1.0 / np.log(2.0 / r)
    else:
        raise DomainError(f"no closed form for row {row}")
    return out


def _family1_inverse(beta, y):
    # Solve beta*x + ln P(x) = beta ln2 + ln(y + P(ln2)) for x = ln(2/r) >= ln2
    # by Newton's method safeguarded with a bracket.
    y = np.asarray(y, dtype=float)
    c0 = _family1_P(LN2, beta)
    rhs = beta * LN2 + np.log(y + c0)
    lo = np.full_like(y, LN2)
    hi = np.maximum((rhs + 3.0 * math.log(beta)) / beta + 1.0, LN2 + 1.0)
    x = 0.5 * (lo + hi)
    for _ in range(200):
        P = _family1_P(x, beta)
        h = beta * x + np.log(P) - rhs
        dh = beta + (2.0 * x / beta - 2.0 / beta**2) / P
        lo = np.where(h < 0.0, x, lo)
        hi = np.where(h > 0.0, x, hi)
        xn = x - h / dh
        outside = (xn <= lo) | (xn >= hi)
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        done = np.abs(xn - x) <= 4e-16 * xn
        x = xn
        if np.all(done):
            break
    return x


def closed_L_inv(row: int, beta: float, y):
    """Exact (or Newton, row 1) inverse of ``closed_L``; vectorised over ``y``.

    Values at or beyond a finite ``L(0+)`` map to radius 0.
    """
    y = np.asarray(y, dtype=float)
    if row == 1:
        out = 2.0 * np.exp(-_family1_inverse(beta, y))
    elif row == 2:
        out = np.exp(-np.log1p(beta * y) / beta)
    elif row == 3:
        out = 2.0 * np.exp(-np.sqrt(2.0 * y + LN2 * LN2))
    elif row == 4:
        out = np.exp(-y)
    elif row == 5:
        out = 2.0 * np.exp(-LN2 * np.exp(y))
    elif row == 6:
        gap = 1.0 / LN2 - y
        with np.errstate(divide="ignore"):
            out = np.where(gap > 0.0, 2.0 * np.exp(-1.0 / np.where(gap > 0.0, gap, 1.0)), 0.0)
    else:
        raise DomainError(f"no closed form for row {row}")
    return out


def _check_radius(r, name="r", closed_right=False):
    ok = 0.0 < r <= 1.0 if closed_right else 0.0 < r < 1.0
    if not ok:
        interval = "(0, 1]" if closed_right else "(0, 1)"
        raise DomainError(f"{name}={r} outside {interval}")


@dataclass(frozen=True)
class ScaleCalculus:
    """Evaluators for ``ell``, ``L``, ``L^{-1}``, ``phi_a`` and ``mu``.

    Immutable; all methods are pure.
    """

    ell: ScaleFunction
    quad_rel_tol: float = 1e-10
    inv_abs_tol: float = 1e-12
    use_closed_form: bool = True

    @classmethod
    def from_id(cls, family: str, beta: Optional[float] = None, **kwargs) -> "ScaleCalculus":
        return cls(ScaleFunction(family, beta=beta), **kwargs)

    @property
    def has_closed_form(self) -> bool:
        return self.ell.row != 0

    @property
    def L_limit(self) -> float:
        """``lim_{r->0+} L(r)``; finite only for the finite-measure row."""
        if self.ell.row == 6:
            return 1.0 / LN2
        if self.ell.row == 0:
            return self.ell.custom_limit
        return math.inf

    def ell_eval(self, s):
        if np.ndim(s) == 0:
            _check_radius(s, "s")
        elif np.any((np.asarray(s) <= 0.0) | (np.asarray(s) >= 1.0)):
            raise DomainError("s outside (0, 1)")
        return self.ell(s)

    def _quad(self, f, a, b, what):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err, info = integrate.quad(
                f, a, b, epsabs=0.0, epsrel=self.quad_rel_tol, limit=500, full_output=1
            )[:3]
        if not math.isfinite(val) or err > max(100.0 * self.quad_rel_tol * abs(val), 1e-300):
            raise QuadratureError(f"{what}: quadrature did not converge (estimate {err:.3g})", abserr=err)
        return val

    def big_L_quad(self, r: float) -> float:
        """``L(r)`` by adaptive quadrature in ``u = ln(1/s)``."""
        _check_radius(r, closed_right=True)
        if r == 1.0:
            return 0.0
        ell = self.ell
        if ell.row == 0:
            f = lambda u: ell.custom_eval(math.exp(-u))
        else:
            f = lambda u: math.exp(ell.log_ell(-u))
        return self._quad(f, 0.0, -math.log(r), f"L({r})")

    def big_L(self, r, method: str = "auto"):
        """``L(r) = int_r^1 ell(s)/s ds`` for ``0 < r <= 1``.

        ``method`` is ``"auto"`` (closed form when available), ``"closed"``
        or ``"quad"``.
        """
        if np.ndim(r) > 0:
            return np.array([self.big_L(float(v), method) for v in np.ravel(r)]).reshape(np.shape(r))
        _check_radius(r, closed_right=True)
        if method not in ("auto", "closed", "quad"):
            raise DomainError(f"unknown method {method!r}")
        if method == "quad" or (method == "auto" and not (self.use_closed_form and self.has_closed_form)):
            return self.big_L_quad(r)
        if not self.has_closed_form:
            raise DomainError("custom profile has no closed form")
        if r == 1.0:
            return 0.0
        return float(closed_L(self.ell.row, self.ell.beta or 0.0, r))

    def big_L_inv(self, y: float) -> float:
        """The unique radius with ``L(radius) = y``."""
        if not y >= 0.0:
            raise DomainError(f"y={y} must be nonnegative")
        if y == 0.0:
            return 1.0
        if y >= self.L_limit:
            raise RangeError(f"y={y} not attained: L(0+)={self.L_limit}")
        if self.use_closed_form and self.has_closed_form:
            return float(closed_L_inv(self.ell.row, self.ell.beta or 0.0, y))
        lo = math.log(RADIUS_FLOOR)
        g = lambda t: self.big_L(math.exp(t)) - y
        if g(lo) < 0.0:
            raise RangeError(f"y={y} needs a radius below the floor {RADIUS_FLOOR}")
        t = optimize.brentq(g, lo, 0.0, xtol=self.inv_abs_tol, rtol=4 * np.finfo(float).eps, maxiter=500)
        return math.exp(t)

    def phi(self, a: float, r: float) -> float:
        """Intrinsic dilation ``phi_a(r) = L^{-1}(L(r)/a)``; ``phi_a(r) >= r``."""
        if not a >= 1.0:
            raise DomainError(f"a={a} must be >= 1")
        _check_radius(r)
        if a == 1.0:
            return r
        return self.big_L_inv(self.big_L(r) / a)

    def mu_annulus(self, rho1: float, rho2: float, d: int) -> float:
        """Mass of ``B_rho2 minus B_rho1`` under ``ell(|x|)/(L(|x|)|x|^d) dx``.

        The radial density is ``-d/ds ln L(s)``, so the mass is
        ``sigma_{d-1} ln(L(rho1)/L(rho2))``; ``inf`` when ``rho2 = 1``.
        """
        sigma = sphere_area(d)
        if not 0.0 < rho1 <= rho2 <= 1.0:
            raise DomainError(f"need 0 < rho1 <= rho2 <= 1, got {rho1}, {rho2}")
        if rho1 == rho2:
            return 0.0
        L2 = self.big_L(rho2)
        if L2 == 0.0:
            return math.inf
        return sigma * (math.log(self.big_L(rho1)) - math.log(L2))

    def dyadic_radii(self, r: float, a: float, n: int) -> list:
        """Radii ``r_k = L^{-1}(L(r/2) a^(k-1))`` for ``k = 1..n``.

        Consecutive radii satisfy ``r_{k-1} = phi_a(r_k)``.
        """
        _check_radius(r)
        if not a > 1.0:
            raise DomainError(f"a={a} must be > 1")
        if n < 1:
            raise DomainError(f"n={n} must be >= 1")
        base = self.big_L(r / 2.0)
        top = base * a ** (n - 1)
        if top >= self.L_limit:
            raise RangeError(
                f"depth n={n} unreachable: L(r/2) a^(n-1) = {top} >= L(0+) = {self.L_limit}"
            )
        return [r / 2.0] + [self.big_L_inv(base * a**k) for k in range(1, n)]

    def karamata_ratio(self, rho: float, r: float) -> float:
        """``int_0^r s^rho ell(s) ds / (r^(rho+1) ell(r))``.

        Computed as ``int_0^inf exp(-(rho+1)x) ell(r e^-x)/ell(r) dx`` which
        removes the endpoint singularity.
        """
        _check_radius(r)
        if not rho > -1.0:
            raise DomainError(f"rho={rho} must exceed -1")
        if rho + 1.0 <= self.ell.alpha:
            raise DomainError(f"int_0^r s^{rho} ell(s) ds diverges for alpha={self.ell.alpha}")
        log_r = math.log(r)
        ref = self.ell.log_ell(log_r)
        ell = self.ell

        def f(x):
            e = -(rho + 1.0) * x
            if e < -745.0:
                return 0.0
            lv = ell.log_ell(log_r - x)
            return math.exp(e + lv - ref) if lv > -math.inf else 0.0

        return self._quad(f, 0.0, math.inf, f"Karamata ratio at r={r}")

    def small_moment(self, eps: float) -> float:
        """``int_0^eps s ell(s) ds``, the variance density of jumps below eps."""
        if eps == 0.0:
            return 0.0
        _check_radius(eps, "eps")
        return eps * eps * self.ell(eps) * self.karamata_ratio(1.0, eps)

    def potter_check(self, delta: float, grid: Sequence) -> float:
        """Smallest ``C >= 1`` with the Potter bound holding on the grid pairs.

        The bound is ``ell(r)/ell(s) <= C max((r/s)^(-alpha-delta), (r/s)^(-alpha+delta))``.
        """
        if not delta > 0.0:
            raise DomainError(f"delta={delta} must be positive")
        pairs = np.asarray(grid, dtype=float).reshape(-1, 2)
        if np.any((pairs <= 0.0) | (pairs >= 1.0)):
            raise DomainError("grid pairs must lie in (0, 1)^2")
        r, s = pairs[:, 0], pairs[:, 1]
        alpha = self.ell.alpha
        log_q = np.log(r) - np.log(s)
        log_bound = np.maximum((-alpha - delta) * log_q, (-alpha + delta) * log_q)
        log_ratio = np.log(self.ell(r)) - np.log(self.ell(s)) - log_bound
        return max(1.0, float(np.exp(np.max(log_ratio))))


def log_grid_pairs(lo: float, hi: float, n: int) -> np.ndarray:
    """All ordered pairs from an ``n``-point log grid on ``[lo, hi]``."""
    g = np.geomspace(lo, hi, n)
    rr, ss = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([rr.ravel(), ss.ravel()])
