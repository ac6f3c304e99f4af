"""Monte Carlo estimators for exit, far-exit, hitting and harmonic-function experiments.

Estimates keep exact rational sums so that merging partial results is
associative and the reported numbers do not depend on how paths were
grouped.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import DomainError, EventCapError, InsufficientSignalError
from .scale import ScaleCalculus
from .sim import Annulus, JumpProcessModel, PathBatch, Target, _as_point, simulate_paths

Z95 = 1.96


def _exact_sums(values):
    v = np.asarray(values)
    if v.dtype.kind in "biu":
        iv = v.astype(np.int64)
        return Fraction(int(iv.sum())), Fraction(int((iv * iv).sum()))
    fr = [Fraction(x) for x in v.astype(float).tolist()]
    return sum(fr, Fraction(0)), sum((x * x for x in fr), Fraction(0))


@dataclass(frozen=True)
class Estimate:
    """Sample mean with standard error, backed by exact sums."""

    total: Fraction
    total_sq: Fraction
    n: int

    @classmethod
    def from_samples(cls, values) -> "Estimate":
        s, sq = _exact_sums(values)
        return cls(s, sq, int(np.size(values)))

    def merge(self, other: "Estimate") -> "Estimate":
        return Estimate(self.total + other.total, self.total_sq + other.total_sq, self.n + other.n)

    @property
    def mean(self) -> float:
        return float(self.total / self.n) if self.n else math.nan

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return math.nan
        var = (self.total_sq - self.total * self.total / self.n) / (self.n - 1)
        return math.sqrt(max(float(var), 0.0) / self.n)

    @property
    def ci95_low(self) -> float:
        return self.mean - Z95 * self.stderr

    @property
    def ci95_high(self) -> float:
        return self.mean + Z95 * self.stderr

    def scaled(self, factor: float) -> "Estimate":
        """The estimate of ``factor * X`` (exact for dyadic factors)."""
        f = Fraction(factor)
        return Estimate(self.total * f, self.total_sq * f * f, self.n)


def _paths(model, x0, center, r, N, seed, stream, target=None, backend=None, workers=1) -> PathBatch:
    if N < 1:
        raise DomainError("N must be positive")
    batch = simulate_paths(model, x0, center, r, n=N, target=target, seed=seed, stream=stream,
                           backend=backend, workers=workers)
    if batch.incomplete:
        raise EventCapError(f"{batch.incomplete} of {N} paths exceeded max_events={model.max_events}",
                            incomplete=batch.incomplete)
    return batch


def _center(model, x0, center):
    return _as_point(x0 if center is None else center, model.d)


def est_exit_tail(model: JumpProcessModel, x0, r: float, t: float, N: int, *, center=None,
                  seed: int = 0, stream: int = 0, **kw) -> Estimate:
    """``P_x0(tau_{B_r(center)} <= t)``; center defaults to ``x0``."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"r={r} outside (0, 1)")
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    batch = _paths(model, x0, _center(model, x0, center), r, N, seed, stream, **kw)
    return Estimate.from_samples(batch.exit_time <= t)


def est_exit_mean(model: JumpProcessModel, x0, r: float, N: int, *, center=None,
                  seed: int = 0, stream: int = 0, **kw) -> Estimate:
    """``E_x0 tau_{B_r(center)}``."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"r={r} outside (0, 1)")
    batch = _paths(model, x0, _center(model, x0, center), r, N, seed, stream, **kw)
    return Estimate.from_samples(batch.exit_time)


def exit_time_summary(model: JumpProcessModel, x0, r: float, times, N: int, *, center=None,
                      seed: int = 0, stream: int = 0, **kw):
    """Mean exit time and ``P(tau <= t)`` for each ``t`` in ``times``, from one set of paths.

    Equal to calling ``est_exit_mean`` and ``est_exit_tail`` with the same seed and stream.
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"r={r} outside (0, 1)")
    batch = _paths(model, x0, _center(model, x0, center), r, N, seed, stream, **kw)
    return (Estimate.from_samples(batch.exit_time),
            [Estimate.from_samples(batch.exit_time <= t) for t in times])


def est_far_exit(model: JumpProcessModel, x0, r: float, s: float, N: int, *, center=None,
                 seed: int = 0, stream: int = 0, **kw) -> Estimate:
    """``P_x0(X at exit from B_r(center) lies outside B_s(center))`` for ``2r < s < 1``."""
    if not 0.0 < 2.0 * r < s < 1.0:
        raise DomainError(f"need 2r < s < 1, got r={r}, s={s}")
    c = _center(model, x0, center)
    batch = _paths(model, x0, c, r, N, seed, stream, **kw)
    diff = batch.exit_position - c
    return Estimate.from_samples(np.einsum("ij,ij->i", diff, diff) >= s * s)


def make_half_annulus(calc: ScaleCalculus, center, r: float, a: float, d: int) -> Annulus:
    """``{z : r <= |z - center| < phi_a(r), (z - center)_1 >= 0}``, half the annulus mu-mass."""
    if not 0.0 < r < 0.5:
        raise DomainError(f"r={r} outside (0, 1/2)")
    if not a > 1.0:
        raise DomainError(f"a={a} must exceed 1")
    return Annulus(tuple(_as_point(center, d).tolist()), r, calc.phi(a, r), half=True)


def est_hitting(model: JumpProcessModel, y, r: float, a: float, N: int, *, center=None,
                target: Optional[Target] = None, seed: int = 0, stream: int = 0, **kw) -> Estimate:
    """``P_y(T_A < tau_{B_phi_a(r)(center)})`` with ``A`` the half annulus unless given."""
    c = _center(model, y, center)
    yp = _as_point(y, model.d)
    if not float((yp - c) @ (yp - c)) < (r / 2.0) ** 2:
        raise DomainError("y must lie in B_{r/2}(center)")
    A = make_half_annulus(model.calc, c, r, a, model.d) if target is None else target
    outer = model.calc.phi(a, r)
    batch = _paths(model, yp, c, outer, N, seed, stream, target=A, **kw)
    return Estimate.from_samples(batch.hit)


# ---------------------------------------------------------------- harmonic functions


def half_space_indicator(center) -> Callable[[np.ndarray], np.ndarray]:
    """``g(z) = 1{(z - center)_1 >= 0}``."""
    c0 = float(np.atleast_1d(center)[0])
    return lambda z: (np.atleast_2d(z)[:, 0] - c0 >= 0.0).astype(float)


def exterior_indicator(center, s: float) -> Callable[[np.ndarray], np.ndarray]:
    """``g(z) = 1{|z - center| >= s}``."""
    c = np.atleast_1d(np.asarray(center, dtype=float))

    def g(z):
        diff = np.atleast_2d(z) - c
        return (np.einsum("ij,ij->i", diff, diff) >= s * s).astype(float)

    return g


@dataclass(frozen=True)
class HarmonicProbe:
    """Grid of points where ``u(x) = E_x g(X at exit from B_r(center))`` is estimated."""

    payoff: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    center: np.ndarray
    r: float
    grid: np.ndarray
    values: Optional[tuple] = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        grid = np.asarray(self.grid, dtype=float).reshape(-1, len(c))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "grid", grid)
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"r={self.r} outside (0, 1)")
        diff = grid - c
        if np.any(np.einsum("ij,ij->i", diff, diff) >= (self.r / 4.0) ** 2):
            raise DomainError("grid points must lie in B_{r/4}(center)")

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.values])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.values])


def est_harmonic(model: JumpProcessModel, probe: HarmonicProbe, N: int, *, seed: int = 0,
                 stream: int = 0, **kw) -> HarmonicProbe:
    """Fill ``probe.values``; grid point ``k`` uses stream ``stream + k``."""
    values = []
    for k, x in enumerate(probe.grid):
        batch = _paths(model, x, probe.center, probe.r, N, seed, stream + k, **kw)
        values.append(Estimate.from_samples(np.asarray(probe.payoff(batch.exit_position), dtype=float)))
    return dataclasses.replace(probe, values=tuple(values))


def grid_oscillation(probe: HarmonicProbe, x, radius: float) -> float:
    """``max - min`` of the estimated ``u`` over grid points in ``B_radius(x)``."""
    diff = probe.grid - np.atleast_1d(np.asarray(x, dtype=float))
    inside = np.einsum("ij,ij->i", diff, diff) < radius * radius
    if not inside.any():
        raise DomainError("no grid point inside the ball")
    m = probe.means[inside]
    return float(m.max() - m.min())


class RegularityFit(NamedTuple):
    gamma: float
    ci_low: float
    ci_high: float
    n_pairs: int


def fit_regularity_exponent(probe: HarmonicProbe, calc: ScaleCalculus, *, n_boot: int = 2000,
                            seed: int = 0, min_pairs: int = 5) -> RegularityFit:
    """Slope of ``ln|u(x) - u(y)|`` against ``-ln L(|x - y|)``.

    Only pairs with ``|u(x) - u(y)| > 3 sqrt(se_x^2 + se_y^2)`` enter the fit.
    The interval is a 95% percentile bootstrap over the retained pairs.
    """
    if probe.values is None:
        raise DomainError("probe has no values; run est_harmonic first")
    means, ses = probe.means, probe.stderrs
    xs, ys, dists = [], [], []
    m = len(probe.grid)
    for i in range(m):
        for j in range(i + 1, m):
            dist = float(np.linalg.norm(probe.grid[i] - probe.grid[j]))
            if not 0.0 < dist < 1.0:
                continue
            diff = abs(means[i] - means[j])
            if diff > 3.0 * math.hypot(ses[i], ses[j]):
                xs.append(-math.log(calc.big_L(dist)))
                ys.append(math.log(diff))
                dists.append(dist)
    if len(xs) < min_pairs or len(set(dists)) < 2:
        raise InsufficientSignalError(
            f"{len(xs)} pairs above the noise gate ({len(set(dists))} distinct distances); need {min_pairs}"
        )
    X, Y = np.array(xs), np.array(ys)
    gamma = float(np.polyfit(X, Y, 1)[0])
    rng = np.random.default_rng(seed)
    slopes = []
    for _ in range(n_boot):
        idx = rng.integers(0, len(X), len(X))
        if np.ptp(X[idx]) == 0.0:
            continue
        slopes.append(np.polyfit(X[idx], Y[idx], 1)[0])
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return RegularityFit(gamma, float(lo), float(hi), len(X))
