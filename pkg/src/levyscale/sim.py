"""Exact simulation of the truncated isotropic jump process.

Jumps larger than ``eps`` arrive at rate ``sigma_{d-1} L(eps)``; their
radii have distribution function ``1 - L(t)/L(eps)`` on ``(eps, 1)`` and
their directions are uniform.  Jumps below ``eps`` are dropped or replaced
by a Brownian motion of matching variance.

Only the translation-invariant kernel ``K(x, h) = k(h)`` is simulated.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _backend
from ._pykernels import ANNULUS, CALLABLE, EXTERIOR, NO_TARGET, directions, trace_path, uniforms_per_jump
from .errors import DomainError, RangeError
from .scale import ScaleCalculus, closed_L_inv, sphere_area

MODES = ("drop", "gaussian")


@dataclass(frozen=True)
class JumpProcessModel:
    """Compound Poisson approximation with small-jump cutoff ``eps``.

    ``eps = 0`` is allowed only for a finite Levy measure (``L(0+) < inf``),
    in which case the process is simulated exactly.
    """

    d: int
    calc: ScaleCalculus
    eps: float
    small_jump_mode: str = "drop"
    max_events: int = 10**7

    def __post_init__(self):
        sphere_area(self.d)
        if not 0.0 <= self.eps < 1.0:
            raise DomainError(f"eps={self.eps} outside [0, 1)")
        if self.eps == 0.0 and math.isinf(self.calc.L_limit):
            raise RangeError("eps=0 needs a finite Levy measure; L(0+) is infinite")
        if self.small_jump_mode not in MODES:
            raise DomainError(f"small_jump_mode must be one of {MODES}")
        if self.max_events < 1:
            raise DomainError("max_events must be positive")

    @property
    def L_eps(self) -> float:
        return self.calc.L_limit if self.eps == 0.0 else self.calc.big_L(self.eps)

    def jump_rate(self) -> float:
        """Total intensity of jumps above ``eps``."""
        return sphere_area(self.d) * self.L_eps

    def sample_jump_radius(self, u: float) -> float:
        """Inverse-CDF radius for a uniform variate ``u`` in (0, 1)."""
        if not 0.0 < u < 1.0:
            raise DomainError(f"u={u} outside (0, 1)")
        return self.calc.big_L_inv((1.0 - u) * self.L_eps)

    def neglected_variance(self) -> float:
        """Per-coordinate variance rate carried by the jumps below ``eps``."""
        return sphere_area(self.d) / self.d * self.calc.small_moment(self.eps)

    def small_jump_std(self) -> float:
        """Per-coordinate std rate of the Brownian substitute; 0 in drop mode."""
        if self.small_jump_mode == "drop":
            return 0.0
        return math.sqrt(self.neglected_variance())


def sample_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vector in R^d (a random sign for d=1)."""
    sphere_area(d)
    u = rng.random((1, uniforms_per_jump(d) - 2))
    return directions(d, u)[0]


def default_eps(calc: ScaleCalculus, d: int, r: float, gate: float = 0.01, floor: float = 1e-5) -> float:
    """Largest cutoff with ``std_dropped * sqrt(E tau) < gate * r``, never below ``floor``.

    ``E tau`` is approximated by ``1/(sigma_{d-1} L(r))``.
    """
    tau = 1.0 / (sphere_area(d) * calc.big_L(r))

    def bias(eps):
        return math.sqrt(sphere_area(d) / d * calc.small_moment(eps) * tau)

    hi = r / 2.0
    if bias(hi) < gate * r:
        return hi
    lo = floor
    if bias(lo) >= gate * r:
        return floor
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if bias(mid) < gate * r:
            lo = mid
        else:
            hi = mid
    return lo


def path_bitgen(seed: int, index: int, stream: int = 0) -> np.random.PCG64:
    """Independent bit generator for path ``index`` of ``stream`` under ``seed``."""
    return np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, index)))


# ---------------------------------------------------------------- targets


def _as_point(x, d=None):
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if d is not None and p.shape != (d,):
        raise DomainError(f"point {x!r} is not in R^{d}")
    return p


@dataclass(frozen=True)
class Annulus:
    """``{z : r_in <= |z - center| < r_out}``, cut to ``(z - center)_1 >= 0`` if ``half``."""

    center: tuple
    r_in: float
    r_out: float
    half: bool = False

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        diff = p - np.asarray(self.center)
        dist2 = np.einsum("ij,ij->i", diff, diff)
        mask = (dist2 >= self.r_in**2) & (dist2 < self.r_out**2)
        if self.half:
            mask &= diff[:, 0] >= 0.0
        return mask


@dataclass(frozen=True)
class BallExterior:
    center: tuple
    radius: float

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        diff = p - np.asarray(self.center)
        return np.einsum("ij,ij->i", diff, diff) >= self.radius**2


class EmptyTarget:
    def __call__(self, points):
        return np.zeros(len(np.atleast_2d(points)), dtype=bool)


Target = Union[Annulus, BallExterior, EmptyTarget, Callable[[np.ndarray], np.ndarray]]


def _encode_target(target, d):
    if target is None or isinstance(target, EmptyTarget):
        return NO_TARGET, np.zeros(d), 0.0, 0.0, False
    if isinstance(target, Annulus):
        return ANNULUS, _as_point(target.center, d), target.r_in, target.r_out, target.half
    if isinstance(target, BallExterior):
        return EXTERIOR, _as_point(target.center, d), 0.0, target.radius, False
    if callable(target):
        return CALLABLE, np.zeros(d), 0.0, 0.0, False
    raise DomainError(f"unsupported target {target!r}")


# ---------------------------------------------------------------- records


@dataclass(frozen=True)
class ExitRecord:
    exit_time: float
    exit_position: np.ndarray
    pre_exit_position: np.ndarray
    jump_count: int
    hit_flag: Optional[bool] = None
    complete: bool = True


@dataclass(frozen=True)
class PathBatch:
    """Column-wise outcomes of consecutive paths."""

    exit_time: np.ndarray
    exit_position: np.ndarray
    pre_exit_position: np.ndarray
    jump_count: np.ndarray
    hit: np.ndarray
    complete: np.ndarray
    with_target: bool = False

    def __len__(self):
        return len(self.exit_time)

    @property
    def incomplete(self) -> int:
        return int(np.count_nonzero(~self.complete))

    def record(self, i: int) -> ExitRecord:
        return ExitRecord(
            float(self.exit_time[i]),
            self.exit_position[i].copy(),
            self.pre_exit_position[i].copy(),
            int(self.jump_count[i]),
            bool(self.hit[i]) if self.with_target else None,
            bool(self.complete[i]),
        )

    @classmethod
    def concat(cls, parts: Sequence["PathBatch"]) -> "PathBatch":
        return cls(
            *(np.concatenate([getattr(p, f) for p in parts]) for f in
              ("exit_time", "exit_position", "pre_exit_position", "jump_count", "hit", "complete")),
            with_target=parts[0].with_target,
        )


# ---------------------------------------------------------------- drivers


def _run(model, bitgens, starts, center, r, target, backend):
    d = model.d
    tkind, tcenter, t_in, t_out, half = _encode_target(target, d)
    row = model.calc.ell.row
    beta = model.calc.ell.beta or 0.0
    args = (model.L_eps, model.jump_rate(), d)
    if model.small_jump_mode == "gaussian" or row == 0 or tkind == CALLABLE:
        k = _backend.kernel("python")
        if row == 0:
            radius_fn = np.vectorize(lambda y: model.calc.big_L_inv(y) if y < model.calc.L_limit else 0.0)
        else:
            radius_fn = lambda y: closed_L_inv(row, beta, y)
        target_fn = target if tkind == CALLABLE else None
        if model.small_jump_mode == "gaussian":
            out = k.run_paths_gaussian(
                bitgens, radius_fn, model.L_eps, model.jump_rate(), model.neglected_variance(), d,
                starts, center, r, tkind, tcenter, t_in, t_out, half, model.max_events, target_fn=target_fn,
            )
        else:
            out = k.run_paths(
                bitgens, row, beta, *args, starts, center, r, tkind, tcenter, t_in, t_out, half,
                model.max_events, radius_fn=radius_fn, target_fn=target_fn,
            )
    else:
        k = _backend.kernel(backend)
        out = k.run_paths(bitgens, row, beta, *args, starts, center, r, tkind, tcenter, t_in, t_out, half,
                          model.max_events)
    t, pos, pre, jumps, hit, ok = out
    return PathBatch(t, pos, pre, jumps, hit.astype(bool), ok, with_target=tkind != NO_TARGET)


def simulate_paths(
    model: JumpProcessModel,
    starts,
    center,
    r: float,
    *,
    n: Optional[int] = None,
    target: Optional[Target] = None,
    seed: int = 0,
    stream: int = 0,
    first_index: int = 0,
    backend: Optional[str] = None,
    workers: int = 1,
) -> PathBatch:
    """Run paths from ``starts`` until they enter ``target`` or leave ``B_r(center)``.

    Path ``i`` uses the stream ``(seed, stream, first_index + i)``, so results
    do not depend on ``workers`` or on how a run is split into calls.  A jump
    landing in the target counts as a hit even if it also leaves the ball.
    """
    d = model.d
    center = _as_point(center, d)
    if not 0.0 < r:
        raise DomainError(f"r={r} must be positive")
    starts = np.asarray(starts, dtype=float)
    if starts.ndim <= 1:
        if n is None:
            raise DomainError("a single start point needs n")
        starts = np.tile(_as_point(starts, d), (n, 1))
    starts = np.ascontiguousarray(starts.reshape(-1, d))
    diff = starts - center
    if np.any(np.einsum("ij,ij->i", diff, diff) >= r * r):
        raise DomainError("all start points must lie inside the ball")
    count = len(starts)
    bitgens = [path_bitgen(seed, first_index + i, stream) for i in range(count)]
    if workers <= 1 or count < 2 * workers:
        return _run(model, bitgens, starts, center, r, target, backend)
    bounds = np.linspace(0, count, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(
            lambda ab: _run(model, bitgens[ab[0]:ab[1]], starts[ab[0]:ab[1]], center, r, target, backend),
            zip(bounds[:-1], bounds[1:]),
        ))
    return PathBatch.concat(parts)


def _as_bitgen(rng):
    if isinstance(rng, np.random.Generator):
        return rng.bit_generator
    if isinstance(rng, np.random.BitGenerator):
        return rng
    raise DomainError("rng must be a numpy Generator or BitGenerator")


def simulate_exit(model: JumpProcessModel, x0, center, r: float, rng, backend=None) -> ExitRecord:
    """One path from ``x0`` until it leaves ``B_r(center)``."""
    d = model.d
    x0, center = _as_point(x0, d), _as_point(center, d)
    if not float((x0 - center) @ (x0 - center)) < r * r:
        raise DomainError("x0 must lie inside the ball")
    batch = _run(model, [_as_bitgen(rng)], x0[None, :], center, r, None, backend)
    return batch.record(0)


def simulate_hit_or_exit(model: JumpProcessModel, x0, target: Target, domain_center, domain_r: float,
                         rng, backend=None) -> ExitRecord:
    """One path until it enters ``target`` (hit) or leaves the domain ball (miss)."""
    d = model.d
    x0, center = _as_point(x0, d), _as_point(domain_center, d)
    if not float((x0 - center) @ (x0 - center)) < domain_r * domain_r:
        raise DomainError("x0 must lie inside the domain ball")
    target = EmptyTarget() if target is None else target
    batch = _run(model, [_as_bitgen(rng)], x0[None, :], center, domain_r, target, backend)
    return batch.record(0)


def write_event_log(model: JumpProcessModel, x0, center, r: float, seed: int, index: int, path,
                    stream: int = 0) -> int:
    """Write every jump of path ``index`` (drop mode) as CSV ``t,x...,radius``; returns the row count."""
    d = model.d
    row = model.calc.ell.row
    beta = model.calc.ell.beta or 0.0
    if row == 0:
        radius_fn = np.vectorize(model.calc.big_L_inv)
    else:
        radius_fn = lambda y: closed_L_inv(row, beta, y)
    rows = trace_path(path_bitgen(seed, index, stream), radius_fn, model.L_eps, model.jump_rate(), d,
                      _as_point(x0, d), _as_point(center, d), r, model.max_events)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{j + 1}" for j in range(d)] + ["radius"])
        w.writerows(rows)
    return len(rows)
