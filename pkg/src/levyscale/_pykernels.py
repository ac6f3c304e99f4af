"""Pure-numpy path kernels.

Each path owns its bit generator.  Per jump the uniforms are consumed in
the fixed order (time, radius, direction...), drawn in blocks; draws past
the stopping jump are discarded, which is harmless because no other path
shares the stream.  The compiled kernel consumes the same uniforms one at
a time.
"""
from __future__ import annotations

import math

import numpy as np

from .scale import closed_L_inv

NO_TARGET, ANNULUS, EXTERIOR, CALLABLE = 0, 1, 2, 3
TWO_PI = 2.0 * math.pi
MAX_BLOCK = 1 << 16


def uniforms_per_jump(d):
    return 4 if d == 3 else 3


def directions(d, U):
    """Unit vectors from uniform columns ``U`` (one column, two for d=3)."""
    if d == 1:
        return np.where(U[:, 0] < 0.5, 1.0, -1.0)[:, None]
    if d == 2:
        th = TWO_PI * U[:, 0]
        return np.column_stack([np.cos(th), np.sin(th)])
    z = 2.0 * U[:, 0] - 1.0
    th = TWO_PI * U[:, 1]
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([s * np.cos(th), s * np.sin(th), z])


def _target_mask(points, tkind, tcenter, t_in, t_out, half, target_fn):
    if tkind == NO_TARGET:
        return np.zeros(len(points), dtype=bool)
    if tkind == CALLABLE:
        return np.asarray(target_fn(points), dtype=bool)
    diff = points - tcenter
    dist2 = np.einsum("ij,ij->i", diff, diff)
    if tkind == EXTERIOR:
        return dist2 >= t_out * t_out
    mask = (dist2 >= t_in * t_in) & (dist2 < t_out * t_out)
    if half:
        mask &= diff[:, 0] >= 0.0
    return mask


def run_paths(bitgens, row, beta, L_eps, rate, d, starts, center, radius,
              tkind, tcenter, t_in, t_out, half, max_events,
              radius_fn=None, target_fn=None):
    """Drop-mode compound Poisson paths until target hit or ball exit.

    Returns ``(time, pos, pre, jumps, hit, complete)`` arrays.
    """
    n = len(bitgens)
    if radius_fn is None:
        radius_fn = lambda y: closed_L_inv(row, beta, y)
    out_t = np.zeros(n)
    out_pos = np.zeros((n, d))
    out_pre = np.zeros((n, d))
    out_jumps = np.zeros(n, dtype=np.int64)
    out_hit = np.zeros(n, dtype=np.int8)
    out_ok = np.ones(n, dtype=bool)
    m = uniforms_per_jump(d)
    r2 = radius * radius
    center = np.asarray(center, dtype=float)
    tcenter = np.asarray(tcenter, dtype=float)
    for i in range(n):
        g = np.random.Generator(bitgens[i])
        pos = np.array(starts[i], dtype=float)
        t = 0.0
        done = 0
        block = 64
        while True:
            k = min(block, max_events - done)
            if k <= 0:
                out_ok[i] = False
                out_pre[i] = pos
                break
            U = g.random((k, m))
            times = np.cumsum(np.concatenate(([t], -np.log1p(-U[:, 0]) / rate)))
            rho = radius_fn((1.0 - U[:, 1]) * L_eps)
            steps = rho[:, None] * directions(d, U[:, 2:])
            path = np.cumsum(np.vstack([pos[None, :], steps]), axis=0)
            new = path[1:]
            hit = _target_mask(new, tkind, tcenter, t_in, t_out, half, target_fn)
            diff = new - center
            out = np.einsum("ij,ij->i", diff, diff) >= r2
            stop = hit | out
            if stop.any():
                j = int(np.argmax(stop))
                out_t[i] = times[j + 1]
                out_pos[i] = new[j]
                out_pre[i] = path[j]
                out_jumps[i] = done + j + 1
                out_hit[i] = 1 if hit[j] else 0
                break
            pos = path[-1]
            t = times[-1]
            done += k
            block = min(2 * block, MAX_BLOCK)
        if not out_ok[i]:
            out_t[i] = t
            out_pos[i] = pos
            out_jumps[i] = done
    return out_t, out_pos, out_pre, out_jumps, out_hit, out_ok


def run_paths_gaussian(bitgens, radius_fn, L_eps, rate, sigma2, d, starts, center, radius,
                       tkind, tcenter, t_in, t_out, half, max_events, target_fn=None):
    """Jumps above eps plus a Brownian part of per-coordinate variance rate ``sigma2``.

    The Brownian part is sub-stepped with ``dt <= dist^2/(4 sigma2)`` where
    ``dist`` is the distance to the sphere; crossings are detected at step
    resolution.  Each Brownian sub-step counts as an event.
    """
    n = len(bitgens)
    out_t = np.zeros(n)
    out_pos = np.zeros((n, d))
    out_pre = np.zeros((n, d))
    out_jumps = np.zeros(n, dtype=np.int64)
    out_hit = np.zeros(n, dtype=np.int8)
    out_ok = np.ones(n, dtype=bool)
    center = np.asarray(center, dtype=float)
    tcenter = np.asarray(tcenter, dtype=float)
    dt_min = (1e-3 * radius) ** 2 / (4.0 * sigma2) if sigma2 > 0 else math.inf

    def check(p):
        hit = _target_mask(p[None, :], tkind, tcenter, t_in, t_out, half, target_fn)[0]
        diff = p - center
        return bool(hit), float(diff @ diff) >= radius * radius

    for i in range(n):
        g = np.random.Generator(bitgens[i])
        pos = np.array(starts[i], dtype=float)
        pre = pos.copy()
        t = 0.0
        events = 0
        status = None
        while status is None:
            if events >= max_events:
                break
            rem = -math.log1p(-g.random()) / rate
            while rem > 0.0 and sigma2 > 0.0:
                dist = radius - math.sqrt(float((pos - center) @ (pos - center)))
                dt = min(rem, max(dist * dist / (4.0 * sigma2), dt_min))
                pre = pos
                pos = pos + math.sqrt(sigma2 * dt) * g.standard_normal(d)
                t += dt
                rem -= dt
                events += 1
                hit, out = check(pos)
                if hit or out:
                    status = int(hit)
                    break
                if events >= max_events:
                    break
            if status is not None or events >= max_events:
                break
            t += rem
            u = g.random(uniforms_per_jump(d) - 1)
            rho = float(radius_fn(np.array([(1.0 - u[0]) * L_eps]))[0])
            pre = pos
            pos = pos + rho * directions(d, u[None, 1:])[0]
            events += 1
            hit, out = check(pos)
            if hit or out:
                status = int(hit)
        out_t[i] = t
        out_pos[i] = pos
        out_pre[i] = pre
        out_jumps[i] = events
        if status is None:
            out_ok[i] = False
        else:
            out_hit[i] = status
    return out_t, out_pos, out_pre, out_jumps, out_hit, out_ok


def trace_path(bitgen, radius_fn, L_eps, rate, d, start, center, radius, max_events):
    """Every jump of one drop-mode path up to ball exit, as ``(t, x..., rho)`` rows."""
    g = np.random.Generator(bitgen)
    pos = np.array(start, dtype=float)
    t = 0.0
    rows = []
    m = uniforms_per_jump(d)
    while len(rows) < max_events:
        u = g.random(m)
        t += -math.log1p(-u[0]) / rate
        rho = float(radius_fn(np.array([(1.0 - u[1]) * L_eps]))[0])
        pos = pos + rho * directions(d, u[None, 2:])[0]
        rows.append((t, *pos.tolist(), rho))
        diff = pos - center
        if float(diff @ diff) >= radius * radius:
            break
    return rows
