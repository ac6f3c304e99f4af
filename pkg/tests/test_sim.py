import csv
import math

import numpy as np
import pytest
from scipy import stats

from levyscale import _backend
from levyscale.errors import DomainError, RangeError
from levyscale.mc import est_exit_mean
from levyscale.scale import ScaleCalculus, ScaleFunction, sphere_area
from levyscale.sim import (Annulus, BallExterior, EmptyTarget, JumpProcessModel, default_eps, path_bitgen,
                           sample_direction, simulate_exit, simulate_hit_or_exit, simulate_paths,
                           write_event_log)

LN2 = math.log(2.0)
needs_cython = pytest.mark.skipif("cython" not in _backend.KERNELS, reason="compiled kernel not built")


def model(family="power", beta=1.0, d=1, eps=1e-3, **kw):
    if family not in ("power", "rv-log2"):
        beta = None
    return JumpProcessModel(d, ScaleCalculus.from_id(family, beta), eps, **kw)


# ---------------------------------------------------------------- model quantities


def test_jump_rate_examples():
    assert model("const", eps=0.1).jump_rate() == pytest.approx(2.0 * math.log(10.0), rel=1e-15)
    assert model("invlog2", eps=0.0).jump_rate() == pytest.approx(2.0 / LN2, rel=1e-15)
    assert model("const", eps=1.0 - 1e-12).jump_rate() < 1e-11
    assert model("const", d=3, eps=0.1).jump_rate() == pytest.approx(4.0 * math.pi * math.log(10.0))


def test_eps_zero_needs_finite_measure():
    with pytest.raises(RangeError):
        model("power", eps=0.0)
    with pytest.raises(DomainError):
        model("power", eps=1.0)


def test_sample_jump_radius_examples():
    m = model("const", eps=0.01)
    assert m.sample_jump_radius(0.5) == pytest.approx(0.1, rel=1e-14)
    assert m.sample_jump_radius(1e-12) == pytest.approx(0.01, rel=1e-9)
    assert m.sample_jump_radius(1.0 - 1e-12) == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(DomainError):
        m.sample_jump_radius(0.0)


def test_small_jump_std_examples():
    assert model("const", eps=0.1).small_jump_std() == 0.0
    assert model("const", eps=0.1, small_jump_mode="gaussian").small_jump_std() == pytest.approx(0.1, rel=1e-12)
    assert model("power", eps=0.1, small_jump_mode="gaussian").small_jump_std() == pytest.approx(
        math.sqrt(0.2), rel=1e-12)


def test_default_eps_meets_gate():
    c = ScaleCalculus.from_id("power", 1.0)
    for r in (0.05, 0.4):
        eps = default_eps(c, 1, r)
        tau = 1.0 / (2.0 * c.big_L(r))
        assert math.sqrt(2.0 * c.small_moment(eps) * tau) < 0.01 * r or eps == 1e-5
    c = ScaleCalculus.from_id("const")
    eps = default_eps(c, 2, 0.3)
    tau = 1.0 / (sphere_area(2) * c.big_L(0.3))
    assert math.sqrt(sphere_area(2) / 2 * c.small_moment(eps) * tau) < 0.003


# ---------------------------------------------------------------- sampling laws


def test_radius_law_ks():
    m = model("power", 1.0, eps=1e-3)
    c = m.calc
    u = np.random.default_rng(11).random(100_000)
    radii = np.array([m.sample_jump_radius(v) for v in u])
    assert radii.min() > 1e-3 and radii.max() < 1.0
    cdf = lambda t: 1.0 - c.big_L(np.clip(t, 1e-3, 1.0)) / m.L_eps
    assert stats.kstest(radii, cdf).statistic <= 0.01


def test_direction_d1_balance():
    rng = np.random.default_rng(1)
    v = np.array([sample_direction(1, rng)[0] for _ in range(100_000)])
    assert set(np.unique(v)) == {-1.0, 1.0}
    p = np.mean(v > 0)
    assert abs(p - 0.5) <= 3.0 * math.sqrt(0.25 / 100_000)


def test_direction_d3_mean():
    rng = np.random.default_rng(2)
    v = np.array([sample_direction(3, rng) for _ in range(100_000)])
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-14)
    assert np.linalg.norm(v.mean(axis=0)) <= 0.02


def test_direction_d2_chi_square():
    rng = np.random.default_rng(3)
    v = np.array([sample_direction(2, rng) for _ in range(50_000)])
    counts = np.histogram(np.arctan2(v[:, 1], v[:, 0]), bins=36, range=(-math.pi, math.pi))[0]
    assert stats.chisquare(counts).pvalue > 0.05


# ---------------------------------------------------------------- paths


def test_exit_contract():
    m = model("power", 1.0, eps=1e-3)
    b = simulate_paths(m, 0.0, 0.0, 0.2, n=500, seed=4)
    assert np.all(np.abs(b.exit_position[:, 0]) >= 0.2)
    assert np.all(np.abs(b.pre_exit_position[:, 0]) < 0.2)
    assert np.all(b.jump_count >= 1) and np.all(b.exit_time > 0.0)
    rec = simulate_exit(m, [0.05], [0.0], 0.2, np.random.Generator(path_bitgen(1, 0)))
    assert rec.jump_count >= 1 and abs(rec.exit_position[0]) >= 0.2 and rec.hit_flag is None


def test_reproducible_and_split_invariant():
    m = model("log", d=2, eps=1e-3)
    a = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=40, seed=9)
    b = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=40, seed=9)
    c1 = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=15, seed=9)
    c2 = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=25, seed=9, first_index=15)
    w = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=40, seed=9, workers=3)
    for other in (b, type(a).concat([c1, c2]), w):
        assert np.array_equal(a.exit_time, other.exit_time)
        assert np.array_equal(a.exit_position, other.exit_position)
        assert np.array_equal(a.jump_count, other.jump_count)
    d = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=40, seed=10)
    assert not np.array_equal(a.exit_time, d.exit_time)


@needs_cython
@pytest.mark.parametrize("family,beta,d", [
    ("rv-log2", 0.8, 1), ("power", 1.0, 1), ("power", 1.5, 2), ("log", None, 3),
    ("const", None, 2), ("invlog", None, 1), ("invlog2", None, 3),
])
def test_backends_agree(family, beta, d):
    m = model(family, beta, d=d, eps=1e-3)
    x0, c = np.zeros(d), np.zeros(d)
    target = Annulus(tuple(c), 0.1, 0.2, half=True)
    for tgt in (None, target, BallExterior(tuple(c), 0.25)):
        py = simulate_paths(m, x0, c, 0.3, n=200, seed=21, target=tgt, backend="python")
        cy = simulate_paths(m, x0, c, 0.3, n=200, seed=21, target=tgt, backend="cython")
        assert np.array_equal(py.jump_count, cy.jump_count)
        assert np.array_equal(py.hit, cy.hit)
        np.testing.assert_allclose(py.exit_time, cy.exit_time, rtol=1e-12)
        np.testing.assert_allclose(py.exit_position, cy.exit_position, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(py.pre_exit_position, cy.pre_exit_position, rtol=1e-12, atol=1e-15)


def test_backend_unknown():
    with pytest.raises(ValueError):
        _backend.kernel("fortran")


def test_finite_measure_mean_exit_oracle():
    # the mean exit time solves m(x) = 1/Lam + int m(x+h) nu(dh)/Lam over |x+h| < r;
    # discretise on cells with exact cell masses from the closed-form L
    r, M = 0.9, 1000
    lam = 2.0 / LN2

    def Lc(s):
        s = np.abs(s)
        with np.errstate(divide="ignore"):
            out = np.where(s >= 1.0, 0.0, 1.0 / LN2 - 1.0 / np.log(2.0 / np.maximum(s, 1e-300)))
        return np.where(s == 0.0, 1.0 / LN2, out)

    edges = np.linspace(-r, r, M + 1)
    x = 0.5 * (edges[:-1] + edges[1:])
    a, b = edges[None, :-1] - x[:, None], edges[None, 1:] - x[:, None]
    mass = np.where(a >= 0, Lc(a) - Lc(b), np.where(b <= 0, Lc(b) - Lc(a), 2.0 / LN2 - Lc(a) - Lc(b)))
    mean = np.linalg.solve(np.eye(M) - mass / lam, np.full(M, 1.0 / lam))
    oracle = float(np.interp(0.0, x, mean))

    e = est_exit_mean(model("invlog2", eps=0.0), 0.0, r, 20_000, seed=5)
    assert abs(e.mean - oracle) <= 3.0 * e.stderr + 1e-4
    assert e.mean >= 1.0 / lam


def test_mean_exit_is_mean_jumps_over_rate():
    m = model("power", 1.0, eps=1e-3)
    b = simulate_paths(m, 0.0, 0.0, 0.1, n=4000, seed=8)
    lhs = b.exit_time.mean()
    rhs = b.jump_count.mean() / m.jump_rate()
    se = b.exit_time.std(ddof=1) / math.sqrt(len(b))
    assert abs(lhs - rhs) <= 4.0 * se


def test_hit_or_exit_targets():
    m = model("power", 1.0, eps=1e-3)
    ext = simulate_paths(m, 0.0, 0.0, 0.2, n=300, seed=3, target=BallExterior((0.0,), 0.2))
    plain = simulate_paths(m, 0.0, 0.0, 0.2, n=300, seed=3)
    assert ext.hit.all()
    assert np.array_equal(ext.exit_time, plain.exit_time)
    empty = simulate_paths(m, 0.0, 0.0, 0.2, n=300, seed=3, target=EmptyTarget())
    assert not empty.hit.any()
    rec = simulate_hit_or_exit(m, [0.0], BallExterior((0.0,), 0.2), [0.0], 0.2,
                               np.random.Generator(path_bitgen(3, 0)))
    assert rec.hit_flag is True and rec.exit_time == plain.exit_time[0]


def test_callable_target_matches_builtin():
    m = model("power", 1.0, d=2, eps=1e-3)
    ann = Annulus((0.0, 0.0), 0.05, 0.15, half=True)
    kw = dict(n=300, seed=12)
    a = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.15, target=ann, **kw)
    b = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.15, target=lambda p: ann(p), **kw)
    assert np.array_equal(a.hit, b.hit)
    np.testing.assert_allclose(a.exit_time, b.exit_time, rtol=1e-12)


def test_exit_isotropy_d2():
    m = model("power", 1.0, d=2, eps=1e-2)
    b = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.3, n=10_000, seed=14)
    ang = np.arctan2(b.exit_position[:, 1], b.exit_position[:, 0])
    counts = np.histogram(ang, bins=20, range=(-math.pi, math.pi))[0]
    assert stats.chisquare(counts).pvalue > 0.05


def test_reflection_symmetry_d1():
    m = model("power", 1.0, eps=1e-3)
    a = simulate_paths(m, 0.07, 0.0, 0.2, n=4000, seed=15)
    b = simulate_paths(m, -0.07, 0.0, 0.2, n=4000, seed=16)
    assert stats.ks_2samp(a.exit_position[:, 0], -b.exit_position[:, 0]).pvalue > 0.05


def test_event_cap_flags_incomplete():
    m = model("power", 1.0, eps=1e-4, max_events=3)
    b = simulate_paths(m, 0.0, 0.0, 0.4, n=50, seed=1)
    assert b.incomplete > 0
    assert np.all(b.jump_count[~b.complete] == 3)
    assert not b.record(int(np.argmin(b.complete))).complete


def test_gaussian_mode_close_to_fine_drop():
    coarse = model("power", 1.0, eps=0.02, small_jump_mode="gaussian")
    fine = model("power", 1.0, eps=1e-4)
    g = est_exit_mean(coarse, 0.0, 0.2, 3000, seed=2)
    f = est_exit_mean(fine, 0.0, 0.2, 3000, seed=2)
    b = simulate_paths(coarse, 0.0, 0.0, 0.2, n=200, seed=2)
    assert np.all(np.abs(b.exit_position[:, 0]) >= 0.2)
    assert abs(g.mean - f.mean) <= 3.0 * math.hypot(g.stderr, f.stderr) + 0.05 * f.mean


def test_custom_profile_paths():
    ell = ScaleFunction("custom", alpha=1.0, custom_eval=lambda s: 1.0 / s)
    m = JumpProcessModel(1, ScaleCalculus(ell), 1e-2)
    ref = model("power", 1.0, eps=1e-2)
    a = simulate_paths(m, 0.0, 0.0, 0.2, n=20, seed=6)
    b = simulate_paths(ref, 0.0, 0.0, 0.2, n=20, seed=6)
    assert np.array_equal(a.jump_count, b.jump_count)
    np.testing.assert_allclose(a.exit_position, b.exit_position, rtol=1e-9)


def test_event_log(tmp_path):
    m = model("power", 1.0, d=2, eps=1e-2)
    path = tmp_path / "log.csv"
    n = write_event_log(m, [0.0, 0.0], [0.0, 0.0], 0.2, seed=5, index=3, path=path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "radius"]
    assert len(rows) == n + 1
    last = np.array(rows[-1], dtype=float)
    b = simulate_paths(m, [0.0, 0.0], [0.0, 0.0], 0.2, n=4, seed=5)
    assert b.jump_count[3] == n
    assert last[0] == pytest.approx(b.exit_time[3], rel=1e-12)
    np.testing.assert_allclose(last[1:3], b.exit_position[3], rtol=1e-12)


def test_start_outside_ball_rejected():
    m = model()
    with pytest.raises(DomainError):
        simulate_paths(m, 0.3, 0.0, 0.2, n=3)
    with pytest.raises(DomainError):
        simulate_exit(m, [0.3], [0.0], 0.2, np.random.default_rng())


@pytest.mark.parametrize("value,expected", [("python", "python"), ("bogus", None)])
def test_backend_env_selection(value, expected):
    import os
    import subprocess
    import sys
    env = dict(os.environ, LEVYSCALE_BACKEND=value)
    proc = subprocess.run([sys.executable, "-c", "import levyscale; print(levyscale.BACKEND)"],
                          env=env, capture_output=True, text=True)
    if expected is None:
        assert proc.returncode != 0 and "LEVYSCALE_BACKEND" in proc.stderr
    else:
        assert proc.returncode == 0 and proc.stdout.strip() == expected
