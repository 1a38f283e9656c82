import math

import numpy as np
import pytest

from gcba import corpus, flows, strainers
from gcba import geodesics as geo
from gcba.corpus import square_point, theta_point, torus_point


@pytest.fixture(scope="module")
def torus_setup(torus):
    x = torus_point(torus, 0.4, 0.4)
    s = strainers.is_strained(torus, x, 2, 0.04, reach=0.2,
                              estimate_radius=True)
    return x, s


def test_phi_identity_on_fiber(torus, torus_setup):
    x, s = torus_setup
    eng = geo.engine(torus)
    a0, _ = eng.distance(s.points[0], x, need_path=False)
    end, trace, moved = flows.flow_phi_i(torus, s, 0, x, a0, tol=1e-9)
    assert moved == 0.0 and end == x and len(trace) == 1


def test_phi_moves_to_level_set(torus, torus_setup, rng):
    x, s = torus_setup
    eng = geo.engine(torus)
    a0, _ = eng.distance(s.points[0], x, need_path=False)
    y = geo.ball_samples(torus, x, s.radius_estimate, 1, rng)[0]
    end, trace, moved = flows.flow_phi_i(torus, s, 0, y, a0, tol=1e-8)
    f, _ = eng.distance(s.points[0], end, need_path=False)
    assert abs(f - a0) <= 1e-7
    # rate check: |f_i| changed at >= 1 - 2 delta per unit length
    f0, _ = eng.distance(s.points[0], y, need_path=False)
    assert abs(f0 - a0) >= (1 - 2 * s.delta) * moved - 1e-9


def test_retract_properties(torus, torus_setup, rng):
    x, s = torus_setup
    eng = geo.engine(torus)
    F = strainers.StrainerMap(comp=torus, points=s.points,
                              opposites=s.opposites)
    fx = F.value(x)
    for y in geo.ball_samples(torus, x, s.radius_estimate, 5, rng):
        track = flows.retract_to_fiber(torus, s, x, y=y, tol=1e-6)
        assert track.residual <= 1e-6
        gap = float(np.linalg.norm(F.value(y) - fx))
        assert track.length <= 8 * s.k * gap * 1.05 + 1e-9
        assert track.diameter(torus) <= 8 * s.k * gap * 1.05 + 1e-9
        dyx, _ = eng.distance(x, y, need_path=False)
        assert all(d <= dyx + 1e-9 for d in track.dist_to_center)
        # residual halves per round
        rr = track.round_residuals
        for a, b in zip(rr, rr[1:]):
            assert b <= 0.5 * a + 1e-6
        # restarting from the endpoint is a fixed point
        again = flows.retract_to_fiber(torus, s, x, y=track.final, tol=1e-6)
        assert again.length <= 1e-5


def test_retract_trivial_cases(torus, torus_setup):
    x, s = torus_setup
    track = flows.retract_to_fiber(torus, s, x, y=x, tol=1e-6)
    assert track.length == 0.0 and track.residual <= 1e-6


def test_dichotomy_injective_torus(torus, torus_setup, rng):
    x, s = torus_setup
    res = flows.fiber_dichotomy(torus, s, (x, s.radius_estimate),
                                samples=18, rng=rng)
    assert res["verdict"] == "injective"
    assert not res["mixed_evidence"]


def test_dichotomy_nondiscrete_theta_s1(theta_s1, rng):
    xp = square_point(theta_s1, 0, 0.5, 0.25)
    s1 = strainers.is_strained(theta_s1, xp, 1, 0.04, reach=0.2,
                               estimate_radius=True)
    res = flows.fiber_dichotomy(theta_s1, s1, (xp, s1.radius_estimate),
                                samples=18, rng=rng)
    assert res["verdict"] == "fibers-non-discrete"
    assert not res["mixed_evidence"]
    assert res["min_spread"] >= s1.radius_estimate / 2


def test_dichotomy_injective_theta_edge(theta, rng):
    x = theta_point(theta, 0, 0.5)
    s = strainers.is_strained(theta, x, 1, 0.04, reach=0.2,
                              estimate_radius=True)
    res = flows.fiber_dichotomy(theta, s, (x, s.radius_estimate),
                                samples=14, rng=rng)
    assert res["verdict"] == "injective"


def test_rips_betti_shapes():
    # circle of 12 points
    n = 12
    ang = np.linspace(0, 2 * math.pi, n, endpoint=False)
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert flows._rips_betti(d, 0.7) == (1, 1)
    # two far points
    d2 = np.array([[0.0, 5.0], [5.0, 0.0]])
    assert flows._rips_betti(d2, 1.0) == (2, 0)
    # filled triangle: b1 = 0
    d3 = np.ones((3, 3)) - np.eye(3)
    assert flows._rips_betti(d3, 1.5) == (1, 0)


def test_sphere_vs_link_examples(torus, theta, theta_s1, rng):
    r = flows.sphere_vs_link_check(torus, torus_point(torus, 0.3, 0.6),
                                   [0.1, 0.05], rng=rng)
    assert r["link_betti"] == (1, 1)
    assert all(row["match"] for row in r["per_radius"])
    assert r["stable_up_to"] == 0.1
    r = flows.sphere_vs_link_check(theta, theta_point(theta, 0, 0.0),
                                   [0.2, 0.1], rng=rng)
    assert r["link_betti"] == (3, 0)
    assert all(row["match"] for row in r["per_radius"])
    r = flows.sphere_vs_link_check(theta_s1, square_point(theta_s1, 0, 0.0, 0.4),
                                   [0.1, 0.05], rng=rng)
    assert r["link_betti"] == (1, 2)
    assert all(row["match"] for row in r["per_radius"])
