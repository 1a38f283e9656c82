import math

import numpy as np
import pytest

from gcba import charts, corpus, strainers
from gcba import geodesics as geo
from gcba.corpus import square_point, theta_point, torus_point

PI = math.pi


@pytest.fixture(scope="module")
def torus_chart(torus):
    x = torus_point(torus, 0.42, 0.3)
    s = strainers.is_strained(torus, x, 2, 0.04, reach=0.2,
                              estimate_radius=True)
    return charts.build_chart(torus, s, x, rng=np.random.default_rng(0))


def test_tensor_identity_orthogonal(torus, torus_chart):
    # orthogonal strainer: g_F close to the identity
    assert len(torus_chart.tensor_samples) > 0
    for (_, _, g) in torus_chart.tensor_samples:
        assert np.allclose(g, np.eye(2), atol=0.06)
    lo, hi = charts.tensor_eigen_range(torus_chart)
    L = 2 * math.sqrt(2)
    assert L**-2 <= lo <= hi <= L**2


def test_tensor_sixty_degrees(torus):
    # pair at 60 degrees: constant g = (A^-1)^T A^-1 with known entries
    x = torus_point(torus, 0.5, 0.5)
    p1 = torus_point(torus, 0.7, 0.5)
    p2 = torus_point(torus, 0.5 + 0.2 * math.cos(PI / 3),
                     0.5 + 0.2 * math.sin(PI / 3))
    q1 = torus_point(torus, 0.3, 0.5)
    q2 = torus_point(torus, 0.5 - 0.2 * math.cos(PI / 3),
                     0.5 - 0.2 * math.sin(PI / 3))
    s = strainers.Strainer(center=x, points=[p1, p2], opposites=[q1, q2],
                           delta=0.05, angle_matrix=np.zeros((2, 4)))
    ch = charts.Chart(comp=torus, strainer=s, center=x, radius=0.002,
                      F=strainers.StrainerMap(comp=torus, points=[p1, p2],
                                              opposites=[q1, q2]))
    g = ch.tensor_at(x)
    A = np.array([[-1.0, 0.0],
                  [-math.cos(PI / 3), -math.sin(PI / 3)]])
    expected = np.linalg.inv(A).T @ np.linalg.inv(A)
    assert np.allclose(g, expected, atol=1e-9)


def test_tensor_continuity(torus, torus_chart):
    # drift rate is about 2 / reach = 10 for this chart; finiteness and the
    # right order of magnitude are the content here
    assert charts.tensor_continuity_modulus(torus_chart) < 12.0


def test_chart_length_matches_distance(torus, torus_chart, rng):
    eng = geo.engine(torus)
    x = torus_chart.center
    worst = 0.0
    for _ in range(10):
        pts = geo.ball_samples(torus, x, torus_chart.radius, 2, rng)
        a, b = pts[0], pts[1]
        if a == b:
            continue
        d, path = eng.distance(a, b)
        poly = [path.point_at(u) for u in np.linspace(0, d, 6)]
        cl = charts.chart_length(torus_chart, poly)
        worst = max(worst, abs(cl - d) / d)
    assert worst <= 0.01


def test_chart_length_circle_arc(torus, torus_chart):
    # quarter arc of a small circle: length within 1 percent of r*pi/2
    x = torus_chart.center
    cx = x.xy(torus)
    r = torus_chart.radius * 0.6
    eng = geo.engine(torus)
    poly = []
    for ang in np.linspace(0.0, PI / 2, 24):
        xy = cx + r * np.array([math.cos(ang), math.sin(ang)])
        poly.append(corpus.torus_point(
            torus, *(xy @ np.array([[1, 0], [0, 1]]))))
    # points were built in t0 local coords = global square coords here
    cl = charts.chart_length(torus_chart, poly)
    assert cl == pytest.approx(r * PI / 2, rel=0.01)


def test_theta_s1_page_chart(theta_s1, rng):
    xp = square_point(theta_s1, 0, 0.5, 0.25)
    s = strainers.is_strained(theta_s1, xp, 2, 0.04, reach=0.15,
                              estimate_radius=True)
    ch = charts.build_chart(theta_s1, s, xp, rng=rng)
    assert len(ch.tensor_samples) > 0
    eng = geo.engine(theta_s1)
    pts = geo.ball_samples(theta_s1, xp, ch.radius, 4, rng)
    d, path = eng.distance(pts[0], pts[1])
    if d > 0:
        poly = [path.point_at(u) for u in np.linspace(0, d, 6)]
        assert charts.chart_length(ch, poly) == pytest.approx(d, rel=0.01)


def test_injectivity_guard(theta_s1, rng):
    # a strainer map along the circle fiber direction is not injective on a
    # region spanning the wrap; the builder reports the violating pair
    xp = square_point(theta_s1, 0, 0.5, 0.25)
    p = square_point(theta_s1, 0, 0.5, 0.45)
    q = square_point(theta_s1, 0, 0.5, 0.05)
    s = strainers.Strainer(center=xp, points=[p], opposites=[q], delta=0.05,
                           angle_matrix=np.zeros((1, 2)))
    with pytest.raises(charts.ChartError, match="injectivity"):
        charts.build_chart(theta_s1, s, xp, radius=0.45, n_samples=40,
                           rng=np.random.default_rng(5))


def test_alpha_special(torus, torus_chart, rng):
    rep = charts.alpha_special(torus_chart, rng=rng)
    assert rep["pass"]
    assert rep["worst_directional_derivative"] <= -1.0 / 16.0 + 1e-6


def test_alpha_special_k1(theta, rng):
    x = theta_point(theta, 0, 0.5)
    s = strainers.is_strained(theta, x, 1, 0.04, reach=0.2,
                              estimate_radius=True)
    ch = charts.build_chart(theta, s, x, rng=rng)
    rep = charts.alpha_special(ch, rng=rng)
    assert rep["pass"]
    assert rep["worst_directional_derivative"] <= -0.25 + 1e-6


def test_convexity_pushforward(torus, torus_chart, rng):
    rep = charts.convexity_pushforward_check(torus_chart, samples=6, rng=rng)
    assert rep["pass"]
    # negative control: -d_z violates midpoint convexity somewhere
    assert rep["negative_control_worst"] > -1e-12


def test_dc_length_stability(torus, rng):
    def seg_curve(y0, n=60):
        return [torus_point(torus, 0.2 + 0.5 * u, y0)
                for u in np.linspace(0, 1, n)]

    def zigzag(amp, m, n=200):
        return [torus_point(torus, 0.2 + 0.5 * u,
                            0.3 + amp * math.sin(2 * PI * m * u))
                for u in np.linspace(0, 1, n)]

    lim = seg_curve(0.3)
    translates = [seg_curve(0.3 + 0.02 / 2**i) for i in range(4)]
    rep = charts.dc_length_stability(torus, translates, lim, norm_bound=6.0,
                                     rng=rng)
    assert rep["accepted"]
    assert rep["final_gap"] <= 1e-9
    smooth = [zigzag(0.02 / 2**i, 2) for i in range(5)]
    rep = charts.dc_length_stability(torus, smooth, lim, norm_bound=9.0,
                                     rng=rng)
    assert rep["accepted"]
    assert rep["gaps"] == sorted(rep["gaps"], reverse=True)
    assert rep["final_gap"] <= 1e-3
    stairs = [zigzag(0.02 / 2**i, 2 * 2**i) for i in range(5)]
    rep = charts.dc_length_stability(torus, stairs, lim, norm_bound=9.0,
                                     rng=rng)
    assert not rep["accepted"]
    # and indeed the staircase lengths do not converge to the limit
    lens = [charts.curve_length(torus, c) for c in stairs]
    assert abs(lens[-1] - charts.curve_length(torus, lim)) > 0.02
