import math

import numpy as np
import pytest

from gcba import complexes, corpus, links
from gcba.corpus import square_point, theta_point, torus_point

PI = math.pi


def cone_complex(angles):
    """Fan of triangles around one central vertex with given apex angles;
    outer edges of consecutive pages glued, closing the cone."""
    specs = []
    for ang in angles:
        # apex at slot 0, unit sides, far edge by law of cosines
        far = math.sqrt(2 - 2 * math.cos(ang))
        L = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, far], [1.0, far, 0.0]])
        specs.append((2, L))
    n = len(angles)
    gluings = []
    for i in range(n):
        j = (i + 1) % n
        # side (0,2) of page i to side (0,1) of page j
        gluings.append(((i, (0, 2)), (j, (0, 1)), (0, 1)))
    return complexes.build_complex(specs, gluings)


def test_theta_vertex_link(theta):
    a = theta_point(theta, 0, 0.0)
    L = links.link_at(theta, a)
    assert L.kind == "graph"
    assert len(L.nodes) == 3 and len(L.arcs) == 0
    for i in range(3):
        for j in range(i + 1, 3):
            assert L.dist(("node", i), ("node", j)) == pytest.approx(PI)
    assert L.betti() == (3, 0)
    assert L.diameter() == pytest.approx(PI)


def test_torus_interior_is_circle(torus):
    x = torus_point(torus, 0.3, 0.1)
    L = links.link_at(torus, x)
    assert L.betti() == (1, 1)
    assert sum(a.length for a in L.arcs) == pytest.approx(2 * PI)
    assert L.girth() == pytest.approx(2 * PI)


def test_torus_vertex_is_flat_circle(torus):
    v = torus_point(torus, 0.0, 0.0)
    L = links.link_at(torus, v)
    assert sum(a.length for a in L.arcs) == pytest.approx(2 * PI)
    assert L.girth() == pytest.approx(2 * PI)
    assert L.betti()[0] == 1


def test_spine_link_is_theta_shaped(theta_s1):
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    L = links.link_at(theta_s1, sp)
    assert len(L.nodes) == 2 and len(L.arcs) == 3
    assert all(a.length == pytest.approx(PI) for a in L.arcs)
    assert L.betti() == (1, 2)
    assert L.dist(("node", 0), ("node", 1)) == pytest.approx(PI)
    assert L.dist(("arc", 0, PI / 2), ("node", 0)) == pytest.approx(PI / 2)
    # distance between midpoints of two different pages is pi
    assert L.dist(("arc", 0, PI / 2), ("arc", 1, PI / 2)) == pytest.approx(PI)


def test_edge_interior_link_poles(theta_s1):
    p = square_point(theta_s1, 0, 0.5, 0.0)  # horizontal boundary edge e_i x {c}
    L = links.link_at(theta_s1, p)
    # manifold edge: two incident half-planes, circle of length 2 pi
    assert len(L.arcs) == 2
    assert sum(a.length for a in L.arcs) == pytest.approx(2 * PI)


def test_antipodes_examples(theta, torus, theta_s1):
    a = theta_point(theta, 0, 0.0)
    L = links.link_at(theta, a)
    anti = links.antipodes(L, ("node", 0), 1e-9)
    assert sorted(anti) == [("node", 1), ("node", 2)]
    x = torus_point(torus, 0.3, 0.1)
    Lc = links.link_at(torus, x)
    anti = links.antipodes(Lc, ("arc", 0, 0.7), 1e-9)
    assert len(anti) == 1
    assert Lc.dist(("arc", 0, 0.7), anti[0]) == pytest.approx(PI)
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    Ls = links.link_at(theta_s1, sp)
    anti = links.antipodes(Ls, ("node", 0), 1e-9)
    assert anti == [("node", 1)]


def test_delta_spherical_examples(theta, torus, theta_s1):
    x = torus_point(torus, 0.3, 0.1)
    Lc = links.link_at(torus, x)
    v = ("arc", 0, 0.3)
    vbar = ("arc", 0, 0.3 + PI)
    ok, _, s = links.is_delta_spherical(Lc, v, vbar, 0.01)
    assert ok and s == pytest.approx(PI)
    a = theta_point(theta, 0, 0.0)
    Lt = links.link_at(theta, a)
    ok, witness, s = links.is_delta_spherical(Lt, ("node", 0), ("node", 1), 0.1)
    assert not ok and witness == ("node", 2) and s == pytest.approx(2 * PI)
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    Ls = links.link_at(theta_s1, sp)
    ok, _, s = links.is_delta_spherical(Ls, ("node", 0), ("node", 1), 0.05)
    assert ok and s == pytest.approx(PI)


def test_lemma_antipode_diameter(theta_s1):
    # whenever the pair passes, every antipode of v is within delta of vbar
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    L = links.link_at(theta_s1, sp)
    delta = 0.05
    ok, _, _ = links.is_delta_spherical(L, ("node", 0), ("node", 1), delta)
    assert ok
    for rep in links.antipodes(L, ("node", 0), 1e-9):
        assert L.dist(rep, ("node", 1)) < delta
    regions = L.antipode_regions(("node", 0), 1e-9)
    pts = [r["rep"] for r in regions]
    for p in pts:
        for q in pts:
            assert L.dist(p, q) < 2 * delta


def test_find_tuple_examples(theta, torus, theta_s1):
    x = torus_point(torus, 0.3, 0.1)
    Lc = links.link_at(torus, x)
    assert links.find_spherical_tuple(Lc, 1, 0.01) is not None
    assert links.find_spherical_tuple(Lc, 2, 0.05) is not None
    a = theta_point(theta, 0, 0.0)
    Lt = links.link_at(theta, a)
    assert links.find_spherical_tuple(Lt, 1, 0.1) is None
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    Ls = links.link_at(theta_s1, sp)
    assert links.find_spherical_tuple(Ls, 1, 0.05) is not None
    assert links.find_spherical_tuple(Ls, 2, 0.1) is None


def test_tuple_pairwise_distance_window(torus):
    # Cor. 6.4 forward: returned tuples have pairwise distances in the window
    x = torus_point(torus, 0.3, 0.1)
    L = links.link_at(torus, x)
    delta = 0.05
    res = links.find_spherical_tuple(L, 2, delta)
    vs = res["v"]
    d = L.dist(vs[0], vs[1])
    assert PI / 2 - 2 * delta < d < PI / 2 + delta


def test_cor64_reverse(torus):
    # points at distance within (pi/2 - delta, pi/2 + delta) with arbitrary
    # antipodes form a 2*delta-spherical pair of tuples
    x = torus_point(torus, 0.3, 0.1)
    L = links.link_at(torus, x)
    delta = 0.08
    v1 = ("arc", 0, 1.0)
    v2 = ("arc", 0, 1.0 + PI / 2 + 0.5 * delta)
    assert PI / 2 - delta < L.dist(v1, v2) < PI / 2 + delta
    b1 = links.antipodes(L, v1, 1e-9)[0]
    b2 = links.antipodes(L, v2, 1e-9)[0]
    for v, b in ((v1, b1), (v2, b2)):
        ok, _, _ = links.is_delta_spherical(L, v, b, 2 * delta)
        assert ok
    assert L.dist(v1, b2) < PI / 2 + 2 * delta
    assert L.dist(b1, b2) < PI / 2 + 2 * delta


def test_suspension_proximity(theta, torus, theta_s1):
    x = torus_point(torus, 0.3, 0.1)
    Lc = links.link_at(torus, x)
    assert links.suspension_proximity(Lc, 1) <= 2e-3
    a = theta_point(theta, 0, 0.0)
    Lt = links.link_at(theta, a)
    assert links.suspension_proximity(Lt, 1) >= PI - 2e-3
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    Ls = links.link_at(theta_s1, sp)
    assert links.suspension_proximity(Ls, 1) <= 2e-3
    # threshold pi/4: mid-arc points with the far pole as common opposite
    assert links.suspension_proximity(Ls, 2) == pytest.approx(PI / 4, abs=2e-3)


def test_long_circle_excess():
    # cone of total angle 2 pi + 0.2: smallest delta is excess/2 (the best
    # opposite is the midpoint of the antipode arc)
    excess = 0.2
    comp = cone_complex([(2 * PI + excess) / 3] * 3)
    apex = complexes.point(comp, 0, [1.0, 0.0, 0.0])
    L = links.link_at(comp, apex)
    assert sum(a.length for a in L.arcs) == pytest.approx(2 * PI + excess)
    prox = links.suspension_proximity(L, 1)
    assert prox == pytest.approx(excess / 2, abs=2e-3)


def test_links_of_complete_complexes_are_complete(theta, torus, theta_s1):
    for comp, pt in ((theta, theta_point(theta, 0, 0.0)),
                     (torus, torus_point(torus, 0.0, 0.0)),
                     (theta_s1, square_point(theta_s1, 0, 0.0, 0.4))):
        L = links.link_at(comp, pt)
        assert L.geodesically_complete()


def test_locate_realize_roundtrip(theta_s1):
    from gcba import geodesics as geo
    sp = square_point(theta_s1, 0, 0.0, 0.4)
    L = links.link_at(theta_s1, sp)
    p = ("arc", 1, 0.7)
    state = links.realize(L, p)
    assert state[0] == "ray"
    d = geo.Direction(base=sp, cid=state[1],
                      vec=tuple(state[3]),
                      anchor=tuple(geo.engine(theta_s1).bary_from_xy(
                          state[1], state[2])))
    assert L.dist(L.locate(d), p) < 1e-9
