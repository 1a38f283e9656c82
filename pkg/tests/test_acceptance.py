"""Acceptance suite: one test per headline criterion, each printing a
PASS/FAIL line (to the real stdout, so the lines survive pytest capture).

Tolerances are pinned here, not configured elsewhere."""

import math
import sys
import time

import numpy as np
import pytest

from gcba import charts, convergence as cv, corpus, flows, strainers, strata
from gcba import geodesics as geo
from gcba.corpus import square_point, theta_point, torus_point

PI = math.pi


def report(num, ok, detail):
    line = f"ACCEPTANCE {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def spaces():
    return {
        "theta": corpus.theta_graph(),
        "torus": corpus.flat_torus(),
        "ts": corpus.theta_times_circle(),
    }


@pytest.fixture(scope="module")
def chart_setups(spaces):
    """Verified strainers with straining radii on the corpus charts."""
    torus, ts, theta = spaces["torus"], spaces["ts"], spaces["theta"]
    out = {}
    out["torus_k2"] = (torus, strainers.is_strained(
        torus, torus_point(torus, 0.42, 0.3), 2, 0.04, reach=0.2,
        estimate_radius=True))
    out["theta_k1"] = (theta, strainers.is_strained(
        theta, theta_point(theta, 0, 0.5), 1, 0.04, reach=0.2,
        estimate_radius=True))
    out["page_k2"] = (ts, strainers.is_strained(
        ts, square_point(ts, 0, 0.5, 0.25), 2, 0.04, reach=0.15,
        estimate_radius=True))
    out["page_k1"] = (ts, strainers.is_strained(
        ts, square_point(ts, 0, 0.5, 0.25), 1, 0.04, reach=0.15,
        estimate_radius=True))
    for name, (comp, s) in out.items():
        assert s is not None and s.radius_estimate > 0, name
        ok, _ = strainers.verify_strainer(comp, s)
        assert ok, name
    return out


def test_criterion_1_canonical_measure(spaces):
    theta, ts = spaces["theta"], spaces["ts"]
    m_theta = strata.canonical_measure(theta)["masses"]
    exact_theta = abs(m_theta.get(1, 0.0) - 3.0) <= 1e-12
    m_ts = strata.canonical_measure(ts)["masses"]
    exact_ts = (abs(m_ts.get(2, 0.0) - 3.0) <= 1e-12
                and m_ts.get(1, 0.0) == 0.0 and m_ts.get(0, 0.0) == 0.0)
    sp = square_point(ts, 0, 0.0, 0.37)
    rng = np.random.default_rng(1)
    t0 = time.monotonic()
    ball_ok = True
    worst = 0.0
    for r in (0.05, 0.1):
        out = strata.ball_mass_2d(ts, sp, r, rng=rng)
        rel = abs(out["mass"] - 3 * PI * r * r / 2) / (3 * PI * r * r / 2)
        worst = max(worst, rel)
        ball_ok = ball_ok and rel <= 0.01
    dt = time.monotonic() - t0
    report(1, exact_theta and exact_ts and ball_ok and dt < 10.0,
           f"mu(theta)={m_theta.get(1):.14f}, mu2(ThetaxS1)="
           f"{m_ts.get(2):.14f}, ball rel err {worst:.4f}, MC {dt:.1f}s")


def test_criterion_2_stratification(spaces):
    theta, ts = spaces["theta"], spaces["ts"]
    rng = np.random.default_rng(2)
    t0 = time.monotonic()
    rs = strata.regular_set(ts, 2, 0.05, rng=rng)
    spine = [u for u in rs["singular"] if u["dim"] == 1]
    ts_ok = (len(spine) == 2
             and abs(rs["singular_mass_km1"] - 2.0) <= 1e-9
             and all(u["dim"] in (0, 1) for u in rs["singular"]))
    regular_names = {strata._unit_name(u) for u in rs["regular"]}
    pages_ok = all(f"cell:{cid}" in regular_names for cid in range(6))
    rs_theta = strata.regular_set(theta, 1, 0.05, rng=rng)
    theta_ok = (len(rs_theta["singular"]) == 2
                and rs_theta["singular_mass_km1"] == 2.0)
    dt = time.monotonic() - t0
    report(2, ts_ok and pages_ok and theta_ok and dt < 5.0,
           f"singular H1 = {rs['singular_mass_km1']:.10f} (two spine "
           f"circles), theta H0 = {rs_theta['singular_mass_km1']:.0f}, "
           f"{dt:.1f}s")


def test_criterion_3_strainer_constants(chart_setups):
    rng = np.random.default_rng(3)
    all_ok = True
    details = []
    for name, (comp, s) in chart_setups.items():
        F = strainers.StrainerMap(comp=comp, points=s.points,
                                  opposites=s.opposites)
        k = s.k
        bound = 2 * math.sqrt(k) + 0.05
        eng = geo.engine(comp)
        pts = geo.ball_samples(comp, s.center, s.radius_estimate, 60, rng)
        vals = [F.value(p) for p in pts]
        lip = 0.0
        pairs = 0
        while pairs < 500:
            i, j = rng.integers(0, len(pts), size=2)
            if pts[int(i)] == pts[int(j)]:
                continue
            pairs += 1
            d, _ = eng.distance(pts[int(i)], pts[int(j)], need_path=False)
            lip = max(lip, float(np.linalg.norm(vals[int(i)] - vals[int(j)]))
                      / d)
        colip = 0.0
        for _ in range(30):
            xx = pts[int(rng.integers(0, len(pts)))]
            fx = F.value(xx)
            t = fx + s.radius_estimate * 0.2 * rng.uniform(-1, 1, k)
            try:
                track = flows.retract_to_fiber(
                    comp, strainers._as_strainer(F, xx, s.delta), xx,
                    target=t, tol=1e-7)
            except flows.FlowError:
                continue
            gap = float(np.linalg.norm(t - fx))
            if gap > 1e-12:
                d, _ = eng.distance(xx, track.final, need_path=False)
                colip = max(colip, d / gap)
        ok = lip <= bound and 0 < colip <= bound
        all_ok = all_ok and ok
        details.append(f"{name}: Lip {lip:.3f}, coLip {colip:.3f} <= "
                       f"{bound:.3f}")
    # Prop 8.5: derivative oscillation along >= 200 geodesics
    osc_ok = True
    worst_osc = 0.0
    checked = 0
    for name in ("torus_k2", "page_k2"):
        comp, s = chart_setups[name]
        k = s.k
        cap = 4 * s.delta * math.sqrt(k) * 1.1
        pts = geo.ball_samples(comp, s.center, s.radius_estimate, 40,
                               rng)
        done = 0
        while done < 100:
            i, j = rng.integers(0, len(pts), size=2)
            a, b = pts[int(i)], pts[int(j)]
            if a == b:
                continue
            done += 1
            da = _derivative(comp, s, a, b)
            db = _derivative(comp, s, b, a)
            osc = float(np.linalg.norm(da + db))   # db is the reversed end
            checked += 1
            worst_osc = max(worst_osc, osc)
            if osc > cap:
                osc_ok = False
    report(3, all_ok and osc_ok and checked >= 200,
           "; ".join(details) + f"; dF oscillation worst {worst_osc:.4f} "
           f"<= {4 * 0.04 * math.sqrt(2) * 1.1:.4f} on {checked} geodesics")


def _derivative(comp, s, a, b):
    """Coordinates of (F o gamma)'(0) for the geodesic a -> b."""
    out = []
    for p in s.points:
        ang = geo.angle(comp, a, p, b)
        out.append(-math.cos(ang))
    return np.array(out)


def test_criterion_4_retraction_flow(chart_setups):
    rng = np.random.default_rng(4)
    t0 = time.monotonic()
    ok = True
    worst_diam_ratio = 0.0
    runs = 0
    for name in ("torus_k2", "page_k2"):
        comp, s = chart_setups[name]
        F = strainers.StrainerMap(comp=comp, points=s.points,
                                  opposites=s.opposites)
        eng = geo.engine(comp)
        fx = F.value(s.center)
        for y in geo.ball_samples(comp, s.center, s.radius_estimate, 50,
                                  rng):
            runs += 1
            track = flows.retract_to_fiber(comp, s, s.center, y=y, tol=1e-6)
            gap = float(np.linalg.norm(F.value(y) - fx))
            dyx, _ = eng.distance(s.center, y, need_path=False)
            diam = track.diameter(comp)
            if gap > 1e-9:
                worst_diam_ratio = max(worst_diam_ratio,
                                       diam / (8 * s.k * gap))
            mono = all(b <= a + 1e-8 for a, b in
                       zip(track.dist_to_center, track.dist_to_center[1:]))
            inside = all(d <= dyx + 1e-9 for d in track.dist_to_center)
            if not (track.residual <= 1e-6
                    and diam <= 8 * s.k * gap * 1.05 + 1e-9
                    and mono and inside):
                ok = False
    dt = time.monotonic() - t0
    report(4, ok and runs >= 100 and dt < 30.0,
           f"{runs} flows, residuals <= 1e-6, diameter ratio worst "
           f"{worst_diam_ratio:.3f} <= 1.05, distances nonincreasing, "
           f"{dt:.1f}s")


def test_criterion_5_dichotomy(chart_setups):
    rng = np.random.default_rng(5)
    comp, s2 = chart_setups["torus_k2"]
    res_t = flows.fiber_dichotomy(comp, s2, (s2.center, s2.radius_estimate),
                                  samples=18, rng=rng)
    ts, s1 = chart_setups["page_k1"]
    res_s = flows.fiber_dichotomy(ts, s1, (s1.center, s1.radius_estimate),
                                  samples=18, rng=rng)
    ok = (res_t["verdict"] == "injective"
          and res_s["verdict"] == "fibers-non-discrete"
          and res_s["min_spread"] >= s1.radius_estimate / 2
          and not res_t["mixed_evidence"] and not res_s["mixed_evidence"])
    report(5, ok,
           f"torus 2-strainer: {res_t['verdict']}; page 1-strainer: "
           f"{res_s['verdict']} (spread {res_s['min_spread']:.2e} >= "
           f"{s1.radius_estimate / 2:.2e}); no mixed evidence")


def test_criterion_6_bgp(spaces):
    rng = np.random.default_rng(6)
    line = [0.0, 1.0, 3.0, 9.0, 27.0]
    d = np.abs(np.subtract.outer(line, line))
    S = cv.FiniteMetricSpace(list(range(5)), d)
    idx = strainers.bgp_select(S, 4, 2.0)
    ok = strainers.bgp_verify(S, idx, 2.0)
    for _ in range(50):
        pts = rng.random((40, 2))
        dm = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        S40 = cv.FiniteMetricSpace(list(range(40)), dm)
        tup = strainers.bgp_select(S40, 3, 2.0)
        ok = ok and strainers.bgp_verify(S40, tup, 2.0)
    report(6, ok, f"line tuple {[line[i] for i in idx]} and 50 random "
           "40-point sets verified at (M, L) = (3, 2)")


def test_criterion_7_linf_embedding(spaces):
    rng = np.random.default_rng(7)
    torus = spaces["torus"]
    out = cv.linf_embed(torus, torus_point(torus, 0.5, 0.5), r0=0.12,
                        delta=0.2, n_pairs=80, rng=rng)
    ok = (out["worst_distortion"] <= 1.2
          and out["worst_upper_violation"] <= 1e-9)
    report(7, ok, f"m = {out['m']}, worst distortion "
           f"{out['worst_distortion']:.4f} <= 1.2, upper side exact "
           f"(violation {out['worst_upper_violation']:.1e})")


def test_criterion_8_tangent_gh(spaces):
    rng = np.random.default_rng(8)
    ts = spaces["ts"]
    tc = cv.tangent_convergence(ts, square_point(ts, 0, 0.0, 0.4),
                                [0.4, 0.2, 0.1, 0.05], rng=rng)
    vals = [r["gh_upper"] for r in tc["rows"]]
    seq_ok = tc["trend_ok"] and vals[-1] < 0.05
    oracle_ok = True
    for _ in range(100):
        n, m = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        A, B = rng.random((n, 2)), rng.random((m, 2))
        SA = cv.FiniteMetricSpace(list(range(n)),
                                  np.linalg.norm(A[:, None] - A[None],
                                                 axis=2))
        SB = cv.FiniteMetricSpace(list(range(m)),
                                  np.linalg.norm(B[:, None] - B[None],
                                                 axis=2))
        if cv.gh_upper(SA, SB, rng=rng) < cv.gh_exact_small(SA, SB) - 1e-12:
            oracle_ok = False
    report(8, seq_ok and oracle_ok,
           f"spine rescaling GH bounds {[round(v, 4) for v in vals]} "
           "decreasing below 0.05; heuristic >= exact on 100 instances")


def test_criterion_9_sphere_vs_link(spaces):
    rng = np.random.default_rng(9)
    t0 = time.monotonic()
    theta, torus, ts = spaces["theta"], spaces["torus"], spaces["ts"]
    cases = [
        (theta, theta_point(theta, 0, 0.0), [0.2, 0.1], (3, 0)),
        (torus, torus_point(torus, 0.3, 0.6), [0.1, 0.05], (1, 1)),
        (ts, square_point(ts, 0, 0.0, 0.4), [0.1, 0.05], (1, 2)),
    ]
    ok = True
    details = []
    for compx, x, radii, expect in cases:
        res = flows.sphere_vs_link_check(compx, x, radii, rng=rng)
        good = (res["link_betti"] == expect
                and all(row["match"] for row in res["per_radius"])
                and res["stable_up_to"] == max(radii))
        ok = ok and good
        details.append(f"{expect}")
    dt = time.monotonic() - t0
    report(9, ok and dt < 60.0,
           f"betti agreement {details} stable across both radii, {dt:.1f}s")


def test_criterion_10_dc_charts(chart_setups):
    rng = np.random.default_rng(10)
    ok_len = True
    worst_len = 0.0
    alpha_ok = True
    for name in ("torus_k2", "page_k2"):
        comp, s = chart_setups[name]
        ch = charts.build_chart(comp, s, s.center, rng=rng)
        eng = geo.engine(comp)
        pts = geo.ball_samples(comp, s.center, ch.radius, 25, rng)
        done = 0
        while done < 50:
            i, j = rng.integers(0, len(pts), size=2)
            a, b = pts[int(i)], pts[int(j)]
            if a == b:
                continue
            done += 1
            d, path = eng.distance(a, b)
            poly = [path.point_at(u) for u in np.linspace(0, d, 6)]
            cl = charts.chart_length(ch, poly)
            rel = abs(cl - d) / d
            worst_len = max(worst_len, rel)
            if rel > 0.01:
                ok_len = False
        rep = charts.alpha_special(ch, rng=rng)
        alpha = 1.0 / (4.0 * s.k * s.k)
        if not (rep["checked"] > 0 and
                rep["worst_directional_derivative"] <= -(alpha - 1e-3)):
            alpha_ok = False
    # DC length stability on the torus
    torus = chart_setups["torus_k2"][0]

    def seg_curve(y0, n=60):
        return [torus_point(torus, 0.2 + 0.5 * u, y0)
                for u in np.linspace(0, 1, n)]

    def zigzag(amp, m, n=200):
        return [torus_point(torus, 0.2 + 0.5 * u,
                            0.3 + amp * math.sin(2 * PI * m * u))
                for u in np.linspace(0, 1, n)]

    lim = seg_curve(0.3)
    pos1 = charts.dc_length_stability(
        torus, [seg_curve(0.3 + 0.02 / 2**i) for i in range(4)], lim,
        norm_bound=6.0, rng=rng)
    pos2 = charts.dc_length_stability(
        torus, [zigzag(0.02 / 2**i, 2) for i in range(5)], lim,
        norm_bound=9.0, rng=rng)
    neg = charts.dc_length_stability(
        torus, [zigzag(0.02 / 2**i, 2 * 2**i) for i in range(5)], lim,
        norm_bound=9.0, rng=rng)
    dc_ok = (pos1["accepted"] and pos1["final_gap"] <= 1e-3
             and pos2["accepted"] and pos2["final_gap"] <= 1e-3
             and not neg["accepted"])
    report(10, ok_len and alpha_ok and dc_ok,
           f"chart lengths worst rel err {worst_len:.4f} <= 0.01 on 100 "
           f"geodesics; alpha-special at 1/(4k^2) - 1e-3; DC families "
           f"gaps {pos1['final_gap']:.1e}/{pos2['final_gap']:.1e}, "
           "unbounded-turning control rejected")
