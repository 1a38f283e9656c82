"""Strained points, strainer maps, straining radii, bad sets and the
strainer-extension exceptional set.

A point is (k, delta)-strained when its space of directions contains a
delta-spherical k-tuple; the associated strainer map collects the distance
functions to realizing points and behaves like an almost-submersion: it is
2*sqrt(k)-Lipschitz and 2*sqrt(k)-open for delta <= 1/(4k), its composition
with geodesics has derivative oscillation at most 4*delta*sqrt(k), and where
it cannot be extended by one more coordinate the points form uniformly
finite fibers on which the map is biLipschitz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geodesics as geo
from . import links as lk
from .complexes import ComplexPoint, MetricComplex, star
from .config import Settings

PI = math.pi


class StrainerError(Exception):
    pass


@dataclass
class Strainer:
    """A realized (k, delta)-strainer at a point, with opposites."""

    center: ComplexPoint
    points: list[ComplexPoint]
    opposites: list[ComplexPoint]
    delta: float
    angle_matrix: np.ndarray       # angles p_i x p_j and p_i x q_j stacked
    radius_estimate: float = 0.0   # straining-radius estimate

    @property
    def k(self) -> int:
        return len(self.points)


@dataclass
class StrainerMap:
    """Distance map y -> (d(p_1, y), ..., d(p_k, y))."""

    comp: MetricComplex
    points: list[ComplexPoint]
    opposites: list[ComplexPoint] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return len(self.points)

    def value(self, y: ComplexPoint) -> np.ndarray:
        key = y.key()
        hit = self._cache.get(key)
        if hit is None:
            eng = geo.engine(self.comp)
            hit = np.array([eng.distance(p, y, need_path=False)[0]
                            for p in self.points])
            if len(self._cache) < 200000:
                self._cache[key] = hit
        return hit

    def coordinate_paths(self, y: ComplexPoint):
        eng = geo.engine(self.comp)
        return [eng.distance(y, p)[1] for p in self.points]


# ---------------------------------------------------------------------------
# strained-point detection


def directions_to(comp: MetricComplex, x: ComplexPoint,
                  targets) -> list:
    """Link points of the initial directions of the geodesics x -> target."""
    L = lk.link_at(comp, x)
    out = []
    for t in targets:
        _, v = geo.log_map(comp, x, t)
        if v is None:
            raise StrainerError("target coincides with the base point")
        out.append(L.locate(v))
    return out


def check_opposite_tuples(L: lk.LinkSpace, vs, ws, delta: float,
                          margin: float = 1e-9):
    """Def. 6.3 for the pair of tuples (vs, ws) at level delta.

    Returns (ok, worst) where worst is the largest violation in radians."""
    worst = -math.inf
    ok = True
    for v, w in zip(vs, ws):
        _, _, s = lk.is_delta_spherical(L, v, w, delta, margin)
        worst = max(worst, s - PI - delta)
        if s >= PI + delta - margin:
            ok = False
    k = len(vs)
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            checks = [L.dist(vs[i], vs[j]), L.dist(vs[i], ws[j]),
                      L.dist(ws[i], ws[j])]
            for d in checks:
                worst = max(worst, d - (PI / 2 + delta))
                if d >= PI / 2 + delta - margin:
                    ok = False
    return ok, worst


def is_strained(comp: MetricComplex, x: ComplexPoint, k: int, delta: float,
                reach: float = 0.2, estimate_radius: bool = False,
                settings: Settings | None = None) -> Strainer | None:
    """Search the link of x for a delta-spherical k-tuple and realize it as
    strainer points at distance `reach` (halved until minimizing).

    The straining-radius estimate is an extra sampled computation; pass
    estimate_radius=True (or call straining_radius) when it is needed."""
    cfg = settings or comp.settings
    L = lk.link_at(comp, x)
    found = lk.find_spherical_tuple(L, k, delta, cfg)
    if found is None:
        return None
    eng = geo.engine(comp)
    pts, opps = [], []
    r = reach
    for _ in range(6):
        try:
            pts = [_realize_point(comp, x, L, v, r) for v in found["v"]]
            opps = [_realize_point(comp, x, L, w, r) for w in found["vbar"]]
        except geo.NoContinuation:
            return None
        dists = [eng.distance(x, p, need_path=False)[0] for p in pts + opps]
        if all(abs(d - r) <= 1e-7 * max(1.0, r) for d in dists):
            break
        r /= 2.0
    angles = _angle_matrix(comp, x, pts, opps)
    s = Strainer(center=x, points=pts, opposites=opps, delta=delta,
                 angle_matrix=angles)
    if estimate_radius:
        s.radius_estimate = min(r / 2.0, straining_radius(
            comp, s, n_ball=4, n_probe=4, settings=cfg))
    else:
        # conservative default scale; refine with straining_radius on demand
        s.radius_estimate = 0.25 * max(s.delta, 1e-3) * r
    return s


def _realize_point(comp, x, L, linkpoint, r) -> ComplexPoint:
    state = L.realize(linkpoint)
    if state is None:
        raise StrainerError("link point carries no realization")
    path, _ = geo.shoot_from_state(comp, x, state, r)
    return path.end


def _angle_matrix(comp, x, pts, opps) -> np.ndarray:
    k = len(pts)
    M = np.zeros((k, 2 * k))
    for i in range(k):
        for j in range(k):
            if i != j:
                M[i, j] = geo.angle(comp, x, pts[i], pts[j])
            M[i, k + j] = geo.angle(comp, x, pts[i], opps[j])
    return M


def verify_strainer(comp: MetricComplex, s: Strainer,
                    settings: Settings | None = None):
    """Re-derive the starting directions and check Def. 6.3 at level delta,
    plus consistency of the stored angle matrix with angle()."""
    cfg = settings or comp.settings
    L = lk.link_at(comp, s.center)
    vs = directions_to(comp, s.center, s.points)
    ws = directions_to(comp, s.center, s.opposites)
    ok, worst = check_opposite_tuples(L, vs, ws, 2 * s.delta)
    fresh = _angle_matrix(comp, s.center, s.points, s.opposites)
    consistent = bool(np.max(np.abs(fresh - s.angle_matrix)) <= 1e-6)
    return ok and consistent, worst


def is_one_strainer_at(comp: MetricComplex, p: ComplexPoint, x: ComplexPoint,
                       delta: float,
                       settings: Settings | None = None) -> bool:
    """Is p a (1, delta)-strainer at x: the direction (xp)' is
    delta-spherical in the link of x."""
    cfg = settings or comp.settings
    if p == x:
        return False
    L = lk.link_at(comp, x)
    _, v = geo.log_map(comp, x, p)
    vpt = L.locate(v)
    vbar, s = lk._best_opposite(L, vpt)
    return vbar is not None and s < PI + delta - cfg.strict_margin


def natural_strainer_radius(comp: MetricComplex, p: ComplexPoint,
                            delta: float, radii=None, n_dirs: int = 8,
                            rng: np.random.Generator | None = None,
                            settings: Settings | None = None) -> float:
    """Largest grid radius rho such that p is a (1, delta)-strainer at
    sampled points of B_rho(p) - {p}."""
    rng = rng or np.random.default_rng(comp.settings.seed)
    if radii is None:
        radii = [0.4, 0.2, 0.1, 0.05]
    best = 0.0
    for rho in sorted(radii):
        pts = geo.ball_samples(comp, p, rho, n_dirs, rng)
        ok = True
        for x in pts:
            if x == p:
                continue
            if not is_one_strainer_at(comp, p, x, delta, settings):
                ok = False
                break
        if ok and pts:
            best = rho
    return best


# ---------------------------------------------------------------------------
# differentials


def euclidean_point(comp: MetricComplex, x: ComplexPoint,
                    angular_tol: float = 1e-3) -> bool:
    """Link is the round circle of length 2*pi (dimension-2 complexes)."""
    sdim = max(comp.cells[c].dim for c in star(comp, x))
    if sdim != comp.dim:
        return False
    if sdim != 2:
        # 1-dimensional: Euclidean iff exactly two directions at pi
        L = lk.link_at(comp, x)
        return len(L.nodes) == 2 and not L.arcs
    L = lk.link_at(comp, x)
    b0, b1 = L.betti()
    total = sum(a.length for a in L.arcs)
    degree_ok = _all_degree_two(L)
    return (b0, b1) == (1, 1) and degree_ok and \
        abs(total - 2 * PI) <= angular_tol


def _all_degree_two(L: lk.LinkSpace) -> bool:
    deg = [0] * len(L.nodes)
    for a in L.arcs:
        if a.i == a.j:
            deg[a.i] += 2
        else:
            deg[a.i] += 1
            deg[a.j] += 1
    return all(d == 2 for d in deg)


def strainer_jacobian(comp: MetricComplex, F: StrainerMap,
                      x: ComplexPoint) -> np.ndarray:
    """Rows: minus the unit vectors at x toward the p_i, in an orthonormal
    frame of the carrier cell (k x carrier-dim).  Requires a Euclidean point
    whose star is one cell or two cells glued along a codim-1 face."""
    if not euclidean_point(comp, x):
        raise StrainerError("point is not Euclidean: no linear differential")
    cell = comp.cells[x.cid]
    rows = []
    for p in F.points:
        _, v = geo.log_map(comp, x, p)
        if v is None:
            raise StrainerError("strainer point coincides with x")
        vec = _into_frame(comp, x, v)
        rows.append(-vec)
    return np.asarray(rows)


def _into_frame(comp: MetricComplex, x: ComplexPoint, v: geo.Direction):
    """Express a direction at x in the frame of x's canonical carrier cell,
    developing across the shared codim-1 face when needed."""
    if v.cid == x.cid:
        return v.array()
    cell = comp.cells[x.cid]
    if len(x.carrier) != cell.nverts and len(x.carrier) == cell.dim:
        # x interior of a codim-1 face shared by both cells: develop v.cid
        # across it into x.cid's plane
        root = comp.face_root(x.cid, x.carrier)
        members = dict(comp.face_class_members(root))
        tup_here = x.carrier
        my_corr = comp.face_corr(x.cid, tup_here)
        co = cell.coords
        e0, e1 = co[tup_here[0]], co[tup_here[1]]
        inside = co[next(s for s in range(cell.nverts) if s not in tup_here)]
        side = geo._side(e0, e1, inside)
        for (mcid, mtup) in comp.face_class_members(root):
            if mcid != v.cid or (mcid, mtup) == (x.cid, tup_here):
                continue
            mcorr = comp.face_corr(mcid, mtup)
            root_to_m = {mcorr[p]: mtup[p] for p in range(len(mtup))}
            pair = [root_to_m[my_corr[p]] for p in range(len(tup_here))]
            iso = geo._place_cell(comp.cells[mcid], pair, e0, e1, -side)
            if iso is None:
                continue
            A, _ = iso
            return A @ v.array()
    raise StrainerError("direction not expressible in the carrier frame")


def strainer_jacobian_fd(comp: MetricComplex, F: StrainerMap,
                         x: ComplexPoint, h: float = 1e-5) -> np.ndarray:
    """Finite-difference differential along the carrier's coordinate frame
    (oracle for strainer_jacobian at interior points)."""
    cell = comp.cells[x.cid]
    if len(x.carrier) != cell.nverts:
        raise StrainerError("finite differences need an interior point")
    eng = geo.engine(comp)
    xy = x.xy(comp)
    base = F.value(x)
    cols = []
    for d in range(cell.dim):
        e = np.zeros(cell.dim)
        e[d] = h
        y = ComplexPoint(comp, x.cid, eng.bary_from_xy(x.cid, xy + e))
        cols.append((F.value(y) - base) / h)
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# openness and straining radius


def verify_openness(comp: MetricComplex, F: StrainerMap, region, n: int,
                    rng: np.random.Generator | None = None,
                    settings: Settings | None = None) -> dict:
    """Empirical Lipschitz and co-Lipschitz constants of F on a ball region.

    Lip: max ||F(x)-F(y)|| / d(x,y) over sampled pairs.  co-Lip: targets t
    near F(x) are hit by the retraction flow; the certified witness is
    d(x, flow endpoint) / ||t - F(x)||."""
    from . import flows
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    center, radius = region
    eng = geo.engine(comp)
    pts = geo.ball_samples(comp, center, radius, max(12, n // 8), rng)
    lip = 0.0
    for _ in range(n):
        i, j = rng.integers(0, len(pts), size=2)
        xx, yy = pts[int(i)], pts[int(j)]
        if xx == yy:
            continue
        d, _ = eng.distance(xx, yy, need_path=False)
        lip = max(lip, float(np.linalg.norm(F.value(xx) - F.value(yy))) / d)
    colip = 0.0
    failures = 0
    n_targets = max(8, n // 16)
    for _ in range(n_targets):
        xx = pts[int(rng.integers(0, len(pts)))]
        fx = F.value(xx)
        step = radius * 0.2
        t = fx + step * rng.uniform(-1.0, 1.0, size=F.k)
        try:
            track = flows.retract_to_fiber(comp, _as_strainer(F, xx), xx,
                                           target=t, tol=1e-7,
                                           settings=cfg)
        except flows.FlowError:
            failures += 1
            continue
        d, _ = eng.distance(xx, track.final, need_path=False)
        gap = float(np.linalg.norm(t - fx))
        if gap > 1e-12:
            colip = max(colip, d / gap)
    return {"lipschitz": lip, "colipschitz": colip,
            "target_failures": failures,
            "bound": 2.0 * math.sqrt(F.k)}


def _as_strainer(F: StrainerMap, x: ComplexPoint,
                 delta: float = 0.05) -> Strainer:
    if F.opposites is None:
        raise StrainerError("strainer map lacks opposite points")
    k = len(F.points)
    return Strainer(center=x, points=F.points, opposites=F.opposites,
                    delta=delta, angle_matrix=np.zeros((k, 2 * k)))


def straining_radius(comp: MetricComplex, s: Strainer, radii=None,
                     n_ball: int = 6, n_probe: int = 6,
                     rng: np.random.Generator | None = None,
                     settings: Settings | None = None) -> float:
    """Largest grid radius eps such that extensions q_i of p_i y beyond
    sampled y in B_eps(x) give opposite (k, 2*delta)-strainers on sampled
    points of B_eps(y)."""
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    eng = geo.engine(comp)
    reach = float(np.median([eng.distance(s.center, p, need_path=False)[0]
                             for p in s.points]))
    if radii is None:
        # cross angles drift by about 2*eps/reach; the grid cap keeps the
        # drift inside the 2*delta budget of the opposite check
        cap = 0.5 * max(s.delta, 1e-3) * reach
        radii = [cap, cap / 2, cap / 4, cap / 8]
    best = 0.0
    for eps in sorted(radii):
        ok = True
        ys = [s.center] + geo.ball_samples(comp, s.center, eps, n_ball, rng)
        for y in ys:
            try:
                # opposites live at the strainer's reach beyond y
                qs = [extend_through(comp, p, y, reach) for p in s.points]
            except geo.NoContinuation:
                ok = False
                break
            zs = [y] + geo.ball_samples(comp, y, eps, n_probe, rng)
            for z in zs:
                if any(z == p for p in s.points) or any(z == q for q in qs):
                    continue
                L = lk.link_at(comp, z)
                try:
                    vs = directions_to(comp, z, s.points)
                    ws = directions_to(comp, z, qs)
                except StrainerError:
                    continue
                good, _ = check_opposite_tuples(L, vs, ws, 2 * s.delta)
                if not good:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            best = eps
    return best


def extend_through(comp: MetricComplex, p: ComplexPoint, y: ComplexPoint,
                   length: float) -> ComplexPoint:
    """A point q on a continuation of the geodesic p y beyond y."""
    _, path = geo.engine(comp).distance(p, y)
    ext, _, _ = geo.extend_geodesic(comp, path, length)
    return ext.end


# ---------------------------------------------------------------------------
# bad sets and the BGP selection lemma


def bad_set_greedy(comp: MetricComplex, region, delta: float,
                   budget: int = 400,
                   rng: np.random.Generator | None = None,
                   settings: Settings | None = None) -> dict:
    """Greedy maximal subset of samples from `region` in which no member is
    a (1, delta)-strainer at another member (vertices tried first)."""
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    center, radius = region
    eng = geo.engine(comp)
    candidates = []
    for vp in geo.engine(comp).vertex_points():
        d, _ = eng.distance(center, vp, need_path=False)
        if d <= radius:
            candidates.append(vp)
    candidates += geo.ball_samples(comp, center, radius,
                                   max(4, budget // 16), rng)
    chosen: list[ComplexPoint] = []
    used = 0
    exhausted = False
    for z in candidates:
        used += 1
        if used > budget:
            exhausted = True
            break
        if any(z == t for t in chosen):
            continue
        bad = True
        for t in chosen:
            if is_one_strainer_at(comp, t, z, delta, cfg) or \
               is_one_strainer_at(comp, z, t, delta, cfg):
                bad = False
                break
        if bad:
            chosen.append(z)
    if len(chosen) > cfg.c0_ceiling:
        raise StrainerError(
            f"bad set exceeds the configured C0 ceiling {cfg.c0_ceiling}")
    return {"points": chosen, "size": len(chosen),
            "budget_exhausted": exhausted}


def bgp_select(S, M: int, L: float):
    """An M-tuple with d(x_i, x_{i+1}) >= L * d(x_i, x_k) for all
    1 <= k <= i <= M-1 (indices into S).

    S is a FiniteMetricSpace.  The covering recursion from the selection
    lemma's proof runs first; below its cardinality threshold a deterministic
    lexicographic DFS searches directly before failing."""
    idx = _bgp_recursive(S, list(range(S.n)), M, L)
    if idx is None:
        idx = _bgp_dfs(S, M, L)
    if idx is None:
        raise StrainerError("no admissible tuple found (set too small)")
    assert bgp_verify(S, idx, L)
    return idx


def _bgp_recursive(S, subset, M: int, L: float):
    if M == 1:
        return [min(subset)] if subset else None
    pts = subset
    if len(pts) < 2:
        return None
    D = max(S.d(i, j) for i in pts for j in pts)
    if D == 0.0:
        return None
    target = D / (2.0 * L)
    # greedy covering by balls of radius target/2 around farthest points
    centers = [pts[0]]
    while True:
        rest = [p for p in pts
                if min(S.d(p, c) for c in centers) > target / 2]
        if not rest:
            break
        far = max(rest, key=lambda p: min(S.d(p, c) for c in centers))
        centers.append(far)
    pieces: dict[int, list] = {c: [] for c in centers}
    for p in pts:
        c = min(centers, key=lambda c2: (S.d(p, c2), c2))
        pieces[c].append(p)
    piece = max(pieces.values(), key=len)
    head = _bgp_recursive(S, piece, M - 1, L)
    if head is None:
        return None
    lastd = {p: S.d(p, head[-1]) for p in pts}
    cands = [p for p in pts if lastd[p] >= D / 2]
    if not cands:
        return None
    tail = min(cands)
    tup = head + [tail]
    return tup if bgp_verify(S, tup, L) else None


def _bgp_dfs(S, M: int, L: float, node_cap: int = 2_000_000):
    order = sorted(range(S.n))
    chosen: list[int] = []
    budget = [node_cap]

    def ok_next(c: int) -> bool:
        i = len(chosen) - 1   # index of current last element
        # adding c as x_{i+2}: need d(x_{i+1}, c) >= L * d(x_{i+1}, x_k) for
        # all k <= i+1
        last = chosen[-1]
        req = max(S.d(last, chosen[k]) for k in range(len(chosen)))
        return S.d(last, c) >= L * req - 1e-12 and c not in chosen

    def rec() -> bool:
        if len(chosen) == M:
            return True
        for c in order:
            budget[0] -= 1
            if budget[0] <= 0:
                return False
            if not chosen:
                chosen.append(c)
                if rec():
                    return True
                chosen.pop()
            elif ok_next(c):
                chosen.append(c)
                if rec():
                    return True
                chosen.pop()
        return False

    return chosen if rec() else None


def bgp_verify(S, idx, L: float) -> bool:
    """Exhaustive check of the selection inequalities for a concrete tuple."""
    M = len(idx)
    for i in range(M - 1):
        for k in range(i + 1):
            if S.d(idx[i], idx[i + 1]) < L * S.d(idx[i], idx[k]) - 1e-12:
                return False
    return True


# ---------------------------------------------------------------------------
# extension of strainer maps


def extension_exceptional_set(comp: MetricComplex, F: StrainerMap, region,
                              samples: int = 40, delta: float = 0.05,
                              reach: float = 0.2,
                              rng: np.random.Generator | None = None,
                              settings: Settings | None = None) -> dict:
    """Sampled points of the region where no candidate extra point yields a
    (k+1, 12*delta)-strainer; reports per-fiber counts and the empirical
    lower bound on ||F(x)-F(x')|| / d(x,x') over close pairs in E."""
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    center, radius = region
    eng = geo.engine(comp)
    pts = geo.ball_samples(comp, center, radius, samples, rng)
    exceptional = []
    best_deltas = []
    for x in pts:
        L = lk.link_at(comp, x)
        vs = directions_to(comp, x, F.points)
        extended = False
        # candidates: a net on the link resolves every geometrically
        # distinct extra direction (mirrors the delta*r0-net on the
        # distance sphere plus fiber mates)
        for cand in L.samples(cfg.angular_resolution * 8):
            tup = vs + [cand]
            okpair = True
            for i in range(len(tup)):
                for j in range(i + 1, len(tup)):
                    d = L.dist(tup[i], tup[j])
                    if not (PI / 2 - 2 * 12 * delta < d < PI / 2 + 12 * delta):
                        okpair = False
                        break
                if not okpair:
                    break
            if not okpair:
                continue
            vbar, s = lk._best_opposite(L, cand)
            if vbar is None or s >= PI + 12 * delta - cfg.strict_margin:
                continue
            ws = [lk._best_opposite(L, v)[0] for v in vs] + [vbar]
            ok, _ = check_opposite_tuples(L, tup, ws, 12 * delta)
            if ok:
                extended = True
                break
        if not extended:
            exceptional.append(x)
            best_deltas.append(lk.find_spherical_tuple.last_score)
    # fiberwise counts at the map's resolution
    fibers: dict = {}
    for x in exceptional:
        key = tuple(np.round(F.value(x) / (radius * 0.1)).astype(int))
        fibers.setdefault(key, []).append(x)
    counts = {k: len(v) for k, v in fibers.items()}
    if counts and max(counts.values()) > cfg.c1_ceiling:
        raise StrainerError("per-fiber exceptional count exceeds C1 ceiling")
    # biLipschitz witness over close pairs
    lower = math.inf
    for i in range(len(exceptional)):
        for j in range(i + 1, len(exceptional)):
            a, b = exceptional[i], exceptional[j]
            d, _ = eng.distance(a, b, need_path=False)
            if d < 1e-9 or d > radius:
                continue
            lower = min(lower,
                        float(np.linalg.norm(F.value(a) - F.value(b))) / d)
    return {"points": exceptional, "fiber_counts": counts,
            "bilipschitz_lower": lower,
            "sample_count": len(pts)}
