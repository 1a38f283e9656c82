"""Dimensional stratification and the canonical measure.

On complexes the k-dimensional part is combinatorial ground truth: a point
belongs to X^k when the top dimension of its star is k, so X^k is a union
of open faces and the canonical measure restricted to it is the total
k-volume of the maximal k-cells.  Ball-restricted masses run Monte Carlo
with proposals drawn from the exact unfolded-disk picture, so the sampler
concentrates on the ball and the reported standard error is honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geodesics as geo
from . import links as lk
from .complexes import ComplexPoint, MetricComplex, star, vertex_point
from .config import Settings


class StrataError(Exception):
    pass


# ---------------------------------------------------------------------------
# combinatorial strata


def _units(comp: MetricComplex):
    """Open units of the complex: cell interiors and face classes, with the
    dimension of their stars."""
    units = []
    for c in comp.cells:
        units.append({"kind": "cell", "id": c.cid, "dim": c.dim,
                      "star_dim": c.dim})
    for root in comp.face_classes():
        sdim = max(comp.cells[cid].dim for cid in comp.incident_cells(root))
        units.append({"kind": "face", "id": root, "dim": len(root[1]) - 1,
                      "star_dim": sdim})
    # a cell whose interior is glued into higher cells cannot occur (cells
    # are top cells by construction), so cell star_dim is its own dim
    return units


@dataclass
class StrataReport:
    units: list
    parts: dict          # k -> list of units with star_dim == k
    masses: dict         # k -> total H^k of X^k

    def to_json_dict(self) -> dict:
        return {
            "masses": {str(k): float(v) for k, v in sorted(self.masses.items())},
            "parts": {str(k): [_unit_name(u) for u in us]
                      for k, us in sorted(self.parts.items())},
        }


def _unit_name(u) -> str:
    if u["kind"] == "cell":
        return f"cell:{u['id']}"
    cid, tup = u["id"]
    return f"face:{cid}:{','.join(map(str, tup))}"


def strata(comp: MetricComplex) -> StrataReport:
    """Face-wise dimension assignment and per-k masses."""
    units = _units(comp)
    parts: dict[int, list] = {}
    for u in units:
        parts.setdefault(u["star_dim"], []).append(u)
    masses: dict[int, float] = {k: 0.0 for k in parts}
    for u in units:
        if u["kind"] == "cell" and u["dim"] == u["star_dim"]:
            masses[u["dim"]] += (1.0 if u["dim"] == 0
                                 else comp.simplex_volume(u["id"]))
    return StrataReport(units=units, parts=parts, masses=masses)


def unit_interior_points(comp: MetricComplex, u, n: int,
                         rng: np.random.Generator):
    """Interior sample points of a unit (its barycenter plus n random)."""
    if u["kind"] == "cell":
        cid = u["id"]
        nv = comp.cells[cid].nverts
        pts = [ComplexPoint(comp, cid, np.full(nv, 1.0 / nv))]
        for _ in range(n):
            pts.append(ComplexPoint(comp, cid, rng.dirichlet(np.ones(nv))))
        return pts
    cid, tup = u["id"]
    nv = comp.cells[cid].nverts
    pts = []
    b = np.zeros(nv)
    for v in tup:
        b[v] = 1.0 / len(tup)
    pts.append(ComplexPoint(comp, cid, b))
    for _ in range(n):
        b = np.zeros(nv)
        w = rng.dirichlet(np.ones(len(tup)))
        for pos, v in enumerate(tup):
            b[v] = w[pos]
        pts.append(ComplexPoint(comp, cid, b))
    return pts


def regular_set(comp: MetricComplex, k: int, delta: float,
                samples_per_unit: int = 2, reach: float = 0.15,
                rng: np.random.Generator | None = None,
                settings: Settings | None = None) -> dict:
    """Units of X^k whose sampled points are (k, delta)-strained, the
    singular complement inside the closure of X^k, and its (k-1)-mass.

    The paper's smallness convention for delta is delta0 = 1/(50 n0^2);
    larger deltas are accepted (the check is still well defined)."""
    from . import strainers
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    rep = strata(comp)
    regular = []
    singular = []
    closure_units = set()
    for u in rep.parts.get(k, []):
        closure_units.add(id(u))
    for u in rep.units:
        if u["star_dim"] != k:
            continue
        pts = unit_interior_points(comp, u, samples_per_unit, rng)
        ok = True
        for x in pts:
            s = strainers.is_strained(comp, x, k, delta, reach=reach,
                                      settings=cfg)
            if s is None:
                ok = False
                break
        (regular if ok else singular).append(u)
    mass_km1 = sum(
        comp.face_volume(u["id"]) if u["kind"] == "face"
        else comp.simplex_volume(u["id"])
        for u in singular if u["dim"] == k - 1)
    count_singular_points = sum(1 for u in singular if u["dim"] == 0)
    if k == 1:
        mass_km1 = float(count_singular_points)
    return {"regular": regular, "singular": singular,
            "singular_mass_km1": mass_km1,
            "delta0": 1.0 / (50.0 * comp.dim**2)}


# ---------------------------------------------------------------------------
# ball masses (Monte Carlo over unfolded disks)


def _disk_poly_area(center: np.ndarray, r: float, poly: np.ndarray) -> float:
    """Area of the intersection of a disk with a convex polygon (ccw)."""
    # Green's theorem over the clipped boundary: sum of straight and
    # circular-arc contributions
    c = np.asarray(center, float)
    pts = np.asarray(poly, float) - c
    n = len(pts)
    area = 0.0
    for i in range(n):
        p1 = pts[i]
        p2 = pts[(i + 1) % n]
        area += _edge_contrib(p1, p2, r)
    return abs(area)


def _edge_contrib(p1, p2, r):
    # contribution of one directed edge to the disk-polygon area integral
    d = p2 - p1
    a = float(d @ d)
    if a < 1e-30:
        return 0.0
    b = 2.0 * float(p1 @ d)
    cc = float(p1 @ p1) - r * r
    disc = b * b - 4 * a * cc
    inside1 = float(p1 @ p1) <= r * r + 1e-15
    inside2 = float(p2 @ p2) <= r * r + 1e-15

    def tri(q1, q2):
        return 0.5 * (q1[0] * q2[1] - q2[0] * q1[1])

    def sector(q1, q2):
        a1 = math.atan2(q1[1], q1[0])
        a2 = math.atan2(q2[1], q2[0])
        da = a2 - a1
        while da <= -math.pi:
            da += 2 * math.pi
        while da > math.pi:
            da -= 2 * math.pi
        return 0.5 * r * r * da

    if disc <= 0:
        # no chord: edge entirely inside (impossible here unless endpoints
        # inside) or entirely outside the disk
        return tri(p1, p2) if (inside1 and inside2) else sector(p1, p2)
    sq = math.sqrt(disc)
    t1 = (-b - sq) / (2 * a)
    t2 = (-b + sq) / (2 * a)
    ts = [t for t in (t1, t2) if 0.0 < t < 1.0]
    points = [p1] + [p1 + t * d for t in sorted(ts)] + [p2]
    total = 0.0
    for j in range(len(points) - 1):
        q1, q2 = points[j], points[j + 1]
        mid = 0.5 * (q1 + q2)
        if float(mid @ mid) <= r * r:
            total += tri(q1, q2)
        else:
            total += sector(q1, q2)
    return total


def ball_mass_2d(comp: MetricComplex, x: ComplexPoint, r: float,
                 target_rel_se: float = 0.005, max_samples: int = 40000,
                 rng: np.random.Generator | None = None) -> dict:
    """H^2 of B_r(x): Monte Carlo with proposals from the unfolded-disk
    cover of the ball.  Returns mass, standard error and sample count."""
    rng = rng or np.random.default_rng(comp.settings.seed)
    eng = geo.engine(comp)
    tree = eng.tree(x, r * (1 + 1e-9) + 1e-12)
    disks = []   # (cid, center_local, area, poly)
    for cid, idxs in tree.by_cell.items():
        cell = comp.cells[cid]
        if cell.dim != 2:
            continue
        poly = cell.coords
        for i in idxs:
            dev = tree.devs[i]
            center = dev.A.T @ (-dev.t)
            area = _disk_poly_area(center, r, poly)
            if area > 1e-18:
                disks.append((cid, center, area, poly))
    if not disks:
        return {"mass": 0.0, "se": 0.0, "n": 0}
    areas = np.array([d[2] for d in disks])
    A_tot = float(areas.sum())
    probs = areas / A_tot
    vals = []
    n = 0
    batch = 1500
    while n < max_samples:
        for _ in range(batch):
            j = int(rng.choice(len(disks), p=probs))
            cid, center, _, poly = disks[j]
            q = _sample_disk_poly(center, r, poly, rng)
            if q is None:
                vals.append(0.0)
                continue
            m = sum(1 for (c2, cen2, _, _) in disks
                    if c2 == cid and float((q - cen2) @ (q - cen2))
                    <= r * r + 1e-15)
            y = ComplexPoint(comp, cid, eng.bary_from_xy(cid, q))
            d, _ = eng.distance(x, y, need_path=False)
            vals.append((1.0 / m) if d <= r + 1e-12 else 0.0)
        n = len(vals)
        arr = np.asarray(vals)
        mean = float(arr.mean())
        se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        if mean > 0 and se <= target_rel_se * mean:
            break
    mass = A_tot * mean
    return {"mass": mass, "se": A_tot * se, "n": n}


def _sample_disk_poly(center, r, poly, rng, tries: int = 64):
    for _ in range(tries):
        ang = 2 * math.pi * float(rng.random())
        rad = r * math.sqrt(float(rng.random()))
        q = center + rad * np.array([math.cos(ang), math.sin(ang)])
        if _in_triangle(q, poly):
            return q
    return None


def _in_triangle(q, poly) -> bool:
    a, b, c = poly[0], poly[1], poly[2]
    v0, v1, v2 = c - a, b - a, q - a
    den = (v0[0] * v1[1] - v1[0] * v0[1])
    if abs(den) < 1e-30:
        return False
    u = (v2[0] * v1[1] - v1[0] * v2[1]) / den
    v = (v0[0] * v2[1] - v2[0] * v0[1]) / den
    return u >= -1e-12 and v >= -1e-12 and u + v <= 1 + 1e-12


def ball_mass_1d(comp: MetricComplex, x: ComplexPoint, r: float) -> float:
    """Exact H^1 of B_r(x) restricted to the 1-dimensional part X^1.

    Along an edge, d(x, .) = min(da + t, db + L - t, |t - own|); the
    sublevel set is a union of intervals with closed-form endpoints."""
    eng = geo.engine(comp)
    total = 0.0
    for cell in comp.cells:
        if cell.dim != 1:
            continue
        L = float(cell.lengths[0, 1])
        ends = [ComplexPoint(comp, cell.cid, np.array([1.0, 0.0])),
                ComplexPoint(comp, cell.cid, np.array([0.0, 1.0]))]
        da, _ = eng.distance(x, ends[0], need_path=False)
        db, _ = eng.distance(x, ends[1], need_path=False)
        intervals = [(0.0, r - da), (L - (r - db), L)]
        for (root, pos, _) in eng._edge_positions(x):
            if root == ("cell", cell.cid):
                intervals.append((pos - r, pos + r))
        clipped = sorted((max(0.0, a), min(L, b)) for a, b in intervals
                         if min(L, b) > max(0.0, a))
        cur = -1.0
        for a, b in clipped:
            lo = max(a, cur)
            if b > lo:
                total += b - lo
                cur = b
            cur = max(cur, b)
    return total


def canonical_measure(comp: MetricComplex, region=None,
                      target_rel_se: float | None = None,
                      rng: np.random.Generator | None = None,
                      settings: Settings | None = None) -> dict:
    """Per-k masses of the canonical measure on the whole complex (exact) or
    restricted to a ball (Monte Carlo for k = 2, exact intervals for k = 1,
    counts for k = 0)."""
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    if region is None:
        rep = strata(comp)
        return {"masses": dict(rep.masses), "errors": {k: 0.0 for k in rep.masses}}
    x, r = region
    target = target_rel_se if target_rel_se is not None else cfg.mc_target_rel_error
    masses: dict[int, float] = {}
    errors: dict[int, float] = {}
    rep = strata(comp)
    eng = geo.engine(comp)
    for k in rep.masses:
        if k == 2:
            out = ball_mass_2d(comp, x, r, target_rel_se=target, rng=rng)
            masses[2] = out["mass"]
            errors[2] = out["se"]
        elif k == 1:
            masses[1] = ball_mass_1d(comp, x, r)
            errors[1] = 0.0
        elif k == 0:
            cnt = 0
            for c in comp.cells:
                if c.dim == 0:
                    p = ComplexPoint(comp, c.cid, np.array([1.0]))
                    d, _ = eng.distance(x, p, need_path=False)
                    if d <= r:
                        cnt += 1
            masses[0] = float(cnt)
            errors[0] = 0.0
        else:
            raise StrataError("ball masses implemented for k <= 2")
    return {"masses": masses, "errors": errors}


# ---------------------------------------------------------------------------
# densities and dimension


def cone_unit_mass(L: lk.LinkSpace, k: int) -> float:
    """H^k of the unit ball of the Euclidean cone over the link."""
    if k == 2:
        return 0.5 * sum(a.length for a in L.arcs)
    if k == 1:
        touched = set()
        for a in L.arcs:
            touched.add(a.i)
            touched.add(a.j)
        return float(len(L.nodes) - len(touched))
    if k == 0:
        return 1.0 if not L.nodes else 0.0
    raise StrataError("cone masses implemented for k <= 2")


def density_at(comp: MetricComplex, x: ComplexPoint, k: int, radii,
               rng: np.random.Generator | None = None,
               settings: Settings | None = None) -> dict:
    """Table of mu^k(B_r(x)) / r^k over decreasing radii, with the tangent
    cone's unit-ball mass as the declared limit."""
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    L = lk.link_at(comp, x)
    limit = cone_unit_mass(L, k)
    rows = []
    for r in sorted(radii, reverse=True):
        m = canonical_measure(comp, (x, r), rng=rng, settings=cfg)
        rows.append({"radius": r, "density": m["masses"].get(k, 0.0) / r**k,
                     "se": m["errors"].get(k, 0.0) / r**k})
    return {"rows": rows, "cone_limit": limit,
            "final": rows[-1]["density"] if rows else math.nan}


def _net_counts(comp: MetricComplex, scales, pool: int,
                rng: np.random.Generator):
    """Greedy covering numbers at several scales.

    Distances from each chosen center to the pool are evaluated in bulk:
    minimum over the center's unfolded-tree candidates (plus the threading
    bound through vertex classes), which is the distance itself away from
    shadow boundaries.  Covering counts are insensitive to pool density, so
    the log-log slope estimates the dimension reliably."""
    eng = geo.engine(comp)
    verts = eng.vertex_points()
    nv = len(verts)
    vids = eng.vid_map()
    pts = [geo.uniform_point(comp, rng) for _ in range(pool)]
    xys = np.array([p.xy(comp) for p in pts]) if comp.dim == 2 else None
    cells = np.array([p.cid for p in pts])
    by_cell = {cid: np.nonzero(cells == cid)[0]
               for cid in set(cells.tolist())}
    tov = np.full((pool, nv), np.inf)
    for a, p in enumerate(pts):
        cell = comp.cells[p.cid]
        for s in range(cell.nverts):
            j = vids[(p.cid, s)]
            if cell.dim == 2:
                w = float(np.linalg.norm(xys[a] - cell.coords[s]))
            else:
                w = float(abs(p.bary[1 - s] * cell.lengths[0, 1]))
            tov[a, j] = min(tov[a, j], w)

    pool_edge_pos: dict = {}
    for a, p in enumerate(pts):
        for (root, posn, _) in eng._edge_positions(p):
            pool_edge_pos.setdefault(root, []).append((a, posn))
    pool_edge_pos = {root: (np.array([i for i, _ in lst]),
                            np.array([q for _, q in lst]))
                     for root, lst in pool_edge_pos.items()}

    def dists_from(center: ComplexPoint, radius: float) -> np.ndarray:
        out = np.full(pool, np.inf)
        tree = eng.tree(center, radius * 1.05)
        if comp.dim == 2:
            for cid, idx in by_cell.items():
                _, A, t = tree._cell_arrays(cid)
                if A.shape[0] == 0:
                    continue
                ps = np.einsum("nij,mj->nmi", A, xys[idx]) + t[:, None, :]
                lns = np.min(np.hypot(ps[..., 0], ps[..., 1]), axis=0)
                out[idx] = np.minimum(out[idx], lns)
        for (root, cpos, _) in eng._edge_positions(center):
            hit = pool_edge_pos.get(root)
            if hit is not None:
                idx, qs = hit
                out[idx] = np.minimum(out[idx], np.abs(qs - cpos))
        # threading through vertex classes
        cd = np.array([eng.distance(center, v, need_path=False)[0]
                       for v in verts])
        out = np.minimum(out, np.min(cd[None, :] + tov, axis=1))
        return out

    counts = []
    diam = 4.0 * max(float(np.max(c.lengths)) for c in comp.cells)
    for eps in scales:
        uncovered = np.ones(pool, dtype=bool)
        count = 0
        order = rng.permutation(pool)
        for i in order:
            if not uncovered[i]:
                continue
            count += 1
            d = dists_from(pts[int(i)], min(eps * 1.2, diam))
            uncovered &= d > eps
            uncovered[i] = False
        counts.append(count)
    return counts


def dimension_report(comp: MetricComplex, region=None,
                     rng: np.random.Generator | None = None,
                     settings: Settings | None = None) -> dict:
    """Topological dimension, box-counting estimate, max strained k, and a
    witness point with round-sphere link."""
    from . import convergence, strainers
    cfg = settings or comp.settings
    rng = rng or np.random.default_rng(cfg.seed)
    n = comp.dim
    # box counting from eps-net counts at three scales (vectorized distance
    # upper bound: same-cell chords and chords through the vertex graph)
    diam_est = max(float(np.max(c.lengths)) for c in comp.cells)
    scales = [diam_est / 8, diam_est / 16, diam_est / 32]
    counts = _net_counts(comp, scales, pool=10000, rng=rng)
    logs = np.log(np.array(counts, dtype=float))
    les = np.log(1.0 / np.array(scales))
    slope = float(np.polyfit(les, logs, 1)[0])
    # max strained k on samples: sweep upward, breaking at the first failing
    # level; the expensive k = n+1 refutation runs on a smaller sample
    kmax = 0
    witness = None
    samples = [geo.uniform_point(comp, rng) for _ in range(16)]
    for x in samples:
        k = kmax + 1
        while k <= n:
            s = strainers.is_strained(comp, x, k, 1.0 / (4.0 * k),
                                      reach=0.1, settings=cfg)
            if s is None:
                break
            kmax = k
            k += 1
        if witness is None and strainers.euclidean_point(comp, x):
            witness = x
    overshoot = 0
    for x in samples[:6]:
        k = n + 1
        if strainers.is_strained(comp, x, k, 1.0 / (4.0 * k), reach=0.1,
                                 settings=cfg) is not None:
            overshoot += 1
    return {"topological_dim": n, "box_counting": slope,
            "max_strained_k": max(kmax, n + 1 if overshoot else kmax),
            "overstrained_samples": overshoot,
            "euclidean_witness": witness}
