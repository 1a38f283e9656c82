"""Distances, geodesics, angles and the logarithmic/contraction maps.

The engine for complexes of dimension <= 2 is exact: corridors of cells are
unfolded isometrically into the plane (radius-pruned breadth-first search
over developments, deduplicated by placement), straight candidates are
validated by walking the ray through the complex, and paths that bend at
vertices are assembled by a Dijkstra layer threaded over the vertex classes.
Complexes of dimension >= 3 fall back to an eps-net graph plus convex
straightening; that route carries the configured multiplicative accuracy
eta instead of exactness.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .complexes import ComplexPoint, MetricComplex
from .config import Settings


class GeodesicError(Exception):
    pass


class Disconnected(GeodesicError):
    pass


class NoContinuation(GeodesicError):
    """No extension at angle >= pi - tol: completeness failure at this point."""


# ---------------------------------------------------------------------------
# path and direction types


@dataclass(frozen=True)
class Direction:
    """Unit tangent vector at a point, in its carrier cell's shape coords.

    `anchor` is the barycentric expression of the base point inside the
    carrier cell; it disambiguates which corner/edge slot the vector sits at
    when the base point's face class meets the carrier in several slots."""

    base: ComplexPoint
    cid: int
    vec: tuple
    anchor: tuple = ()

    def array(self) -> np.ndarray:
        return np.asarray(self.vec)

    def anchor_xy(self, comp: MetricComplex) -> np.ndarray:
        return np.asarray(self.anchor) @ comp.cells[self.cid].coords


@dataclass
class GeodesicPath:
    """Polyline through cells: per-segment carrier and barycentric endpoints."""

    comp: MetricComplex
    segs: list          # (cid, bary0, bary1) per segment; may be empty
    length: float
    deviations: list    # turning deviation from pi at interior breakpoints

    @property
    def points(self) -> list[ComplexPoint]:
        if not self.segs:
            return [self._single]
        pts = [ComplexPoint(self.comp, self.segs[0][0], self.segs[0][1])]
        for cid, _, b1 in self.segs:
            pts.append(ComplexPoint(self.comp, cid, b1))
        return pts

    @property
    def start(self) -> ComplexPoint:
        return self.points[0]

    @property
    def end(self) -> ComplexPoint:
        return self.points[-1]

    def seg_lengths(self) -> list[float]:
        out = []
        for cid, b0, b1 in self.segs:
            co = self.comp.cells[cid].coords
            out.append(float(np.linalg.norm((b1 - b0) @ co)))
        return out

    def point_at(self, s: float) -> ComplexPoint:
        """Point at arclength s from the start (clamped to [0, length])."""
        if not self.segs:
            return self._single
        s = min(max(s, 0.0), self.length)
        for (cid, b0, b1), ls in zip(self.segs, self.seg_lengths()):
            if s <= ls or ls == 0.0:
                f = 0.0 if ls == 0.0 else s / ls
                return ComplexPoint(self.comp, cid, (1 - f) * b0 + f * b1)
            s -= ls
        cid, _, b1 = self.segs[-1]
        return ComplexPoint(self.comp, cid, b1)

    def _seg_dir(self, i: int, at_end: bool):
        cid, b0, b1 = self.segs[i]
        co = self.comp.cells[cid].coords
        v = (np.asarray(b1) - np.asarray(b0)) @ co
        n = np.linalg.norm(v)
        anchor = b1 if at_end else b0
        base = ComplexPoint(self.comp, cid, anchor)
        return Direction(base=base, cid=cid, vec=tuple(v / n),
                         anchor=tuple(anchor))

    def direction_at_start(self) -> Direction | None:
        if not self.segs or self.length == 0.0:
            return None
        return self._seg_dir(0, at_end=False)

    def direction_at_end(self) -> Direction | None:
        if not self.segs or self.length == 0.0:
            return None
        return self._seg_dir(len(self.segs) - 1, at_end=True)

    def is_local_geodesic(self, tol: float) -> bool:
        return all(d <= tol for d in self.deviations)

    def reversed(self) -> "GeodesicPath":
        segs = [(cid, b1, b0) for cid, b0, b1 in reversed(self.segs)]
        p = GeodesicPath(self.comp, segs, self.length,
                         list(reversed(self.deviations)))
        if not segs:
            p._single = self._single
        return p

    def to_json_dict(self) -> dict:
        return {
            "length": float(self.length),
            "segments": [
                {"cell": int(cid), "from": [float(v) for v in b0],
                 "to": [float(v) for v in b1]}
                for cid, b0, b1 in self.segs
            ],
            "deviations": [float(d) for d in self.deviations],
        }


def _trivial_path(comp: MetricComplex, x: ComplexPoint) -> GeodesicPath:
    p = GeodesicPath(comp, [], 0.0, [])
    p._single = x
    return p


def concatenate(a: GeodesicPath, b: GeodesicPath,
                junction_deviation: float = 0.0) -> GeodesicPath:
    segs = list(a.segs) + list(b.segs)
    devs = list(a.deviations)
    if a.segs and b.segs:
        devs = devs + [junction_deviation] + list(b.deviations)
    else:
        devs = devs + list(b.deviations)
    p = GeodesicPath(a.comp, segs, a.length + b.length, devs)
    if not segs:
        p._single = a._single
    return p


# ---------------------------------------------------------------------------
# planar development tree (dim <= 2)


@dataclass
class _Dev:
    cid: int
    A: np.ndarray        # 2x2 orthogonal
    t: np.ndarray        # translation: dev = A @ local + t
    root_cid: int        # cell of the root development this one grew from
    root_xy: np.ndarray  # source position in the root cell's local coords


class _SourceTree:
    """Placements of 2-cells reachable from a source point by unfolding,
    pruned at a radius; the source sits at the origin of the dev plane."""

    def __init__(self, engine: "GeodesicEngine", x: ComplexPoint, radius: float):
        self.engine = engine
        self.comp = engine.comp
        self.x = x
        self.radius = radius
        self.devs: list[_Dev] = []
        self.by_cell: dict[int, list[int]] = {}
        self.truncated = False
        self._build()

    def _build(self):
        comp = self.comp
        seen = set()
        queue: list[int] = []
        head = 0
        for cid, bary in self.x.representations(comp):
            if comp.cells[cid].dim != 2:
                continue
            xy = np.asarray(bary) @ comp.cells[cid].coords
            dev = _Dev(cid=cid, A=np.eye(2), t=-xy, root_cid=cid, root_xy=xy)
            self._push(dev, seen, queue)
        cap = self.engine.settings.max_developments
        while head < len(queue):
            if len(self.devs) > cap:
                self.truncated = True
                break
            idx = queue[head]
            head += 1
            dev = self.devs[idx]
            cell = comp.cells[dev.cid]
            n = cell.nverts
            corners = cell.coords @ dev.A.T + dev.t
            for drop in range(n):
                tup = tuple(v for v in range(n) if v != drop)
                e0, e1 = corners[tup[0]], corners[tup[1]]
                if _seg_dist_origin(e0, e1) > self.radius:
                    continue
                inside = corners[drop]
                side = _side(e0, e1, inside)
                root = comp.face_root(dev.cid, tup)
                members = comp.face_class_members(root)
                if len(members) < 2:
                    continue
                my_corr = comp.face_corr(dev.cid, tup)
                for (mcid, mtup) in members:
                    if (mcid, mtup) == (dev.cid, tup):
                        continue
                    if comp.cells[mcid].dim != 2:
                        continue
                    mcorr = comp.face_corr(mcid, mtup)
                    root_to_m = {mcorr[p]: mtup[p] for p in range(len(mtup))}
                    pair = [root_to_m[my_corr[p]] for p in range(len(tup))]
                    iso = _place_cell(comp.cells[mcid], pair, e0, e1, -side)
                    if iso is None:
                        continue
                    A2, t2 = iso
                    ndev = _Dev(cid=mcid, A=A2, t=t2,
                                root_cid=dev.root_cid, root_xy=dev.root_xy)
                    self._push(ndev, seen, queue)

    def _push(self, dev: _Dev, seen: set, queue: list):
        key = (dev.cid,
               tuple(np.round(dev.A.ravel(), 9)),
               tuple(np.round(dev.t, 9)))
        if key in seen:
            return
        seen.add(key)
        self.devs.append(dev)
        queue.append(len(self.devs) - 1)
        self.by_cell.setdefault(dev.cid, []).append(len(self.devs) - 1)

    def _cell_arrays(self, cid: int):
        if not hasattr(self, "_arrays"):
            self._arrays = {}
        hit = self._arrays.get(cid)
        if hit is None:
            idxs = self.by_cell.get(cid, [])
            A = np.stack([self.devs[i].A for i in idxs]) if idxs else \
                np.zeros((0, 2, 2))
            t = np.stack([self.devs[i].t for i in idxs]) if idxs else \
                np.zeros((0, 2))
            hit = (idxs, A, t)
            self._arrays[cid] = hit
        return hit

    def candidates(self, y: ComplexPoint):
        """Straight candidates (length, root_cid, root_xy, direction) in
        increasing length order; deduplicated lazily so early exits stay
        cheap."""
        comp = self.comp
        lns_all = []
        recs = []
        for cid, bary in y.representations(comp):
            if comp.cells[cid].dim != 2:
                continue
            xy = np.asarray(bary) @ comp.cells[cid].coords
            idxs, A, t = self._cell_arrays(cid)
            if not idxs:
                continue
            ps = A @ xy + t
            lns = np.hypot(ps[:, 0], ps[:, 1])
            ok = (lns <= self.radius + 1e-12) & (lns > 1e-15)
            for pos in np.nonzero(ok)[0]:
                dev = self.devs[idxs[pos]]
                lns_all.append(lns[pos])
                recs.append((dev.root_cid, dev.root_xy, ps[pos]))
        if not recs:
            return
        order = np.argsort(np.asarray(lns_all), kind="stable")
        seen = set()
        for oi in order:
            rcid, rxy, p = recs[int(oi)]
            ln = lns_all[int(oi)]
            key = (rcid, round(float(ln), 10),
                   round(float(p[0]), 8), round(float(p[1]), 8))
            if key in seen:
                continue
            seen.add(key)
            yield (float(ln), rcid, rxy, p / ln)


def _seg_dist_origin(e0, e1) -> float:
    d = e1 - e0
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.hypot(*e0))
    t = min(max(-(e0 @ d) / L2, 0.0), 1.0)
    return float(np.hypot(*(e0 + t * d)))


def _side(e0, e1, p) -> float:
    return float(np.sign((e1[0] - e0[0]) * (p[1] - e0[1])
                         - (e1[1] - e0[1]) * (p[0] - e0[0])))


def _reflect_about(u):
    return np.array([[u[0]**2 - u[1]**2, 2 * u[0] * u[1]],
                     [2 * u[0] * u[1], u[1]**2 - u[0]**2]])


def _place_cell(cell, pair, e0, e1, want_side):
    """Isometry (A, t) of `cell` placing vertex pair[0] at e0, pair[1] at e1,
    with the remaining vertex on the requested side of the gate line."""
    q0 = cell.coords[pair[0]]
    q1 = cell.coords[pair[1]]
    v_local = q1 - q0
    v_dev = e1 - e0
    nl = np.linalg.norm(v_local)
    nd = np.linalg.norm(v_dev)
    if nl < 1e-15 or abs(nl - nd) > 1e-7 * max(1.0, nd):
        return None
    ul, ud = v_local / nl, v_dev / nd
    c = ul[0] * ud[0] + ul[1] * ud[1]
    s = ul[0] * ud[1] - ul[1] * ud[0]
    rot = np.array([[c, -s], [s, c]])
    for A in (rot, rot @ _reflect_about(ul)):
        t = e0 - A @ q0
        if np.linalg.norm(A @ q1 + t - e1) > 1e-7 * max(1.0, nd):
            continue
        others = [v for v in range(cell.nverts) if v not in pair]
        w = A @ cell.coords[others[0]] + t
        sd = _side(e0, e1, w)
        if want_side == 0.0 or sd == want_side or sd == 0.0:
            return A, t
    return None


# ---------------------------------------------------------------------------
# ray walking (exact straight propagation through 2-cells)


class _RayOutcome:
    __slots__ = ("status", "segs", "cid", "xy", "vec", "counts")

    def __init__(self, status, segs, cid=None, xy=None, vec=None, counts=None):
        self.status = status      # "inside" | "corner" | "boundary" | "stuck"
        self.segs = segs
        self.cid = cid
        self.xy = xy
        self.vec = vec
        self.counts = counts or []


class GeodesicEngine:
    """Per-complex geodesic machinery with cached source trees.

    The complex is immutable; trees are built once per source point and
    reused, so concurrent read-only use is safe after a warm-up call.
    """

    def __init__(self, comp: MetricComplex, settings: Settings | None = None):
        self.comp = comp
        self.settings = settings or comp.settings
        self._bary = {}
        self._trees: dict = {}
        self._vertex_points = None
        self._vv = None
        self._vv_radius = -1.0
        self._edge_pos_cache: dict = {}
        self._chord = None
        self._scale = max(
            float(np.max(c.lengths)) if c.dim > 0 else 1.0 for c in comp.cells)

    # -- local linear algebra -------------------------------------------------

    def _solver(self, cid: int):
        if cid not in self._bary:
            cell = self.comp.cells[cid]
            M = (cell.coords[1:] - cell.coords[0]).T
            self._bary[cid] = np.linalg.inv(M)
        return self._bary[cid]

    def bary_from_xy(self, cid: int, xy) -> np.ndarray:
        cell = self.comp.cells[cid]
        lam = self._solver(cid) @ (np.asarray(xy) - cell.coords[0])
        b = np.empty(cell.nverts)
        b[1:] = lam
        b[0] = 1.0 - lam.sum()
        b = np.clip(b, 0.0, None)
        return b / b.sum()

    def bary_velocity(self, cid: int, w) -> np.ndarray:
        lam = self._solver(cid) @ np.asarray(w)
        db = np.empty(self.comp.cells[cid].nverts)
        db[1:] = lam
        db[0] = -lam.sum()
        return db

    # -- ray walking ------------------------------------------------------------

    def ray_walk_all(self, cid: int, xy, vec, length: float,
                     fork_limit: int = 64):
        """All straight continuations of the ray (forking at faces incident to
        three or more 2-cells).  Used to validate distance candidates."""
        results = []
        stack = [(cid, np.asarray(xy, float), np.asarray(vec, float),
                  length, [])]
        while stack and len(results) < fork_limit:
            state = stack.pop()
            out = self._ray_step(*state, fork=stack)
            if out is not None:
                results.append(out)
        return results

    def _ray_step(self, cid, q, w, rem, segs, fork=None, counts=None,
                  choose=None):
        comp = self.comp
        while True:
            cell = comp.cells[cid]
            b = self.bary_from_xy(cid, q)
            db = self.bary_velocity(cid, w)
            t_exit = math.inf
            for i in range(cell.nverts):
                if db[i] < -1e-12:
                    ti = 0.0 if b[i] <= 1e-9 else b[i] / -db[i]
                    if ti < t_exit:
                        t_exit = ti
            if t_exit >= rem - 1e-12:
                b_end = self.bary_from_xy(cid, q + rem * w)
                return _RayOutcome("inside", segs + [(cid, b, b_end)],
                                   cid=cid, xy=q + rem * w, vec=w,
                                   counts=counts)
            q_hit = q + t_exit * w
            b_hit = self.bary_from_xy(cid, q_hit)
            zero = [i for i in range(cell.nverts)
                    if b_hit[i] <= 1e-9 and db[i] < -1e-12]
            near_zero = [i for i in range(cell.nverts) if b_hit[i] <= 1e-9]
            if len(zero) == 0:
                return _RayOutcome("stuck", segs, cid=cid, xy=q_hit, vec=w,
                                   counts=counts)
            if len(near_zero) != 1:
                return _RayOutcome("corner", segs + [(cid, b, b_hit)],
                                   cid=cid, xy=q_hit, vec=w, counts=counts)
            tup = tuple(v for v in range(cell.nverts) if v != near_zero[0])
            root = comp.face_root(cid, tup)
            members = [m for m in comp.face_class_members(root)
                       if m != (cid, tup) and comp.cells[m[0]].dim == 2]
            if not members:
                return _RayOutcome("boundary", segs + [(cid, b, b_hit)],
                                   cid=cid, xy=q_hit, vec=w, counts=counts)
            segs = segs + [(cid, b, b_hit)]
            my_corr = comp.face_corr(cid, tup)
            e0, e1 = cell.coords[tup[0]], cell.coords[tup[1]]
            side = _side(e0, e1, cell.coords[zero[0]])
            branches = []
            for (mcid, mtup) in sorted(members):
                mcorr = comp.face_corr(mcid, mtup)
                root_to_m = {mcorr[p]: mtup[p] for p in range(len(mtup))}
                pair = [root_to_m[my_corr[p]] for p in range(len(tup))]
                iso = _place_cell(comp.cells[mcid], pair, e0, e1, -side)
                if iso is None:
                    continue
                A2, t2 = iso
                q2 = A2.T @ (q_hit - t2)
                w2 = A2.T @ w
                branches.append((mcid, q2, w2))
            if not branches:
                return _RayOutcome("boundary", segs, cid=cid, xy=q_hit,
                                   vec=w, counts=counts)
            if counts is not None:
                counts = counts + [len(branches)]
            if choose is not None and len(branches) > 1:
                branches = [branches[choose(branches)]]
            first = branches[0]
            if fork is not None:
                for br in branches[1:]:
                    fork.append((br[0], br[1], br[2], rem - t_exit, segs))
            cid, q, w = first
            rem -= t_exit

    def ray_walk_single(self, cid, xy, vec, length: float):
        """Deterministic single walk (first branch in (cid, tup) order),
        recording the branch count at each junction."""
        return self._ray_step(cid, np.asarray(xy, float),
                              np.asarray(vec, float), length, [],
                              fork=None, counts=[],
                              choose=lambda branches: 0)

    # -- edge (1-dimensional) candidates ----------------------------------------

    def _edge_positions(self, p: ComplexPoint):
        key = p.key()
        hit = self._edge_pos_cache.get(key)
        if hit is not None:
            return hit
        comp = self.comp
        out = []
        reps = p.representations(comp)
        for root in comp.face_classes(dim=1):
            rcid, rtup = root
            L = float(comp.cells[rcid].lengths[rtup[0], rtup[1]])
            for (mcid, mtup) in comp.face_class_members(root):
                corr = comp.face_corr(mcid, mtup)
                for cid, bary in reps:
                    if cid != mcid:
                        continue
                    if any(bary[v] > 1e-12 for v in range(len(bary))
                           if v not in mtup):
                        continue
                    w = {corr[pos]: float(bary[v])
                         for pos, v in enumerate(mtup)}
                    out.append((root, w.get(rtup[1], 0.0) * L, L))
        for cell in comp.cells:
            if cell.dim != 1:
                continue
            L = float(cell.lengths[0, 1])
            for cid, bary in reps:
                if cid == cell.cid:
                    out.append((("cell", cell.cid), float(bary[1]) * L, L))
        uniq = sorted(set((r, round(px, 12), L) for r, px, L in out))
        self._edge_pos_cache[key] = uniq
        return uniq

    def _edge_candidates(self, x: ComplexPoint, y: ComplexPoint):
        out = []
        ey = self._edge_positions(y)
        for (rx, px, L) in self._edge_positions(x):
            for (ry, py, _) in ey:
                if rx == ry:
                    out.append((abs(px - py), rx, px, py, L))
        out.sort(key=lambda c: c[0])
        return out

    def _edge_segments(self, root, px, py, L):
        comp = self.comp
        if root[0] == "cell":
            cid = root[1]
            b0 = np.array([1 - px / L, px / L])
            b1 = np.array([1 - py / L, py / L])
            return [(cid, b0, b1)]
        rcid, rtup = root
        nv = comp.cells[rcid].nverts
        b0 = np.zeros(nv)
        b1 = np.zeros(nv)
        b0[rtup[0]], b0[rtup[1]] = 1 - px / L, px / L
        b1[rtup[0]], b1[rtup[1]] = 1 - py / L, py / L
        return [(rcid, b0, b1)]

    # -- trees, direct distances, threading --------------------------------------

    def tree(self, x: ComplexPoint, radius: float) -> _SourceTree:
        key = x.key()
        hit = self._trees.get(key)
        if hit is not None and hit.radius >= radius - 1e-12:
            return hit
        if len(self._trees) > 6000:
            keep = {v.key() for v in self.vertex_points()}
            self._trees = {k: t for k, t in self._trees.items() if k in keep}
        t = _SourceTree(self, x, radius)
        self._trees[key] = t
        return t

    def vertex_points(self) -> list[ComplexPoint]:
        if self._vertex_points is None:
            from .complexes import vertex_point
            roots = sorted(self.comp.face_classes(dim=0))
            pts = []
            seen = set()
            for r in roots:
                vp = vertex_point(self.comp, r)
                if vp.key() not in seen:
                    seen.add(vp.key())
                    pts.append(vp)
            self._vertex_points = pts
        return self._vertex_points

    def _chord_graph(self):
        if self._chord is not None:
            return self._chord
        from .complexes import vertex_point
        comp = self.comp
        verts = self.vertex_points()
        vkeys = {v.key(): i for i, v in enumerate(verts)}
        self._vid_cache = {}
        for cell in comp.cells:
            for s in range(cell.nverts):
                root = comp.face_root(cell.cid, (s,))
                self._vid_cache[(cell.cid, s)] = vkeys[
                    vertex_point(comp, root).key()]

        def vid(cid, slot):
            return self._vid_cache[(cid, slot)]

        adj: dict[int, list] = {i: [] for i in range(len(verts))}
        for cell in comp.cells:
            if cell.dim == 0:
                continue
            ids = [vid(cell.cid, s) for s in range(cell.nverts)]
            for i in range(cell.nverts):
                for j in range(i + 1, cell.nverts):
                    w = float(cell.lengths[i, j])
                    adj[ids[i]].append((ids[j], w))
                    adj[ids[j]].append((ids[i], w))
        self._chord = (adj, vid)
        return self._chord

    def vid_map(self):
        self._chord_graph()
        return self._vid_cache

    def _coarse_bound(self, x: ComplexPoint, y: ComplexPoint) -> float:
        comp = self.comp
        base_adj, vid = self._chord_graph()
        n = len(self.vertex_points())
        SRC, DST = n, n + 1
        adj = {k: list(v) for k, v in base_adj.items()}
        adj[SRC], adj[DST] = [], []
        for node, p in ((SRC, x), (DST, y)):
            for cid, bary in p.representations(comp):
                cell = comp.cells[cid]
                if cell.dim == 0:
                    continue
                xy = np.asarray(bary) @ cell.coords
                for s in range(cell.nverts):
                    w = float(np.linalg.norm(xy - cell.coords[s]))
                    j = vid(cid, s)
                    adj[node].append((j, w))
                    adj[j] = adj.get(j, []) + [(node, w)]
        xreps = dict(x.representations(comp))
        for cid, ybary in y.representations(comp):
            if cid in xreps:
                co = comp.cells[cid].coords
                w = float(np.linalg.norm((xreps[cid] - ybary) @ co))
                adj[SRC].append((DST, w))
        dist = _dijkstra(adj, SRC)
        return dist.get(DST, math.inf)

    def _match_point(self, out: _RayOutcome, y: ComplexPoint) -> bool:
        tol = 1e-7 * max(1.0, self._scale)
        for cid, bary in y.representations(self.comp):
            if cid == out.cid:
                co = self.comp.cells[cid].coords
                if np.linalg.norm(np.asarray(bary) @ co - out.xy) <= tol:
                    return True
        return False

    def _direct(self, tree: _SourceTree, x: ComplexPoint, y: ComplexPoint):
        """Best single-stretch candidate (no bending at vertices).

        Returns (length, segments | None)."""
        best = math.inf
        best_segs = None
        for (d, root, px, py, L) in self._edge_candidates(x, y):
            best = d
            best_segs = self._edge_segments(root, px, py, L)
            break
        for (ln, rcid, rxy, u) in tree.candidates(y):
            if ln >= best - 1e-15:
                break
            for out in self.ray_walk_all(rcid, rxy, u, ln):
                if out.status == "inside" and self._match_point(out, y):
                    best = ln
                    best_segs = out.segs
                    break
        return best, best_segs

    def _vertex_table(self, radius: float):
        if self._vv is not None and self._vv_radius >= radius - 1e-12:
            return self._vv
        verts = self.vertex_points()
        table = {}
        for i, v in enumerate(verts):
            tv = self.tree(v, radius)
            for j, w in enumerate(verts):
                if i == j:
                    continue
                d, segs = self._direct(tv, v, w)
                if d < math.inf:
                    table[(i, j)] = (d, segs)
        self._vv = table
        self._vv_radius = radius
        return table

    # -- public distance ----------------------------------------------------------

    def distance(self, x: ComplexPoint, y: ComplexPoint, need_path: bool = True):
        """Geodesic distance; returns (length, GeodesicPath | None)."""
        comp = self.comp
        if x == y:
            return 0.0, (_trivial_path(comp, x) if need_path else None)
        if comp.dim >= 3:
            from . import highdim
            return highdim.distance(self, x, y, need_path)
        swap = False
        tx = self._trees.get(x.key())
        ty = self._trees.get(y.key())
        if tx is None and ty is not None:
            x, y, tx = y, x, ty
            swap = True
        if tx is not None:
            res = self._assemble(tx, x, y, need_path)
            if res is not None and res[0] <= tx.radius + 1e-12:
                return self._orient(res, swap, x)
        ub = self._coarse_bound(x, y)
        if math.isinf(ub):
            raise Disconnected("no path between the given points")
        R = ub * (1 + 1e-9) + 1e-12
        if tx is None or tx.radius < R:
            tx = self.tree(x, R)
        res = self._assemble(tx, x, y, need_path)
        if res is None:
            raise Disconnected("no path between the given points")
        return self._orient(res, swap, x)

    def _orient(self, res, swap: bool, x: ComplexPoint):
        total, path = res
        if path is not None and swap:
            path = path.reversed()
        return total, path

    def _assemble(self, tx: _SourceTree, x: ComplexPoint, y: ComplexPoint,
                  need_path: bool):
        """Dijkstra over {source} + vertex classes + {target} with exact
        direct pieces; returns (total, path|None) or None if unreachable
        within the available trees."""
        d0, segs0 = self._direct(tx, x, y)
        verts = self.vertex_points()
        if not hasattr(tx, "_to_vertex"):
            tx._to_vertex = {}
        for i, v in enumerate(verts):
            if i not in tx._to_vertex:
                tx._to_vertex[i] = self._direct(tx, x, v)
        # a path bending at a vertex is at least as long as the closest
        # vertex, so a shorter validated direct segment is already optimal
        if d0 < math.inf and all(dv >= d0 - 1e-12
                                 for dv, _ in tx._to_vertex.values()):
            if not need_path:
                return d0, None
            return d0, self._finalize_path(segs0, x)
        vtable = self._vertex_table(max(tx.radius, 2.0 * self._scale))
        n = len(verts)
        SRC, DST = n, n + 1
        adj: dict[int, list] = {i: [] for i in range(n + 2)}
        meta = {}
        for i, v in enumerate(verts):
            d, segs = tx._to_vertex[i]
            if d < math.inf:
                adj[SRC].append((i, d))
                meta[(SRC, i)] = segs
            tvi = self._trees.get(v.key())
            if tvi is not None:
                dy, sy = self._direct(tvi, v, y)
                if dy < math.inf:
                    adj[i].append((DST, dy))
                    meta[(i, DST)] = sy
        for (i, j), (d, segs) in vtable.items():
            adj[i].append((j, d))
            meta[(i, j)] = segs
        if d0 < math.inf:
            adj[SRC].append((DST, d0))
            meta[(SRC, DST)] = segs0
        dist, prev = _dijkstra(adj, SRC, with_prev=True)
        if DST not in dist:
            return None
        total = dist[DST]
        if not need_path:
            return total, None
        hops = []
        cur = DST
        while cur != SRC:
            p = prev[cur]
            hops.append((p, cur))
            cur = p
        hops.reverse()
        segs = []
        for hop in hops:
            segs.extend(meta[hop])
        return total, self._finalize_path(segs, x)

    def _finalize_path(self, segs, x: ComplexPoint) -> GeodesicPath:
        comp = self.comp
        clean = []
        for cid, b0, b1 in segs:
            co = comp.cells[cid].coords
            b0 = np.asarray(b0, float)
            b1 = np.asarray(b1, float)
            if np.linalg.norm((b1 - b0) @ co) < 1e-13:
                continue
            clean.append((cid, b0, b1))
        length = sum(
            float(np.linalg.norm((b1 - b0) @ comp.cells[cid].coords))
            for cid, b0, b1 in clean)
        path = GeodesicPath(comp, clean, length,
                            [0.0] * max(0, len(clean) - 1))
        if not clean:
            path._single = x
        return path


def _dijkstra(adj, src, with_prev=False):
    dist = {src: 0.0}
    prev = {}
    pq = [(0.0, src)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist.get(u, math.inf) + 1e-15:
            continue
        for (v, w) in adj.get(u, []):
            nd = d + w
            if nd < dist.get(v, math.inf) - 1e-15:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    if with_prev:
        return dist, prev
    return dist


def engine(comp: MetricComplex, settings: Settings | None = None) -> GeodesicEngine:
    eng = getattr(comp, "_geodesic_engine", None)
    if eng is None or (settings is not None and eng.settings is not settings):
        eng = GeodesicEngine(comp, settings)
        comp._geodesic_engine = eng
    return eng


# ---------------------------------------------------------------------------
# public operations


def distance(comp: MetricComplex, x: ComplexPoint, y: ComplexPoint,
             settings: Settings | None = None):
    """Distance and a geodesic path realizing it."""
    return engine(comp, settings).distance(x, y)


def comparison_angle(comp: MetricComplex, x: ComplexPoint, y: ComplexPoint,
                     z: ComplexPoint) -> float:
    """Euclidean comparison angle at x of the triangle xyz (kappa = 0)."""
    eng = engine(comp)
    a, _ = eng.distance(y, z, need_path=False)
    b, _ = eng.distance(x, y, need_path=False)
    c, _ = eng.distance(x, z, need_path=False)
    if b == 0.0 or c == 0.0:
        raise GeodesicError("degenerate triangle side")
    cosang = (b * b + c * c - a * a) / (2 * b * c)
    return math.acos(min(1.0, max(-1.0, cosang)))


def angle(comp: MetricComplex, x: ComplexPoint, y: ComplexPoint,
          z: ComplexPoint) -> float:
    """Angle at x between the geodesics xy and xz (link metric, in [0, pi])."""
    if x == y or x == z:
        raise GeodesicError("degenerate: y or z equals x")
    eng = engine(comp)
    _, pxy = eng.distance(x, y)
    _, pxz = eng.distance(x, z)
    return direction_angle(comp, x, pxy.direction_at_start(),
                           pxz.direction_at_start())


def direction_angle(comp: MetricComplex, x: ComplexPoint,
                    d1: Direction, d2: Direction) -> float:
    """Link distance between two directions based at x."""
    cell = comp.cells[x.cid]
    interior = len(x.carrier) == cell.nverts and cell.dim >= 1
    if interior and d1.cid == d2.cid:
        cosang = float(np.dot(d1.array(), d2.array()))
        return math.acos(min(1.0, max(-1.0, cosang)))
    from . import links
    L = links.link_at(comp, x)
    return links.link_distance(L, L.locate(d1), L.locate(d2))


def log_map(comp: MetricComplex, x: ComplexPoint, y: ComplexPoint):
    """(t, Direction): distance and initial direction of xy; (0, None) at x."""
    if x == y:
        return 0.0, None
    d, path = engine(comp).distance(x, y)
    return d, path.direction_at_start()


def contraction(comp: MetricComplex, x: ComplexPoint, R: float, r: float,
                y: ComplexPoint) -> ComplexPoint:
    """Point at parameter (r/R) * d(x,y) along the geodesic xy."""
    if not (0 < r <= R):
        raise GeodesicError("need 0 < r <= R")
    d, path = engine(comp).distance(x, y)
    if d == 0.0:
        return x
    return path.point_at((r / R) * d)


# ---------------------------------------------------------------------------
# shooting and extension


def shoot(comp: MetricComplex, x: ComplexPoint, direction: Direction,
          length: float, settings: Settings | None = None):
    """Walk a local geodesic from x with the given initial direction.

    Returns (GeodesicPath, junction_counts).  Branches are resolved
    deterministically (smallest continuation carrier); counts record the
    number of admissible continuations at each junction passed."""
    cid = direction.cid
    cell = comp.cells[cid]
    anchor = np.asarray(direction.anchor if direction.anchor
                        else dict(x.representations(comp))[cid])
    vec = direction.array()
    if cell.dim == 1:
        L = float(cell.lengths[0, 1])
        state = ("edge", cid, float(anchor[1]) * L,
                 1.0 if vec[0] >= 0 else -1.0)
    else:
        state = ("ray", cid, anchor @ cell.coords, vec)
    return shoot_from_state(comp, x, state, length, settings)


def shoot_from_state(comp: MetricComplex, x: ComplexPoint, state: tuple,
                     length: float, settings: Settings | None = None):
    """Like `shoot`, starting from a walker state ("edge", cid, t, sgn) or
    ("ray", cid, xy, vec) as produced by the link realization."""
    eng = engine(comp, settings)
    cfg = settings or comp.settings
    segs: list = []
    counts: list[int] = []
    rem = length
    while rem > 1e-12:
        if state[0] == "ray":
            _, rcid, q, w = state
            out = eng.ray_walk_single(rcid, q, w, rem)
            segs.extend(out.segs)
            counts.extend(out.counts)
            walked = sum(
                float(np.linalg.norm((np.asarray(b1) - np.asarray(b0))
                                     @ comp.cells[c].coords))
                for c, b0, b1 in out.segs)
            rem -= walked
            if out.status == "inside" or rem <= 1e-12:
                break
            hit = ComplexPoint(comp, out.cid,
                               eng.bary_from_xy(out.cid, out.xy))
            back = Direction(base=hit, cid=out.cid,
                             vec=tuple(-np.asarray(out.vec)),
                             anchor=tuple(eng.bary_from_xy(out.cid, out.xy)))
            state = _continue_past(comp, hit, back, counts, cfg)
        else:
            _, ecid, tpos, sgn = state
            L = float(comp.cells[ecid].lengths[0, 1])
            target = L if sgn > 0 else 0.0
            step = min(rem, abs(target - tpos))
            npos = tpos + sgn * step
            b0 = np.array([1 - tpos / L, tpos / L])
            b1 = np.array([1 - npos / L, npos / L])
            if step > 1e-15:
                segs.append((ecid, b0, b1))
            rem -= step
            if rem <= 1e-12:
                break
            hit = ComplexPoint(comp, ecid, b1)
            back = Direction(base=hit, cid=ecid, vec=(-sgn,),
                             anchor=tuple(b1))
            state = _continue_past(comp, hit, back, counts, cfg)
    path = eng._finalize_path(segs, x)
    return path, counts


def _continue_past(comp, hit, back: Direction, counts, cfg):
    """Continuation states at distance >= pi from `back` in the link at hit."""
    from . import links
    L = links.link_at(comp, hit)
    back_pt = L.locate(back)
    conts = links.antipodes(L, back_pt, cfg.angle_tolerance * 10 + 1e-9)
    states = [links.realize(L, p) for p in conts]
    states = [s for s in states if s is not None]
    if not states:
        raise NoContinuation(f"no continuation at {hit!r} within tolerance")
    states.sort(key=_state_order)
    counts.append(len(states))
    return states[0]


def _state_order(state):
    if state[0] == "edge":
        return (state[1], 0, (state[3],))
    return (state[1], 1, tuple(np.round(state[3], 9)))


def extend_geodesic(comp: MetricComplex, path: GeodesicPath, delta: float,
                    settings: Settings | None = None):
    """Extend a verified local geodesic by arclength delta beyond its end.

    Returns (extended_path, continuation_count, per_junction_counts)."""
    cfg = settings or comp.settings
    if not path.is_local_geodesic(cfg.angle_tolerance):
        raise GeodesicError("input path fails the local-geodesic certificate")
    d_end = path.direction_at_end()
    if d_end is None:
        raise GeodesicError("cannot extend a trivial path")
    tail, counts = shoot(comp, path.end, d_end, delta, settings)
    ext = concatenate(path, tail)
    branching = [c for c in counts if c > 1]
    return ext, (branching[0] if branching else 1), counts


# ---------------------------------------------------------------------------
# sampled tests and helpers


def uniform_point(comp: MetricComplex, rng: np.random.Generator) -> ComplexPoint:
    """Uniform random point of the top-dimensional part."""
    cells = [c for c in comp.cells if c.dim == comp.dim]
    vols = np.array([max(c.volume, 1e-300) for c in cells])
    idx = int(rng.choice(len(cells), p=vols / vols.sum()))
    cell = cells[idx]
    b = rng.dirichlet(np.ones(cell.nverts))
    return ComplexPoint(comp, cell.cid, b)


def cat_sample_test(comp: MetricComplex, region, n: int,
                    rng: np.random.Generator | None = None,
                    settings: Settings | None = None) -> dict:
    """Sampled comparison test over n random triangles: worst excess of the
    measured angle over the comparison angle, and of the midpoint distance
    over the comparison median.  `region` is a point sampler or None."""
    rng = rng or np.random.default_rng(comp.settings.seed)
    eng = engine(comp, settings)
    sampler = region if callable(region) else (lambda g: uniform_point(comp, g))
    worst_angle = 0.0
    worst_mid = 0.0
    for _ in range(n):
        x, y, z = sampler(rng), sampler(rng), sampler(rng)
        if x == y or x == z or y == z:
            continue
        try:
            ang = angle(comp, x, y, z)
            comp_ang = comparison_angle(comp, x, y, z)
        except GeodesicError:
            continue
        worst_angle = max(worst_angle, ang - comp_ang)
        dyz, pyz = eng.distance(y, z)
        m = pyz.point_at(dyz / 2.0)
        dxm, _ = eng.distance(x, m, need_path=False)
        b, _ = eng.distance(x, y, need_path=False)
        c, _ = eng.distance(x, z, need_path=False)
        med = math.sqrt(max(0.0, (2 * b * b + 2 * c * c - dyz * dyz) / 4.0))
        worst_mid = max(worst_mid, dxm - med)
    return {"worst_angle_excess": worst_angle,
            "worst_midpoint_excess": worst_mid}


def log_almost_isometry_check(comp: MetricComplex, x: ComplexPoint,
                              eps: float, radii=None, n_pairs: int = 40,
                              rng: np.random.Generator | None = None) -> float:
    """Largest tested radius r such that sampled pairs y1, y2 in B_r(x)
    satisfy |d(y1,y2) - d_cone(log y1, log y2)| <= eps * r."""
    from . import links
    rng = rng or np.random.default_rng(comp.settings.seed)
    eng = engine(comp)
    L = links.link_at(comp, x)
    if radii is None:
        radii = [0.4, 0.2, 0.1, 0.05]
    best = 0.0
    for r in sorted(radii):
        pts = ball_samples(comp, x, r, 2 * n_pairs, rng)
        ok = len(pts) >= 2
        for _ in range(n_pairs):
            if len(pts) < 2:
                break
            i, j = rng.integers(0, len(pts), size=2)
            y1, y2 = pts[int(i)], pts[int(j)]
            if y1 == y2:
                continue
            d12, _ = eng.distance(y1, y2, need_path=False)
            t1, v1 = log_map(comp, x, y1)
            t2, v2 = log_map(comp, x, y2)
            if v1 is None or v2 is None:
                dc = abs(t1 - t2)
            else:
                a = links.link_distance(L, L.locate(v1), L.locate(v2))
                dc = math.sqrt(max(
                    0.0, t1 * t1 + t2 * t2 - 2 * t1 * t2 * math.cos(a)))
            if abs(d12 - dc) > eps * r + 1e-9:
                ok = False
                break
        if ok:
            best = max(best, r)
    return best


def candidate_cells(comp: MetricComplex, x: ComplexPoint, r: float):
    """Top-dimensional cells that can meet B_r(x) (vertex-distance prune)."""
    cache = getattr(comp, "_cand_cells", None)
    if cache is None:
        cache = {}
        comp._cand_cells = cache
    key = (x.key(), round(r, 9))
    hit = cache.get(key)
    if hit is not None:
        return hit
    eng = engine(comp)
    verts = eng.vertex_points()
    vdist = [eng.distance(x, vp, need_path=False)[0] for vp in verts]
    vids = eng.vid_map()
    keep = []
    for c in comp.cells:
        if c.dim != comp.dim:
            continue
        diam = float(np.max(c.lengths))
        dmin = min(vdist[vids[(c.cid, s)]] for s in range(c.nverts))
        if dmin - diam <= r:
            keep.append(c)
    cache[key] = keep
    return keep


def ball_samples(comp: MetricComplex, x: ComplexPoint, r: float, n: int,
                 rng: np.random.Generator) -> list[ComplexPoint]:
    """n points sampled uniformly from B_r(x).

    Small radii (below a tenth of the shortest edge, where the exponential
    map is injective on nonpositively curved complexes) sample in exponential
    coordinates: a link direction weighted by arc length and a sqrt-uniform
    radius, realized by shooting.  Larger radii fall back to rejection over
    the cells that can meet the ball."""
    if comp.dim == 2 and r <= 0.1 * _min_edge(comp):
        pts = _exp_ball_samples(comp, x, r, n, rng)
        if pts is not None:
            return pts
    eng = engine(comp)
    cells = candidate_cells(comp, x, r) or \
        [c for c in comp.cells if c.dim == comp.dim]
    vols = np.array([max(c.volume, 1e-300) for c in cells])
    probs = vols / vols.sum()
    out = []
    trials = 0
    while len(out) < n and trials < 400 * n:
        trials += 1
        cell = cells[int(rng.choice(len(cells), p=probs))]
        y = ComplexPoint(comp, cell.cid, rng.dirichlet(np.ones(cell.nverts)))
        d, _ = eng.distance(x, y, need_path=False)
        if d <= r:
            out.append(y)
    return out


def _min_edge(comp: MetricComplex) -> float:
    best = math.inf
    for c in comp.cells:
        if c.dim == 0:
            continue
        L = c.lengths + np.eye(c.nverts) * 1e18
        best = min(best, float(np.min(L)))
    return best


def _exp_ball_samples(comp, x, r, n, rng):
    from . import links as lk
    L = lk.link_at(comp, x)
    if not L.arcs:
        return None
    lens = np.array([a.length for a in L.arcs])
    probs = lens / lens.sum()
    out = []
    for _ in range(n):
        ai = int(rng.choice(len(L.arcs), p=probs))
        theta = float(rng.random()) * L.arcs[ai].length
        t = r * math.sqrt(float(rng.random()))
        state = L.realize(("arc", ai, theta))
        if state is None:
            return None
        try:
            path, _ = shoot_from_state(comp, x, state, t)
        except (GeodesicError, lk.LinkError):
            continue
        out.append(path.end)
    return out
