"""Fallback geometry for complexes of dimension >= 3.

Distances run on an eps-net graph (barycentric grids per cell, nodes joined
within shared cells) followed by convex straightening of the face-crossing
points inside the corridor the graph path selects; the result carries the
configured multiplicative tolerance eta rather than the exactness of the
planar engine.  Links are eps-net graphs of sampled directions with
comparison-angle weights at a declared angular resolution.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np
from scipy import optimize

from .complexes import ComplexPoint, MetricComplex


def _grid_barys(nv: int, m: int):
    """Barycentric lattice with denominator m on an (nv-1)-simplex."""
    for comb in itertools.combinations(range(m + nv - 1), nv - 1):
        prev = -1
        parts = []
        for c in comb:
            parts.append(c - prev - 1)
            prev = c
        parts.append(m + nv - 2 - prev)
        yield np.array(parts, dtype=float) / m


class _Net:
    def __init__(self, comp: MetricComplex, m: int):
        self.comp = comp
        self.points: list[ComplexPoint] = []
        seen = set()
        for cell in comp.cells:
            for b in _grid_barys(cell.nverts, m):
                p = ComplexPoint(comp, cell.cid, b)
                if p.key() not in seen:
                    seen.add(p.key())
                    self.points.append(p)
        self.adj = self._edges()

    def _cells_of(self, p: ComplexPoint):
        return {cid for cid, _ in p.representations(self.comp)}

    def _edges(self):
        comp = self.comp
        cells_of = [self._cells_of(p) for p in self.points]
        adj = {i: [] for i in range(len(self.points))}
        for i in range(len(self.points)):
            for j in range(i + 1, len(self.points)):
                shared = cells_of[i] & cells_of[j]
                if not shared:
                    continue
                w = min(self._chord(c, self.points[i], self.points[j])
                        for c in shared)
                adj[i].append((j, w))
                adj[j].append((i, w))
        return adj

    def _chord(self, cid, p, q):
        co = self.comp.cells[cid].coords
        bp = dict(p.representations(self.comp))[cid]
        bq = dict(q.representations(self.comp))[cid]
        return float(np.linalg.norm((np.asarray(bp) - np.asarray(bq)) @ co))


def _net(comp: MetricComplex, m: int) -> _Net:
    cache = getattr(comp, "_highdim_nets", None)
    if cache is None:
        cache = {}
        comp._highdim_nets = cache
    if m not in cache:
        cache[m] = _Net(comp, m)
    return cache[m]


def distance(engine, x: ComplexPoint, y: ComplexPoint, need_path: bool):
    """Net-graph Dijkstra plus corridor straightening, refined until the
    result moves by less than eta/3."""
    comp = engine.comp
    eta = engine.settings.geodesic_eta
    best = math.inf
    result = None
    for m in (2, 4, 8):
        net = _net(comp, m)
        length, corridor = _graph_path(net, x, y)
        if corridor is None:
            continue
        length2, segs = _straighten(comp, corridor, x, y)
        if length2 < best:
            prev = best
            best, result = length2, segs
            if prev < math.inf and abs(prev - best) <= eta / 3 * best:
                break
    if result is None:
        from .geodesics import Disconnected
        raise Disconnected("no path between the given points")
    path = engine._finalize_path(result, x)
    return best, (path if need_path else None)


def _graph_path(net: _Net, x, y):
    comp = net.comp
    pts = net.points + [x, y]
    SRC, DST = len(net.points), len(net.points) + 1
    adj = {i: list(v) for i, v in net.adj.items()}
    adj[SRC], adj[DST] = [], []
    xc = {cid for cid, _ in x.representations(comp)}
    yc = {cid for cid, _ in y.representations(comp)}
    for node, cells in ((SRC, xc), (DST, yc)):
        for i, p in enumerate(net.points):
            shared = cells & {cid for cid, _ in p.representations(comp)}
            if shared:
                w = min(net._chord(c, pts[node], p) for c in shared)
                adj[node].append((i, w))
                adj[i] = adj.get(i, []) + [(node, w)]
    if xc & yc:
        w = min(net._chord(c, x, y) for c in (xc & yc))
        adj[SRC].append((DST, w))
    dist, prev = {SRC: 0.0}, {}
    pq = [(0.0, SRC)]
    while pq:
        d, u = heapq.heappop(pq)
        if d > dist.get(u, math.inf):
            continue
        for v, w in adj.get(u, []):
            nd = d + w
            if nd < dist.get(v, math.inf) - 1e-15:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(pq, (nd, v))
    if DST not in dist:
        return math.inf, None
    node_path = [DST]
    while node_path[-1] != SRC:
        node_path.append(prev[node_path[-1]])
    node_path.reverse()
    corridor = []
    for a, b in zip(node_path, node_path[1:]):
        pa, pb = pts[a], pts[b]
        shared = {c for c, _ in pa.representations(comp)} & \
                 {c for c, _ in pb.representations(comp)}
        cid = min(shared, key=lambda c: net._chord(c, pa, pb))
        if not corridor or corridor[-1] != cid:
            corridor.append(cid)
    return dist[DST], corridor


def _straighten(comp: MetricComplex, corridor, x, y):
    """Convex minimization of the polyline length over the crossing faces of
    a fixed cell sequence."""
    if len(corridor) == 1:
        cid = corridor[0]
        b0 = dict(x.representations(comp))[cid]
        b1 = dict(y.representations(comp))[cid]
        co = comp.cells[cid].coords
        return float(np.linalg.norm((np.asarray(b1) - np.asarray(b0)) @ co)), \
            [(cid, np.asarray(b0), np.asarray(b1))]
    gates = []
    for ca, cb in zip(corridor, corridor[1:]):
        gate = _shared_face(comp, ca, cb)
        if gate is None:
            return math.inf, None
        gates.append(gate)
    sizes = [len(g[0][1]) for g in gates]
    splits = np.cumsum([0] + sizes)

    x0 = np.concatenate([np.full(s, 1.0 / s) for s in sizes])

    def endpoints(vec):
        pts = []
        for g, (s0, s1) in zip(gates, zip(splits, splits[1:])):
            lam = np.clip(vec[s0:s1], 0.0, None)
            lam = lam / max(lam.sum(), 1e-12)
            pts.append((g, lam))
        return pts

    def value(vec):
        pts = endpoints(vec)
        total = 0.0
        prev_b = dict(x.representations(comp))[corridor[0]]
        for i, cid in enumerate(corridor):
            co = comp.cells[cid].coords
            if i < len(pts):
                (slots, lam) = (pts[i][0], pts[i][1])
                b_here = _gate_bary(comp, pts[i][0], lam, cid)
                total += np.linalg.norm((b_here - np.asarray(prev_b)) @ co)
                nxt = corridor[i + 1]
                prev_b = _gate_bary(comp, pts[i][0], lam, nxt)
            else:
                b1 = dict(y.representations(comp))[cid]
                total += np.linalg.norm((np.asarray(b1) - np.asarray(prev_b)) @ co)
        return float(total)

    cons = [{"type": "eq",
             "fun": (lambda v, s0=s0, s1=s1: v[s0:s1].sum() - 1.0)}
            for s0, s1 in zip(splits, splits[1:])]
    res = optimize.minimize(value, x0, method="SLSQP",
                            bounds=[(0.0, 1.0)] * len(x0),
                            constraints=cons,
                            options={"maxiter": 200, "ftol": 1e-12})
    vec = res.x
    pts = endpoints(vec)
    segs = []
    prev_b = np.asarray(dict(x.representations(comp))[corridor[0]])
    for i, cid in enumerate(corridor):
        if i < len(pts):
            b_here = _gate_bary(comp, pts[i][0], pts[i][1], cid)
            segs.append((cid, prev_b, b_here))
            prev_b = _gate_bary(comp, pts[i][0], pts[i][1], corridor[i + 1])
        else:
            b1 = np.asarray(dict(y.representations(comp))[cid])
            segs.append((cid, prev_b, b1))
    return value(vec), segs


def _shared_face(comp: MetricComplex, ca: int, cb: int):
    """Highest-dimensional face class shared by two cells; returns the pair
    of member slots ((ca, tup_a), (cb, tup_b)) or None."""
    best = None
    for root in comp.face_classes():
        members = comp.face_class_members(root)
        in_a = [m for m in members if m[0] == ca]
        in_b = [m for m in members if m[0] == cb]
        if in_a and in_b and (in_a[0] != in_b[0]):
            if best is None or len(root[1]) > len(best[0][1]):
                best = (in_a[0], in_b[0])
    return best


def _gate_bary(comp, gate, lam, cid):
    """Barycentric coordinates (in cell cid) of a gate point with weights lam
    on the root tuple of the gate's face class."""
    (ca, ta), (cb, tb) = gate
    root = comp.face_root(ca, ta)
    slot = (ca, ta) if ca == cid else (cb, tb)
    corr = comp.face_corr(slot[0], slot[1])
    root_weights = dict(zip(comp.face_corr(ca, ta), lam)) if ca == cid else \
        dict(zip(comp.face_corr(ca, ta), lam))
    b = np.zeros(comp.cells[cid].nverts)
    rw = dict(zip(comp.face_corr(ca, ta), lam))
    for pos, v in enumerate(slot[1]):
        b[v] = rw[corr[pos]]
    return b


def net_link(comp: MetricComplex, x: ComplexPoint, cfg):
    """Eps-net link for stars of dimension >= 3: sampled directions with
    comparison-angle edge weights at the configured angular resolution."""
    from . import links as lk
    from .geodesics import engine, log_map, uniform_point

    eng = engine(comp)
    scale = min(float(np.min(c.lengths + np.eye(c.nverts) * 1e9))
                for c in comp.cells if c.dim > 0)
    r = 0.2 * scale
    rng = np.random.default_rng(comp.settings.seed)
    dirs = []
    keys = set()
    trials = 0
    while len(dirs) < 160 and trials < 3000:
        trials += 1
        y = uniform_point(comp, rng)
        d, _ = eng.distance(x, y, need_path=False)
        if d < 1e-9 or d > r:
            continue
        t, v = log_map(comp, x, y)
        if v is None:
            continue
        key = (v.cid, tuple(np.round(v.array(), 2)))
        if key in keys:
            continue
        keys.add(key)
        dirs.append((v, y, t))
    nodes = []
    for i, (v, yy, t) in enumerate(dirs):
        nodes.append(lk._Node(label=("net", i),
                              state=("ray", v.cid,
                                     v.anchor_xy(comp), v.array()),
                              match=(v.cid, None, tuple(v.vec))))
    arcs = []
    from .geodesics import comparison_angle
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            ang = comparison_angle(comp, x, dirs[i][1], dirs[j][1])
            if ang <= 2.5 * cfg.angular_resolution * 10:
                arcs.append(lk._Arc(i, j, max(ang, 1e-6)))
    L = lk.LinkSpace(comp, x, "net", nodes, arcs,
                     resolution=cfg.angular_resolution * 10)
    return L
