"""Graph objects built on recorded space-time windows: clusters of
responsible points, their equivalence classes and forest, and the
pole-labeled current-conserving graphs whose special vertices are error
points.

The single builder covers both the singleton-source construction (any d)
and the multi-source variant for connected sets at one time (d <= 2): the
sources pi_k maximize <v^(k), .> over the set, and coincide when the set is
a singleton.  Edges carry a partition of the poles {1..m} over their two
endpoints; a timelike edge gives exactly pole k to its past endpoint, which
must lie in the k-th space-time zero-set of the future endpoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .automaton import UpdateRule
from .errors import (
    InputError,
    InternalConsistencyError,
    WindowBoundaryError,
)
from .eroder import ErosionCertificate, compute_ctilde, validate_certificate
from .exactlp import ZERO, dot, format_fraction
from .simulator.engine import SpaceTimeConfig

# ---------------------------------------------------------------------------
# window access with plain (non-torus) semantics


class _Window:
    """Byte-level access to a recorded window, treated as plain Z^d.

    Points within max|offset| of a spatial boundary are unsafe: their
    neighborhoods would wrap, so the builders abort there.
    """

    def __init__(self, config: SpaceTimeConfig):
        self.rule = config.rule
        self.d = config.rule.d
        self.dims = config.dims
        self.T = config.T
        self.margin = config.rule.max_offset()
        self.mem = [config.states[t].tobytes() for t in range(self.T + 1)]
        flags = config.error_flags()
        self.err = [flags[t - 1].tobytes() for t in range(1, self.T + 1)]

    def _ravel(self, p) -> int:
        idx = 0
        for a in reversed(range(self.d)):
            idx = idx * self.dims[a] + p[a]
        return idx

    def in_window(self, p) -> bool:
        t = p[-1]
        if not 0 <= t <= self.T:
            return False
        return all(0 <= p[a] < self.dims[a] for a in range(self.d))

    def is_safe(self, p) -> bool:
        return all(self.margin <= p[a] < self.dims[a] - self.margin for a in range(self.d))

    def state(self, p) -> int:
        return self.mem[p[-1]][self._ravel(p)]

    def is_error(self, p) -> bool:
        t = p[-1]
        if t == 0:
            return False
        return bool(self.err[t - 1][self._ravel(p)])


def _check_safe(win: _Window, p) -> None:
    if not win.in_window(p):
        raise WindowBoundaryError(f"point {p} leaves the recorded window")
    if not win.is_safe(p):
        raise WindowBoundaryError(
            f"point {p} touches the spatial window boundary; enlarge the window"
        )


# ---------------------------------------------------------------------------
# cluster of responsible points


@dataclass(frozen=True)
class Cluster:
    lam: frozenset
    t_lam: int
    points_by_time: dict  # t -> tuple of points, sorted
    ubar: dict  # point -> tuple of responsible points (empty iff terminal)
    terminals: frozenset  # error points (plus t=0 points in the shifted variant)
    shifted_initial: bool

    @property
    def points(self):
        for t in sorted(self.points_by_time, reverse=True):
            yield from self.points_by_time[t]


def build_cluster(
    config: SpaceTimeConfig,
    lam,
    rule: UpdateRule | None = None,
    shifted_initial: bool = False,
) -> Cluster:
    """Closure of the set under "is responsible for", backward in time.

    For a state-1 point v obeying the rule, the responsible set is the
    state-1 part of its space-time neighborhood; error points are terminal.
    Unless the shifted-initial variant is on, the initial row must be all
    zeros (so chains always end at error points).
    """
    if rule is not None and rule != config.rule:
        raise InputError("rule does not match the recorded configuration")
    rule = config.rule
    win = _Window(config)
    lam = frozenset(tuple(int(c) for c in p) for p in lam)
    if not lam:
        raise InputError("the target set must be nonempty")
    tset = {p[-1] for p in lam}
    if len(tset) != 1:
        raise InputError("the target set must lie at a single time")
    t_lam = tset.pop()
    if not 1 <= t_lam <= win.T:
        raise InputError(f"target time {t_lam} outside [1, T]")
    if not shifted_initial and config.states[0].any():
        raise InputError("initial row is not all zeros; use the shifted-initial variant")
    for p in lam:
        _check_safe(win, p)
        if not win.state(p):
            raise InputError(f"target point {p} does not hold state 1")

    offs = rule.neighborhood
    ubar: dict = {}
    terminals = set()
    points_by_time: dict = {}
    frontier = sorted(lam)
    t = t_lam
    while frontier:
        points_by_time[t] = tuple(frontier)
        nxt = set()
        for p in frontier:
            if (shifted_initial and p[-1] == 0) or win.is_error(p):
                ubar[p] = ()
                terminals.add(p)
                continue
            resp = []
            for u in offs:
                q = tuple(p[a] + u[a] for a in range(rule.d)) + (p[-1] - 1,)
                _check_safe(win, q)
                if win.state(q):
                    resp.append(q)
            if not resp:
                raise InternalConsistencyError(
                    f"state-1 point {p} obeys the rule but has no responsible points"
                )
            ubar[p] = tuple(sorted(resp))
            nxt.update(resp)
        # responsible points all live exactly one step in the past
        frontier = sorted(nxt)
        t -= 1
    return Cluster(lam, t_lam, points_by_time, ubar, frozenset(terminals), shifted_initial)


# ---------------------------------------------------------------------------
# classes and the forest F


@dataclass(frozen=True)
class ClusterClass:
    cid: int
    time: int
    members: tuple
    terminal: bool


@dataclass(frozen=True)
class ClassPartition:
    classes: tuple[ClusterClass, ...]
    class_of: dict  # point -> cid
    parent: dict  # cid -> cid (forest edges toward Lambda); roots absent
    responsible: dict  # cid -> tuple of cids (U_F), sorted
    ubar_class: dict  # cid -> tuple of points (the union of member responsibilities)


def compute_classes(cluster: Cluster) -> ClassPartition:
    """Partition each slice into equivalence classes (points sharing a
    terminal ancestor, transitively) and assemble the responsibility forest.
    """
    term_bit = {p: 1 << i for i, p in enumerate(sorted(cluster.terminals))}
    anc: dict = {}
    for t in sorted(cluster.points_by_time):
        for p in cluster.points_by_time[t]:
            if p in term_bit:
                anc[p] = term_bit[p]
            else:
                bits = 0
                for w in cluster.ubar[p]:
                    bits |= anc[w]
                anc[p] = bits

    classes: list[ClusterClass] = []
    class_of: dict = {}
    for t in sorted(cluster.points_by_time, reverse=True):
        pts = list(cluster.points_by_time[t])
        parent_idx = list(range(len(pts)))

        def find(i):
            while parent_idx[i] != i:
                parent_idx[i] = parent_idx[parent_idx[i]]
                i = parent_idx[i]
            return i

        for i, j in combinations(range(len(pts)), 2):
            if anc[pts[i]] & anc[pts[j]]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent_idx[rj] = ri
        groups: dict = {}
        for i, p in enumerate(pts):
            groups.setdefault(find(i), []).append(p)
        for members in sorted(groups.values(), key=lambda g: min(g)):
            members = tuple(sorted(members))
            cid = len(classes)
            terminal = members[0] in cluster.terminals
            classes.append(ClusterClass(cid, t, members, terminal))
            for p in members:
                class_of[p] = cid

    parent: dict = {}
    responsible: dict = {c.cid: [] for c in classes}
    ubar_class: dict = {}
    for c in classes:
        pts = set()
        for v in c.members:
            pts.update(cluster.ubar[v])
        ubar_class[c.cid] = tuple(sorted(pts))
        for q in ubar_class[c.cid]:
            b = class_of[q]
            prev = parent.get(b)
            if prev is None:
                parent[b] = c.cid
                responsible[c.cid].append(b)
            elif prev != c.cid:
                raise InternalConsistencyError(
                    "a class is responsible for two different classes"
                )
    for cid in responsible:
        responsible[cid] = tuple(sorted(set(responsible[cid])))
    return ClassPartition(tuple(classes), class_of, parent, responsible, ubar_class)


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True)
class GraphEdge:
    a: tuple
    b: tuple
    poles_b: frozenset  # poles carried by b; the rest sit on a
    kind: str  # "timelike" | "spacelike"

    def poles_a(self, m: int) -> frozenset:
        return frozenset(range(1, m + 1)) - self.poles_b

    def carrier(self, k: int, m: int):
        return self.b if k in self.poles_b else self.a


@dataclass(frozen=True)
class ToomGraph:
    m: int
    edges: tuple[GraphEdge, ...]
    sources: tuple  # pi_1..pi_m, points of Lambda (possibly equal)
    hat_vertices: frozenset
    lam: frozenset
    vertices: frozenset
    shifted_initial: bool = False

    @property
    def s(self) -> int:
        return sum(1 for e in self.edges if e.kind == "spacelike")

    @property
    def t(self) -> int:
        return sum(1 for e in self.edges if e.kind == "timelike")


def _spatial_diffs(rule: UpdateRule):
    diffs = set()
    for u1 in rule.neighborhood:
        for u2 in rule.neighborhood:
            if u1 != u2:
                diffs.add(tuple(a - b for a, b in zip(u1, u2)))
    return diffs


def _is_connected_lam(lam, rule: UpdateRule) -> bool:
    diffs = _spatial_diffs(rule)
    pts = sorted(lam)
    if len(pts) <= 1:
        return True
    adj = {p: [] for p in pts}
    pset = set(pts)
    for p in pts:
        for dxy in diffs:
            q = tuple(p[a] + dxy[a] for a in range(rule.d)) + (p[-1],)
            if q in pset:
                adj[p].append(q)
    seen = {pts[0]}
    stack = [pts[0]]
    while stack:
        for q in adj[stack.pop()]:
            if q not in seen:
                seen.add(q)
                stack.append(q)
    return len(seen) == len(pts)


def choose_sources(lam, cert: ErosionCertificate, d: int):
    """pi_k maximizes <v^(k), .> over the set; ties resolved to the
    lexicographically smallest point."""
    pis = []
    for v in cert.ref_vectors:
        best_val = None
        best = None
        for p in sorted(lam):
            val = dot(v, p)
            if best_val is None or val > best_val:
                best_val, best = val, p
        pis.append(best)
    return tuple(pis)


def _link_graph(class_ids, part: ClassPartition, diffs, d: int):
    """Links between classes whose members share a space-time neighborhood;
    realization pairs are the lexicographically smallest."""
    members = {cid: part.classes[cid].members for cid in class_ids}
    links = {}
    for c1, c2 in combinations(sorted(class_ids), 2):
        best = None
        for a in members[c1]:
            for b in members[c2]:
                if tuple(a[i] - b[i] for i in range(d)) in diffs:
                    pair = (a, b)
                    if best is None or pair < best:
                        best = pair
        if best is not None:
            links[(c1, c2)] = best
    adj = {cid: [] for cid in class_ids}
    for (c1, c2) in links:
        adj[c1].append(c2)
        adj[c2].append(c1)
    for cid in adj:
        adj[cid].sort()
    return links, adj


def _steiner_tree(root, required, adj):
    """BFS tree from the root, pruned to the paths reaching the required
    classes.  Returns the set of tree edges as (child, parent) pairs."""
    parent = {root: None}
    order = [root]
    qi = 0
    while qi < len(order):
        cur = order[qi]
        qi += 1
        for nxt in adj[cur]:
            if nxt not in parent:
                parent[nxt] = cur
                order.append(nxt)
    edges = set()
    nodes = {root}
    for target in required:
        if target not in parent:
            raise InternalConsistencyError("link graph on responsible classes is not connected")
        cur = target
        while cur != root and cur not in nodes:
            edges.add((cur, parent[cur]))
            nodes.add(cur)
            cur = parent[cur]
        nodes.add(cur)
    return edges, nodes


def _assign_link_poles(tree_edges, tree_nodes, bk_classes, links, m):
    """Pole k goes to the endpoint on the side of the link opposite the
    class B_k; minimality guarantees both endpoints get at least one pole."""
    children = {}
    for c, p in tree_edges:
        children.setdefault(p, []).append(c)
    out = []
    for (c, p) in sorted(tree_edges):
        # nodes on the child side of this edge
        side = set()
        stack = [c]
        while stack:
            cur = stack.pop()
            side.add(cur)
            stack.extend(children.get(cur, []))
        key = (c, p) if (c, p) in links else (p, c)
        pa, pb = links[key]
        point_of = {key[0]: pa, key[1]: pb}
        child_pt, parent_pt = point_of[c], point_of[p]
        poles_child = frozenset(
            k + 1 for k in range(m) if bk_classes[k] not in side
        )
        if not poles_child or len(poles_child) == m:
            raise InternalConsistencyError("spacelike edge with an empty pole side")
        a, b = parent_pt, child_pt
        out.append(GraphEdge(a, b, poles_child, "spacelike"))
    return out


class _CarrierBook:
    """Tracks, per stock class, the unique point carrying each pole."""

    def __init__(self, m):
        self.m = m
        self.by_class = {}

    def put(self, cid, k, point):
        slot = self.by_class.setdefault(cid, {})
        if k in slot:
            raise InternalConsistencyError(f"pole {k} assigned twice within a class")
        slot[k] = point

    def complete(self, cid) -> dict:
        slot = self.by_class.get(cid, {})
        if set(slot) != set(range(1, self.m + 1)):
            raise InternalConsistencyError("a stock class misses some pole")
        return slot


def build_graph(
    config: SpaceTimeConfig,
    cert: ErosionCertificate,
    lam,
    rule: UpdateRule | None = None,
    shifted_initial: bool = False,
    order_policy=None,
) -> ToomGraph:
    """Unified recursive construction over the exploitable-class stock.

    order_policy, if given, picks the next class id among the exploitable
    ones (default: smallest id, i.e. creation order).
    """
    if rule is not None and rule != config.rule:
        raise InputError("rule does not match the recorded configuration")
    rule = config.rule
    if cert.ref_vectors is None:
        raise InputError("certificate lacks reference vectors")
    bad = validate_certificate(rule, cert)
    if bad:
        raise InputError("certificate fails validation: " + "; ".join(bad))
    lam = frozenset(tuple(int(c) for c in p) for p in lam)
    if len(lam) > 1 and not _is_connected_lam(lam, rule):
        raise InputError("the target set is not connected in the neighborhood sense")

    cluster = build_cluster(config, lam, shifted_initial=shifted_initial)
    part = compute_classes(cluster)
    m = cert.m
    diffs = _spatial_diffs(rule)
    zk = cert.zk_offset_indices(rule)
    pis = choose_sources(lam, cert, rule.d)

    edges: list[GraphEdge] = []
    book = _CarrierBook(m)
    src_classes = [part.class_of[p] for p in pis]

    if len(set(src_classes)) == 1:
        stock = {src_classes[0]}
        for k, p in enumerate(pis, start=1):
            book.put(src_classes[0], k, p)
    else:
        lam_classes = sorted({part.class_of[p] for p in lam})
        links, adj = _link_graph(lam_classes, part, diffs, rule.d)
        tree_edges, tree_nodes = _steiner_tree(
            src_classes[0], sorted(set(src_classes)), adj
        )
        new_edges = _assign_link_poles(tree_edges, tree_nodes, src_classes, links, m)
        edges.extend(new_edges)
        stock = set(tree_nodes)
        for k, p in enumerate(pis, start=1):
            book.put(src_classes[k - 1], k, p)
        for e in new_edges:
            for k in e.poles_b:
                book.put(part.class_of[e.b], k, e.b)
            for k in e.poles_a(m):
                book.put(part.class_of[e.a], k, e.a)
    for cid in stock:
        book.complete(cid)

    while True:
        exploitable = sorted(
            cid for cid in stock if not part.classes[cid].terminal
        )
        if not exploitable:
            break
        cid = exploitable[0] if order_policy is None else order_policy(exploitable)
        stock.discard(cid)
        carriers = book.complete(cid)
        targets = []
        for k in range(1, m + 1):
            v = carriers[k]
            allowed = set()
            for i in zk[k - 1]:
                u = rule.neighborhood[i]
                w = tuple(v[a] + u[a] for a in range(rule.d)) + (v[-1] - 1,)
                allowed.add(w)
            cands = sorted(set(cluster.ubar[v]) & allowed)
            if not cands:
                raise InternalConsistencyError(
                    "no responsible point inside a space-time zero-set; "
                    "rule/certificate mismatch"
                )
            targets.append(cands[0])
        new_edges = []
        for k in range(1, m + 1):
            new_edges.append(GraphEdge(carriers[k], targets[k - 1], frozenset([k]), "timelike"))
        bk_classes = [part.class_of[w] for w in targets]
        uf = part.responsible[cid]
        if len(set(bk_classes)) > 1:
            links, adj = _link_graph(sorted(uf), part, diffs, rule.d)
            tree_edges, tree_nodes = _steiner_tree(
                bk_classes[0], sorted(set(bk_classes)), adj
            )
            new_edges.extend(_assign_link_poles(tree_edges, tree_nodes, bk_classes, links, m))
            new_stock = set(tree_nodes)
        else:
            new_stock = {bk_classes[0]}
        for e in new_edges:
            for k in e.poles_b:
                book.put(part.class_of[e.b], k, e.b)
            if e.kind == "spacelike":
                for k in e.poles_a(m):
                    book.put(part.class_of[e.a], k, e.a)
        for nc in new_stock:
            book.complete(nc)
        edges.extend(new_edges)
        stock |= new_stock

    hat = set()
    for cid in stock:
        c = part.classes[cid]
        if not (c.terminal and len(c.members) == 1):
            raise InternalConsistencyError("non-terminal class left in the final stock")
        hat.add(c.members[0])
    if edges:
        vertices = frozenset(p for e in edges for p in (e.a, e.b))
    else:
        vertices = frozenset(lam)
    return ToomGraph(
        m, tuple(edges), pis, frozenset(hat), lam, vertices, shifted_initial
    )


def build_graph_general(
    config: SpaceTimeConfig,
    cert: ErosionCertificate,
    v_lam,
    rule: UpdateRule | None = None,
    shifted_initial: bool = False,
    order_policy=None,
) -> ToomGraph:
    """Single-source construction (any dimension) for one state-1 point."""
    return build_graph(
        config, cert, [tuple(v_lam)], rule=rule,
        shifted_initial=shifted_initial, order_policy=order_policy,
    )


def build_graph_multisource_2d(
    config: SpaceTimeConfig,
    cert: ErosionCertificate,
    lam,
    rule: UpdateRule | None = None,
    shifted_initial: bool = False,
    order_policy=None,
) -> ToomGraph:
    """Multi-source construction for a connected set at one time (d = 2
    needs three pairwise non-parallel normals; d = 1 works with m = 2)."""
    r = config.rule if rule is None else rule
    if r.d == 2 and cert.m != 3:
        raise InputError("the d=2 multi-source builder needs an m=3 certificate")
    return build_graph(
        config, cert, lam, rule=rule,
        shifted_initial=shifted_initial, order_policy=order_policy,
    )


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class GraphReport:
    checks: dict
    quantities: dict = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(self.checks.values())

    def failures(self):
        return sorted(name for name, ok in self.checks.items() if not ok)


def set_diameter(lam, d: int) -> int:
    pts = sorted(lam)
    best = 0
    for p, q in combinations(pts, 2):
        best = max(best, sum(abs(p[a] - q[a]) for a in range(d)))
    return best


def verify_graph(
    graph: ToomGraph, cert: ErosionCertificate, config: SpaceTimeConfig
) -> GraphReport:
    """Recompute every invariant from (graph, certificate, window) alone;
    never trusts construction bookkeeping."""
    rule = config.rule
    win = _Window(config)
    m = graph.m
    refv = cert.ref_vectors
    r = cert.r
    d = rule.d
    checks: dict = {}
    poleset = frozenset(range(1, m + 1))
    diffs = _spatial_diffs(rule)
    offs = set(rule.neighborhood)

    checks["certificate_valid"] = not validate_certificate(rule, cert) and m == cert.m
    checks["states_one"] = all(
        win.in_window(p) and win.state(p) == 1 for p in graph.vertices
    )

    ok_t = True
    ok_extent = True
    for e in graph.edges:
        if e.kind != "timelike":
            continue
        du = tuple(e.b[a] - e.a[a] for a in range(d))
        if e.b[-1] != e.a[-1] - 1 or du not in offs:
            ok_t = False
            continue
        if len(e.poles_b) != 1:
            ok_t = False
            continue
        (k,) = e.poles_b
        disp = tuple(e.b[i] - e.a[i] for i in range(d + 1))
        if dot(refv[k - 1], disp) < r:
            ok_extent = False
        if win.is_error(e.a) or not win.state(e.b):
            ok_t = False
    checks["timelike_wellformed"] = ok_t
    checks["timelike_extent"] = ok_extent

    ok_s = True
    for e in graph.edges:
        if e.kind != "spacelike":
            continue
        if e.a[-1] != e.b[-1]:
            ok_s = False
            continue
        du = tuple(e.a[i] - e.b[i] for i in range(d))
        if du not in diffs:
            ok_s = False
        if not e.poles_b or e.poles_b == poleset:
            ok_s = False
    checks["spacelike_wellformed"] = ok_s

    # current conservation, with the virtual pole k feeding pi_k
    counts: dict = {}
    for e in graph.edges:
        for k in e.poles_b:
            counts.setdefault(e.b, [0] * m)[k - 1] += 1
        for k in e.poles_a(m):
            counts.setdefault(e.a, [0] * m)[k - 1] += 1
    for k, p in enumerate(graph.sources, start=1):
        counts.setdefault(p, [0] * m)[k - 1] += 1
    checks["current_conservation"] = all(
        len(set(c)) == 1 for c in counts.values()
    )

    # connectivity over undirected edges
    if graph.edges:
        index = {p: i for i, p in enumerate(sorted(graph.vertices))}
        parent = list(range(len(index)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for e in graph.edges:
            ra, rb = find(index[e.a]), find(index[e.b])
            if ra != rb:
                parent[rb] = ra
        roots = {find(i) for i in range(len(index))}
        checks["connected"] = len(roots) == 1
        checks["sources_are_vertices"] = all(p in index for p in graph.sources)
    else:
        checks["connected"] = len(graph.vertices) == 1
        checks["sources_are_vertices"] = all(p in graph.vertices for p in graph.sources)

    s = graph.s
    t = graph.t
    checks["spacelike_count"] = s == len(graph.hat_vertices) - 1

    extent = ZERO
    for e in graph.edges:
        for k in range(1, m + 1):
            extent += dot(refv[k - 1], e.carrier(k, m))
    source_term = ZERO
    for k, p in enumerate(graph.sources, start=1):
        source_term += dot(refv[k - 1], p)
    checks["extent_zero"] = extent + source_term == 0

    margin = Fraction(m) * s - r * t
    checks["pole_time_relation"] = margin >= 0
    checks["edge_vertex_relation"] = (
        Fraction(len(graph.edges)) / (1 + Fraction(m) / r) + 1 <= len(graph.hat_vertices)
    )

    no_out = set(graph.vertices)
    for e in graph.edges:
        if e.kind == "timelike":
            no_out.discard(e.a)
    checks["hat_no_outgoing_timelike"] = no_out == set(graph.hat_vertices)
    ok_err = True
    for p in graph.hat_vertices:
        if p[-1] == 0:
            ok_err = ok_err and graph.shifted_initial
        else:
            ok_err = ok_err and win.is_error(p)
    checks["hat_are_errors"] = ok_err

    diam = set_diameter(graph.lam, d)
    quantities = {
        "m": m, "s": s, "t": t, "n_hat": len(graph.hat_vertices),
        "n_edges": len(graph.edges), "n_vertices": len(graph.vertices),
        "extent_total": format_fraction(extent + source_term),
        "pole_time_margin": format_fraction(margin),
        "source_term": format_fraction(source_term),
        "diam": diam,
    }
    try:
        ctilde = compute_ctilde(cert, rule)
        lhs = 2 * Fraction(s)
        rhs = r * t + ctilde * diam
        checks["multisource_relation"] = lhs >= rhs
        quantities["ctilde"] = format_fraction(ctilde)
        quantities["multisource_margin"] = format_fraction(lhs - rhs)
    except (InputError, InternalConsistencyError):
        pass  # no applicable C~ for this certificate shape
    return GraphReport(checks, quantities)


# ---------------------------------------------------------------------------
# the Stavskaya contour


@dataclass(frozen=True)
class ContourPath:
    n_d: int  # diagonal steps (1, -1)
    n_h: int  # horizontal steps (-1, 0)
    n_v: int  # vertical steps (0, 1)
    errors: int
    steps: tuple  # ordered displacements along the path
    graph: ToomGraph


def _stavskaya_cert(rule: UpdateRule) -> ErosionCertificate:
    from .eroder import AffineFunctional, make_reference_vectors

    cert = ErosionCertificate(
        (
            AffineFunctional((Fraction(1),), Fraction(0)),
            AffineFunctional((Fraction(-1),), Fraction(1)),
        ),
        Fraction(1),
    )
    return make_reference_vectors(cert, rule)


def stavskaya_contour(config: SpaceTimeConfig, lam) -> ContourPath:
    """Anticlockwise contour of the cluster of a one-dimensional interval
    under totally asymmetric noise, via the m=2 graph (the two coincide);
    steps are recovered as the directed Eulerian trail from the right source
    to the left source."""
    rule = config.rule
    if rule.d != 1 or rule.neighborhood != ((0,), (1,)) or rule.table != 0b1000:
        raise InputError("contour construction is defined for the Stavskaya rule only")
    if config.noise.kind != "totally_asymmetric_up":
        raise InputError("contour construction requires totally asymmetric noise")
    cert = _stavskaya_cert(rule)
    graph = build_graph(config, cert, lam)
    pi1, pi2 = graph.sources  # leftmost, rightmost
    # traversal: from the pole-1 carrier toward the pole-2 carrier
    out_adj: dict = {}
    for i, e in enumerate(graph.edges):
        frm = e.carrier(1, 2)
        to = e.carrier(2, 2)
        out_adj.setdefault(frm, []).append((to, i))
    for v in out_adj:
        out_adj[v].sort()
    steps = _euler_trail(out_adj, start=pi2, end=pi1, n_edges=len(graph.edges))
    kinds = {"d": 0, "h": 0, "v": 0}
    disp_list = []
    for frm, to in steps:
        dxy = (to[0] - frm[0], to[1] - frm[1])
        disp_list.append(dxy)
        if dxy == (1, -1):
            kinds["d"] += 1
        elif dxy == (-1, 0):
            kinds["h"] += 1
        elif dxy == (0, 1):
            kinds["v"] += 1
        else:
            raise InternalConsistencyError(f"unexpected contour step {dxy}")
    return ContourPath(
        kinds["d"], kinds["h"], kinds["v"], len(graph.hat_vertices),
        tuple(disp_list), graph,
    )


def _euler_trail(out_adj, start, end, n_edges):
    used = set()
    path = []
    stack = [start]
    trail = []
    iters = {v: 0 for v in out_adj}
    # Hierholzer on the directed multigraph
    while stack:
        v = stack[-1]
        nxts = out_adj.get(v, [])
        advanced = False
        while iters.get(v, 0) < len(nxts):
            to, ei = nxts[iters[v]]
            iters[v] += 1
            if ei in used:
                continue
            used.add(ei)
            stack.append(to)
            advanced = True
            break
        if not advanced:
            trail.append(stack.pop())
    trail.reverse()
    if len(used) != n_edges or (n_edges and (trail[0] != start or trail[-1] != end)):
        raise InternalConsistencyError("contour edges do not form a single trail")
    for frm, to in zip(trail, trail[1:]):
        path.append((frm, to))
    return path


# ---------------------------------------------------------------------------
# exhaustive graph counting


def count_graphs_exhaustive(rule: UpdateRule, m: int, n: int):
    """Exact count of connected pole-labeled edge multisets with n <= 2 edges
    rooted at the origin, over the generic edge alphabet (timelike
    displacements +-(u,-1), spacelike displacements u1-u2).  Returns
    (count, bound) with bound = [2^m (R^2 + 2R)]^(2n)."""
    if n > 2:
        raise InputError("exhaustive counting is implemented for n <= 2")
    big_r = rule.r
    bound = (2**m * (big_r**2 + 2 * big_r)) ** (2 * n)
    if n == 0:
        return 1, bound
    d = rule.d
    origin = tuple([0] * d) + (0,)

    def incident_edges(p):
        out = []
        for u in rule.neighborhood:
            q_past = tuple(p[a] + u[a] for a in range(d)) + (p[-1] - 1,)
            q_fut = tuple(p[a] - u[a] for a in range(d)) + (p[-1] + 1,)
            for k in range(1, m + 1):
                out.append(_edge_key(p, q_past, frozenset([k]), m))
                out.append(_edge_key(q_fut, p, frozenset([k]), m))
        for dxy in _spatial_diffs(rule):
            q = tuple(p[a] + dxy[a] for a in range(d)) + (p[-1],)
            for bits in range(1, 2**m - 1):
                poles_q = frozenset(k + 1 for k in range(m) if bits >> k & 1)
                out.append(_edge_key(p, q, poles_q, m))
        return set(out)

    first = incident_edges(origin)
    if n == 1:
        count = len(first)
        assert count <= bound
        return count, bound
    graphs = set()
    for e1 in first:
        pts = {e1[0], e1[1], origin}
        for p in pts:
            for e2 in incident_edges(p):
                key = tuple(sorted([e1, e2]))
                graphs.add(key)
    count = len(graphs)
    assert count <= bound
    return count, bound


def _edge_key(a, b, poles_b, m):
    if a <= b:
        poles_a = frozenset(range(1, m + 1)) - poles_b
        return (a, b, tuple(sorted(poles_a)))
    return (b, a, tuple(sorted(poles_b)))


# ---------------------------------------------------------------------------
# graph files


def graph_to_json(graph: ToomGraph, report: GraphReport | None = None) -> dict:
    obj = {
        "m": graph.m,
        "sources": [list(p) for p in graph.sources],
        "lam": sorted(list(p) for p in graph.lam),
        "hat_vertices": sorted(list(p) for p in graph.hat_vertices),
        "vertices": sorted(list(p) for p in graph.vertices),
        "shifted_initial": graph.shifted_initial,
        "edges": [
            {
                "a": list(e.a), "b": list(e.b),
                "poles_b": sorted(e.poles_b), "kind": e.kind,
            }
            for e in graph.edges
        ],
    }
    if report is not None:
        obj["report"] = {"checks": report.checks, "quantities": report.quantities}
    return obj


def graph_from_json(obj: dict) -> ToomGraph:
    try:
        edges = tuple(
            GraphEdge(
                tuple(e["a"]), tuple(e["b"]), frozenset(e["poles_b"]), e["kind"]
            )
            for e in obj["edges"]
        )
        graph = ToomGraph(
            int(obj["m"]),
            edges,
            tuple(tuple(p) for p in obj["sources"]),
            frozenset(tuple(p) for p in obj["hat_vertices"]),
            frozenset(tuple(p) for p in obj["lam"]),
            frozenset(tuple(p) for p in obj["vertices"]),
            bool(obj.get("shifted_initial", False)),
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed graph object: {exc}") from None
    return graph


def save_graph(graph: ToomGraph, path, report: GraphReport | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(graph, report), fh, indent=1)
        fh.write("\n")


def load_graph(path) -> ToomGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_json(json.load(fh))
