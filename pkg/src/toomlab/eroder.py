"""Erosion criterion, affine-functional certificates and reference vectors.

All geometry is exact rational arithmetic.  The criterion (emptiness of the
intersection of the convex hulls of the minimal zero-sets) is decided by LP
feasibility in any dimension; certificates are constructed for d <= 2 where
facet enumeration of the hulls is implemented exactly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from math import gcd, sqrt

import numpy as np

from .automaton import UpdateRule, minimal_zero_sets
from .errors import (
    InputError,
    InternalConsistencyError,
    ResourceCapError,
    UnsupportedDimensionError,
)
from .exactlp import ZERO, dot, feasible_eq_nonneg, format_fraction, parse_fraction, solve_unique


@dataclass(frozen=True)
class AffineFunctional:
    """x -> <v, x> + c with rational coefficients."""

    v: tuple[Fraction, ...]
    c: Fraction

    def __call__(self, x) -> Fraction:
        return dot(self.v, x) + self.c

    def is_constant(self) -> bool:
        return all(a == 0 for a in self.v)

    def scaled(self, s: Fraction) -> "AffineFunctional":
        return AffineFunctional(tuple(a * s for a in self.v), self.c * s)


@dataclass(frozen=True)
class ErosionCertificate:
    """m affine functionals summing to the positive constant delta, plus the
    derived space-time reference vectors (filled in by make_reference_vectors).
    """

    functionals: tuple[AffineFunctional, ...]
    delta: Fraction
    M: Fraction | None = None
    r: Fraction | None = None
    ref_vectors: tuple[tuple[Fraction, ...], ...] | None = None

    @property
    def m(self) -> int:
        return len(self.functionals)

    def zk_offset_indices(self, rule: UpdateRule) -> tuple[tuple[int, ...], ...]:
        """For each k, the neighborhood indices lying in the half-space
        {phi_k <= 0}; these are the targets allowed for pole-k timelike edges."""
        out = []
        for phi in self.functionals:
            out.append(tuple(i for i, u in enumerate(rule.neighborhood) if phi(u) <= 0))
        return tuple(out)


# ---------------------------------------------------------------------------
# erosion criterion (any d, exact LP)


def erosion_criterion(rule: UpdateRule) -> bool:
    """True iff the convex hulls of the minimal zero-sets have empty
    intersection, decided by exact rational LP feasibility."""
    zsets = minimal_zero_sets(rule)
    pointsets = [[rule.neighborhood[i] for i in sorted(s)] for s in zsets.sets]
    return not _hulls_intersect(pointsets, rule.d)


def _hulls_intersect(pointsets, d: int) -> bool:
    # variables: x+ (d), x- (d), then lambda_{j,i} >= 0 per point
    nlam = sum(len(p) for p in pointsets)
    nvar = 2 * d + nlam
    rows, rhs = [], []
    col0 = 2 * d
    for pts in pointsets:
        k = len(pts)
        row = [ZERO] * nvar
        for i in range(k):
            row[col0 + i] = Fraction(1)
        rows.append(row)
        rhs.append(Fraction(1))
        for a in range(d):
            row = [ZERO] * nvar
            row[a] = Fraction(-1)
            row[d + a] = Fraction(1)
            for i, p in enumerate(pts):
                row[col0 + i] = Fraction(p[a])
            rows.append(row)
            rhs.append(ZERO)
        col0 += k
    return feasible_eq_nonneg(rows, rhs) is not None


# ---------------------------------------------------------------------------
# facet enumeration for conv(Z_j), d <= 2


def _canonical(f: AffineFunctional) -> AffineFunctional:
    scale = 1
    for x in list(f.v) + [f.c]:
        scale = scale * x.denominator // gcd(scale, x.denominator)
    ints = [int(x * scale) for x in list(f.v) + [f.c]]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    return AffineFunctional(tuple(Fraction(x) for x in ints[:-1]), Fraction(ints[-1]))


def halfspace_facets(points, d: int) -> list[AffineFunctional]:
    """Affine functionals f with conv(points) = intersection of {f <= 0}.

    Handles points, segments and polygons; exact over integer input points.
    """
    pts = sorted({tuple(int(c) for c in p) for p in points})
    if d == 1:
        lo = min(p[0] for p in pts)
        hi = max(p[0] for p in pts)
        return [
            AffineFunctional((Fraction(1),), Fraction(-hi)),
            AffineFunctional((Fraction(-1),), Fraction(lo)),
        ]
    if d != 2:
        raise UnsupportedDimensionError("facet enumeration implemented for d <= 2 only")
    if len(pts) == 1:
        (p,) = pts
        out = []
        for a in range(2):
            v = [Fraction(0), Fraction(0)]
            v[a] = Fraction(1)
            out.append(AffineFunctional(tuple(v), Fraction(-p[a])))
            v = [Fraction(0), Fraction(0)]
            v[a] = Fraction(-1)
            out.append(AffineFunctional(tuple(v), Fraction(p[a])))
        return out
    hull = _convex_hull_2d(pts)
    if len(hull) == 2:
        a, b = hull
        dx, dy = b[0] - a[0], b[1] - a[1]
        n = (Fraction(dy), Fraction(-dx))  # one of the two line normals
        out = [
            AffineFunctional(n, -dot(n, a)),
            AffineFunctional((-n[0], -n[1]), dot(n, a)),
        ]
        t = (Fraction(dx), Fraction(dy))
        lo = min(dot(t, p) for p in pts)
        hi = max(dot(t, p) for p in pts)
        out.append(AffineFunctional(t, -hi))
        out.append(AffineFunctional((-t[0], -t[1]), lo))
        return out
    out = []
    for i in range(len(hull)):
        a = hull[i]
        b = hull[(i + 1) % len(hull)]
        dx, dy = b[0] - a[0], b[1] - a[1]
        n = (Fraction(dy), Fraction(-dx))  # outward for a CCW polygon
        out.append(AffineFunctional(n, -dot(n, a)))
    return out


def _convex_hull_2d(pts):
    """Monotone chain; returns CCW hull (2 points when collinear)."""
    pts = sorted(pts)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return [pts[0], pts[-1]]
    return hull


# ---------------------------------------------------------------------------
# certificate construction


def find_certificate(rule: UpdateRule) -> ErosionCertificate | None:
    """Nonnegative combination of hull facets that sums to a positive constant.

    Returns None when the erosion criterion fails.  The support is the
    lexicographically smallest one (over the canonically sorted facet list)
    that admits a unique strictly positive solution, so outputs are stable.
    """
    if rule.d > 2:
        raise UnsupportedDimensionError("certificates are constructed for d <= 2 only")
    if not erosion_criterion(rule):
        return None
    zsets = minimal_zero_sets(rule)
    facets = set()
    for s in zsets.sets:
        pts = [rule.neighborhood[i] for i in sorted(s)]
        for f in halfspace_facets(pts, rule.d):
            facets.add(_canonical(f))
    facets = sorted(facets, key=lambda f: (f.v, f.c))
    d = rule.d
    for size in range(2, d + 2):
        for combo in itertools.combinations(range(len(facets)), size):
            rows = []
            for a in range(d):
                rows.append([facets[i].v[a] for i in combo])
            rows.append([facets[i].c for i in combo])
            rhs = [ZERO] * d + [Fraction(1)]
            lam = solve_unique(rows, rhs)
            if lam is None or any(x <= 0 for x in lam):
                continue
            funcs = tuple(facets[i].scaled(lam[j]) for j, i in enumerate(combo))
            cert = ErosionCertificate(funcs, Fraction(1))
            if not validate_certificate(rule, cert):
                return cert
    raise InternalConsistencyError("criterion holds but no facet combination found")


def upgrade_to_three(cert: ErosionCertificate, rule: UpdateRule) -> ErosionCertificate:
    """Replace an m=2 certificate (two antiparallel normals) by an m=3 one
    with pairwise non-parallel normals, by tilting one half-plane around the
    finite part of its zero-set.  m=3 inputs are passed through unchanged."""
    if rule.d != 2:
        raise InputError("upgrade_to_three requires d = 2")
    if cert.m == 3:
        return cert
    if cert.m != 2:
        raise InputError("upgrade_to_three expects an m=2 certificate")
    phi1, phi2 = cert.functionals
    w2 = [u for u in rule.neighborhood if phi2(u) <= 0]
    if not w2:
        raise InternalConsistencyError("certificate half-space misses the neighborhood")
    perp = (-phi2.v[1], phi2.v[0])
    n = 1
    while n <= 1 << 20:
        v3 = (perp[0] / n, perp[1] / n)
        v2 = (phi2.v[0] - v3[0], phi2.v[1] - v3[1])
        c3 = -max(dot(v3, u) for u in w2)
        c2 = -max(dot(v2, u) for u in w2)
        delta = phi1.c + c2 + c3
        if delta > 0:
            funcs = (
                phi1,
                AffineFunctional(v2, c2),
                AffineFunctional(v3, c3),
            )
            out = ErosionCertificate(funcs, delta)
            if not validate_certificate(rule, out) and _pairwise_nonparallel(funcs):
                return out
        n *= 2
    raise InternalConsistencyError("failed to tilt m=2 certificate into m=3")


def _pairwise_nonparallel(funcs) -> bool:
    for f, g in itertools.combinations(funcs, 2):
        if f.v[0] * g.v[1] - f.v[1] * g.v[0] == 0:
            return False
    return True


def make_reference_vectors(cert: ErosionCertificate, rule: UpdateRule) -> ErosionCertificate:
    """Fill in M, r and the space-time reference vectors:

        M = max_{k,u} |phi_k(u) - delta/m|,  r = delta / (m M),
        v^(k) = ( -v_k, phi_k(0) - delta/m ) / M.
    """
    m = cert.m
    delta = sum((phi.c for phi in cert.functionals), ZERO)
    if delta != cert.delta:
        raise InputError("certificate delta does not match sum of constants")
    target = delta / m
    big_m = max(
        abs(phi(u) - target) for phi in cert.functionals for u in rule.neighborhood
    )
    if big_m == 0:
        raise InternalConsistencyError("degenerate certificate: M = 0")
    r = delta / (m * big_m)
    vecs = tuple(
        tuple([-a / big_m for a in phi.v] + [(phi.c - target) / big_m])
        for phi in cert.functionals
    )
    return replace(cert, M=big_m, r=r, ref_vectors=vecs)


def validate_certificate(rule: UpdateRule, cert: ErosionCertificate) -> list[str]:
    """Exact re-check of every certificate invariant; empty list means valid."""
    bad: list[str] = []
    m = cert.m
    d = rule.d
    if not (2 <= m <= d + 1):
        bad.append(f"m = {m} outside [2, d+1]")
    for k, phi in enumerate(cert.functionals):
        if len(phi.v) != d:
            bad.append(f"functional {k} has wrong dimension")
            return bad
        if phi.is_constant():
            bad.append(f"functional {k} is constant")
    if any(sum(phi.v[a] for phi in cert.functionals) != 0 for a in range(d)):
        bad.append("linear parts do not sum to zero")
    delta = sum((phi.c for phi in cert.functionals), ZERO)
    if delta != cert.delta:
        bad.append("delta does not equal the sum of the constant terms")
    if delta <= 0:
        bad.append("delta is not positive")
    zsets = minimal_zero_sets(rule)
    for k, phi in enumerate(cert.functionals):
        if not any(
            all(phi(rule.neighborhood[i]) <= 0 for i in s) for s in zsets.sets
        ):
            bad.append(f"half-space {{phi_{k} <= 0}} contains no minimal zero-set")
    if cert.ref_vectors is not None:
        if cert.M is None or cert.M <= 0 or cert.r is None:
            bad.append("reference vectors present but M/r missing or nonpositive")
            return bad
        if cert.r != cert.delta / (m * cert.M):
            bad.append("r != delta / (m M)")
        for a in range(d + 1):
            if sum(v[a] for v in cert.ref_vectors) != 0:
                bad.append("reference vectors do not sum to zero")
                break
        for k, v in enumerate(cert.ref_vectors):
            for u in rule.neighborhood:
                prod = dot(v[:d], u) - v[d]
                if abs(prod) > 1:
                    bad.append(f"|<v^({k + 1}), (u,-1)>| > 1 for u = {u}")
                    break
        for k, v in enumerate(cert.ref_vectors):
            if not any(
                all(dot(v[:d], rule.neighborhood[i]) - v[d] >= cert.r for i in s)
                for s in zsets.sets
            ):
                bad.append(
                    f"half-space of v^({k + 1}) at margin r is not a space-time zero-set"
                )
    return bad


def compute_ctilde(cert: ErosionCertificate, rule: UpdateRule) -> Fraction:
    """Constant C~ with  sum_k <v^(k), pi_k>  >=  C~ . diam(Lambda).

    Computed per certificate from the enclosing-triangle widths (d = 2) or
    directly from the normal length (d = 1); not canonical across
    certificates.
    """
    if cert.M is None:
        cert = make_reference_vectors(cert, rule)
    d = rule.d
    if d == 1:
        return abs(cert.functionals[0].v[0]) / cert.M
    if d != 2:
        raise UnsupportedDimensionError("C~ implemented for d <= 2")
    if cert.m != 3 or not _pairwise_nonparallel(cert.functionals):
        raise InputError("C~ in d=2 needs three pairwise non-parallel normals")
    vs = [phi.v for phi in cert.functionals]
    b = [ZERO, ZERO, Fraction(-1)]  # triangle {<v_k,x> >= b_k} at sum(b) = -1
    verts = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        sol = solve_unique([list(vs[i]), list(vs[j])], [b[i], b[j]])
        if sol is None:
            raise InternalConsistencyError("degenerate triangle in C~ computation")
        verts.append(sol)
    c1 = max(v[0] for v in verts) - min(v[0] for v in verts)
    c2 = max(v[1] for v in verts) - min(v[1] for v in verts)
    return 1 / ((c1 + c2) * cert.M)


# ---------------------------------------------------------------------------
# deterministic erosion dynamics


@dataclass(frozen=True)
class ErosionResult:
    eroded: bool
    time: int | None = None
    cycle: tuple | None = None  # (first_seen_t, repeat_t, canonical configuration)


def erosion_time(rule: UpdateRule, island, step_budget: int = 4096) -> ErosionResult:
    """Evolve ones-on-island, zeros-elsewhere until empty or a repeated
    configuration (up to translation) is detected."""
    ones = frozenset(tuple(int(c) for c in p) for p in island)
    for p in ones:
        if len(p) != rule.d:
            raise InputError("island points must match the rule dimension")
    offs = rule.neighborhood
    seen: dict[tuple, tuple[int, tuple]] = {}
    t = 0
    while t <= step_budget:
        if not ones:
            return ErosionResult(True, time=t)
        canon, anchor = _canonical_config(ones)
        if canon in seen:
            t0, _ = seen[canon]
            return ErosionResult(False, cycle=(t0, t, canon))
        seen[canon] = (t, anchor)
        candidates = {
            tuple(p[a] - u[a] for a in range(rule.d)) for p in ones for u in offs
        }
        nxt = set()
        for x in candidates:
            idx = 0
            for i, u in enumerate(offs):
                if tuple(x[a] + u[a] for a in range(rule.d)) in ones:
                    idx |= 1 << i
            if rule.output(idx):
                nxt.add(x)
        ones = frozenset(nxt)
        t += 1
    raise ResourceCapError("erosion step budget exceeded", payload=sorted(ones))


def _canonical_config(ones):
    d = len(next(iter(ones)))
    anchor = tuple(min(p[a] for p in ones) for a in range(d))
    canon = tuple(sorted(tuple(p[a] - anchor[a] for a in range(d)) for p in ones))
    return canon, anchor


# ---------------------------------------------------------------------------
# front speeds


@dataclass(frozen=True)
class FrontSpeed:
    """Mean boundary displacement along the (primitive integer) normal.

    The physical speed along the unit normal is displacement / sqrt(norm_sq).
    """

    displacement: Fraction
    normal: tuple[int, ...]
    norm_sq: int

    @property
    def value(self) -> float:
        return float(self.displacement) / sqrt(self.norm_sq)


def front_speed(rule: UpdateRule, normal, phase: str, step_budget: int = 10000) -> FrontSpeed:
    """Speed of a half-space front under the deterministic rule.

    phase="zeros": zeros on {<n,x> <= 0}; positive displacement means the
    zeros gain ground along n.  phase="ones": the mirrored statement.  The
    half-space initial condition depends on x only through <n,x>, so the
    dynamics reduces exactly to a one-dimensional profile over the levels.
    """
    if phase not in ("zeros", "ones"):
        raise InputError("phase must be 'zeros' or 'ones'")
    n = _primitive_normal(normal, rule.d)
    offs = [sum(nc * uc for nc, uc in zip(n, u)) for u in rule.neighborhood]
    maxo = max(1, max(abs(o) for o in offs))
    table = rule.table_array()

    steps = min(64, step_budget)
    w = maxo * (steps + 2) + 2
    levels = np.arange(-w, w + 1)
    if phase == "zeros":
        prof = (levels > 0).astype(np.uint8)
    else:
        prof = (levels <= 0).astype(np.uint8)

    disps = []
    pos = _front_position(prof, phase)
    for _ in range(steps):
        inner = len(prof) - 2 * maxo
        idx = np.zeros(inner, dtype=np.int64)
        for i, o in enumerate(offs):
            lo = maxo + o
            idx |= prof[lo : lo + inner].astype(np.int64) << i
        new = np.empty_like(prof)
        new[maxo:-maxo] = np.take(table, idx)
        new[:maxo] = prof[0]
        new[-maxo:] = prof[-1]
        prof = new
        if not _is_sharp(prof, phase):
            raise InternalConsistencyError("front profile lost its sharp threshold")
        npos = _front_position(prof, phase)
        disps.append(npos - pos)
        pos = npos
    period = _find_period(disps)
    if period is None:
        raise ResourceCapError("front displacement not periodic within budget")
    tail = disps[-period:]
    disp = Fraction(sum(tail), period)
    return FrontSpeed(disp, n, sum(c * c for c in n))


def _primitive_normal(normal, d: int) -> tuple[int, ...]:
    fr = [Fraction(x) for x in normal]
    if len(fr) != d:
        raise InputError("normal has wrong dimension")
    if all(x == 0 for x in fr):
        raise InputError("normal must be nonzero")
    scale = 1
    for x in fr:
        scale = scale * x.denominator // gcd(scale, x.denominator)
    ints = [int(x * scale) for x in fr]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    return tuple(x // g for x in ints)


def _front_position(prof: np.ndarray, phase: str) -> int:
    ones = np.nonzero(prof)[0]
    if phase == "zeros":
        return int(ones[0])  # leftmost 1: zeros fill everything below it
    return int(ones[-1])  # rightmost 1


def _is_sharp(prof: np.ndarray, phase: str) -> bool:
    dif = np.diff(prof.astype(np.int8))
    if phase == "zeros":
        return np.count_nonzero(dif) == 1 and dif.max() == 1
    return np.count_nonzero(dif) == 1 and dif.min() == -1


def _find_period(seq) -> int | None:
    n = len(seq)
    for p in range(1, n // 2 + 1):
        tail = seq[n - 2 * p :]
        if tail[:p] == tail[p:]:
            return p
    return None


# ---------------------------------------------------------------------------
# certificate files


def certificate_to_json(cert: ErosionCertificate) -> dict:
    obj = {
        "functionals": [
            {"v": [format_fraction(a) for a in phi.v], "c": format_fraction(phi.c)}
            for phi in cert.functionals
        ],
        "delta": format_fraction(cert.delta),
    }
    if cert.ref_vectors is not None:
        obj["M"] = format_fraction(cert.M)
        obj["r"] = format_fraction(cert.r)
        obj["ref_vectors"] = [[format_fraction(a) for a in v] for v in cert.ref_vectors]
    return obj


def certificate_from_json(obj: dict, rule: UpdateRule) -> ErosionCertificate:
    try:
        funcs = tuple(
            AffineFunctional(
                tuple(parse_fraction(a) for a in f["v"]), parse_fraction(f["c"])
            )
            for f in obj["functionals"]
        )
        delta = parse_fraction(obj["delta"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed certificate object: {exc}") from None
    cert = ErosionCertificate(funcs, delta)
    if "ref_vectors" in obj:
        cert = replace(
            cert,
            M=parse_fraction(obj["M"]),
            r=parse_fraction(obj["r"]),
            ref_vectors=tuple(
                tuple(parse_fraction(a) for a in v) for v in obj["ref_vectors"]
            ),
        )
    bad = validate_certificate(rule, cert)
    if bad:
        raise InputError("certificate fails validation: " + "; ".join(bad))
    return cert


def load_certificate(path, rule: UpdateRule) -> ErosionCertificate:
    with open(path, "r", encoding="utf-8") as fh:
        return certificate_from_json(json.load(fh), rule)


def save_certificate(cert: ErosionCertificate, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(certificate_to_json(cert), fh, indent=2)
        fh.write("\n")
