"""Seed configurations whose deterministic growth certifies the
surface-order lower bound: a linear-in-R number of seeded ones evolves into
a fully occupied sphere of radius R.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..automaton import UpdateRule, catalog_rule
from ..errors import InputError
from .engine import make_rng
from .noise import NoiseModel


@dataclass(frozen=True)
class SeedSpec:
    model: str  # "nec" | "nsmm"
    cells: frozenset  # seeded ones, absolute coordinates around the origin
    count: int  # number of seeded ones (the error budget, O(R))
    steps: int
    center: tuple[int, int]
    radius: int


def spider_seed(radius: int) -> SeedSpec:
    """Three crossing segments for the north-east-center rule: horizontal,
    vertical and antidiagonal through the origin, half-length 4R.  After 4R
    steps the enclosed triangle has filled the sphere of radius R centered
    at (-R, -R)."""
    if radius < 1:
        raise InputError("radius must be >= 1")
    r4 = 4 * radius
    cells = set()
    for x in range(-r4, r4 + 1):
        cells.add((x, 0))
        cells.add((0, x))
        cells.add((x, -x))
    return SeedSpec("nec", frozenset(cells), len(cells), 4 * radius, (-radius, -radius), radius)


def snake_seed(radius: int) -> SeedSpec:
    """One horizontal segment for the maximum-of-minima rule; each step adds
    a fresh row below while the eastern end recedes, so after 2R steps the
    rectangle covers the sphere of radius R centered at (0, -R)."""
    if radius < 1:
        raise InputError("radius must be >= 1")
    cells = {(x, 0) for x in range(-radius, 3 * radius + 1)}
    return SeedSpec("nsmm", frozenset(cells), len(cells), 2 * radius, (0, -radius), radius)


def sphere_sites(center, radius: int):
    cx, cy = center
    out = []
    for x in range(cx - radius, cx + radius + 1):
        for y in range(cy - radius, cy + radius + 1):
            if (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius:
                out.append((x, y))
    return out


def run_seed_check(spec: SeedSpec, rule: UpdateRule | None = None) -> bool:
    """Evolve the seed with zero noise and check the sphere is all ones."""
    rule = catalog_rule(spec.model) if rule is None else rule
    xs = [c[0] for c in spec.cells]
    ys = [c[1] for c in spec.cells]
    margin = spec.steps + 2
    lox = min(xs + [spec.center[0] - spec.radius]) - 2
    hix = max(xs + [spec.center[0] + spec.radius]) + 2
    loy = min(ys + [spec.center[1] - spec.radius]) - 2
    hiy = max(ys + [spec.center[1] + spec.radius]) + 2
    lx = _round64(hix - lox + margin)
    ly = hiy - loy + 4
    states = np.zeros((ly, lx), dtype=np.uint8)
    for (x, y) in spec.cells:
        states[y - loy, x - lox] = 1

    noise = NoiseModel.totally_asymmetric_up(0.0)
    from .engine import _step_unpacked  # deterministic: eps = 0

    rng = make_rng(0, 0)
    table = rule.table_array()
    thr = noise.flip_thresholds(rule)
    cur = states[np.newaxis]
    for _ in range(spec.steps):
        cur = _step_unpacked(cur, table, thr, rule, rng)
    final = cur[0]
    for (x, y) in sphere_sites(spec.center, spec.radius):
        if not final[y - loy, x - lox]:
            return False
    return True


def _round64(n: int) -> int:
    return ((n + 63) // 64) * 64
