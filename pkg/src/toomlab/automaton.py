"""Monotone binary cellular automata on Z^d and their zero-/one-set structure.

A rule is stored as an ordered neighborhood of offsets plus a truth table
over the 2^R local configurations.  Bit i of a configuration index is the
state at the i-th offset; the table itself is kept as a Python integer
whose bit c is the output for configuration c (LSB = all-zero input).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import InputError

MAX_NEIGHBORHOOD = 20  # exact subset enumeration stays cheap up to here


@dataclass(frozen=True)
class ZeroSetFamily:
    """Antichain of minimal forcing subsets of the neighborhood (by index)."""

    sets: tuple[frozenset[int], ...]
    kind: str  # "zero" | "one"

    def __len__(self):
        return len(self.sets)

    def as_offsets(self, rule: "UpdateRule") -> tuple[tuple[tuple[int, ...], ...], ...]:
        return tuple(
            tuple(sorted(rule.neighborhood[i] for i in s)) for s in self.sets
        )


@dataclass(frozen=True)
class UpdateRule:
    d: int
    neighborhood: tuple[tuple[int, ...], ...]
    table: int
    name: str = ""

    def __post_init__(self):
        if self.d < 1:
            raise InputError("dimension must be >= 1")
        offs = tuple(tuple(int(c) for c in o) for o in self.neighborhood)
        object.__setattr__(self, "neighborhood", offs)
        if not offs:
            raise InputError("neighborhood must not be empty")
        if len(set(offs)) != len(offs):
            raise InputError("neighborhood offsets must be pairwise distinct")
        for o in offs:
            if len(o) != self.d:
                raise InputError("offset length does not match dimension")
        r = len(offs)
        if r > MAX_NEIGHBORHOOD:
            raise InputError(f"neighborhood size {r} exceeds cap {MAX_NEIGHBORHOOD}")
        if not (0 <= self.table < (1 << (1 << r))):
            raise InputError("truth table does not fit 2^R bits")
        if self.table & 1:
            raise InputError("rule is not non-constant monotone: table(all-0) must be 0")
        if not (self.table >> ((1 << r) - 1)) & 1:
            raise InputError("rule is not non-constant monotone: table(all-1) must be 1")
        if not is_monotone(self.table, r):
            raise InputError("truth table is not monotone")

    @property
    def r(self) -> int:
        return len(self.neighborhood)

    def output(self, config: int) -> int:
        return (self.table >> config) & 1

    def table_array(self) -> np.ndarray:
        return _table_bits(self.table, self.r)

    def max_offset(self) -> int:
        return max(abs(c) for o in self.neighborhood for c in o)


def evaluate(rule: UpdateRule, local) -> int:
    """Apply the updating function to one local configuration (bit per offset)."""
    if len(local) != rule.r:
        raise InputError(f"local configuration has length {len(local)}, expected {rule.r}")
    idx = 0
    for i, s in enumerate(local):
        if s not in (0, 1):
            raise InputError("local states must be 0 or 1")
        idx |= s << i
    return rule.output(idx)


def _table_bits(table: int, r: int) -> np.ndarray:
    n = 1 << r
    raw = table.to_bytes((n + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:n].copy()


def is_monotone(table: int, r: int) -> bool:
    """Exhaustive check that flipping any input 0->1 never flips the output 1->0."""
    bits = _table_bits(table, r)
    for i in range(r):
        v = bits.reshape(-1, 2, 1 << i)
        if np.any(v[:, 0, :] > v[:, 1, :]):
            return False
    return True


def is_zero_one_symmetric(rule: UpdateRule) -> bool:
    """phi(~omega) == ~phi(omega) for every local configuration."""
    full = (1 << rule.r) - 1
    t = rule.table
    return all(((t >> (full ^ c)) & 1) == 1 - ((t >> c) & 1) for c in range(full + 1))


def dual_rule(rule: UpdateRule) -> UpdateRule:
    """The 0<->1 conjugate rule: phi'(omega) = 1 - phi(~omega)."""
    full = (1 << rule.r) - 1
    t = 0
    for c in range(full + 1):
        if 1 - ((rule.table >> (full ^ c)) & 1):
            t |= 1 << c
    name = f"{rule.name}-dual" if rule.name else ""
    return UpdateRule(rule.d, rule.neighborhood, t, name)


def _subset_or(bits: np.ndarray, r: int) -> np.ndarray:
    """f[mask] = OR of bits[c] over all c that are subsets of mask."""
    f = bits.copy()
    for i in range(r):
        v = f.reshape(-1, 2, 1 << i)
        v[:, 1, :] |= v[:, 0, :]
    return f


def minimal_zero_sets(rule: UpdateRule) -> ZeroSetFamily:
    """Exact antichain of minimal zero-sets, by brute force over index subsets.

    S forces output 0 iff every configuration vanishing on S maps to 0,
    i.e. the OR of the table over the subcube {c : c & mask(S) == 0} is 0.
    """
    return _minimal_forcing(rule, kind="zero")


def minimal_one_sets(rule: UpdateRule) -> ZeroSetFamily:
    return _minimal_forcing(rule, kind="one")


def _minimal_forcing(rule: UpdateRule, kind: str) -> ZeroSetFamily:
    r = rule.r
    n = 1 << r
    full = n - 1
    bits = rule.table_array()
    if kind == "zero":
        witness = _subset_or(bits, r)  # witness[m] = OR over c subset of m
        # S forces 0  <=>  no configuration supported outside S outputs 1
        forcing = witness[np.arange(n) ^ full] == 0
    elif kind == "one":
        inv = 1 - bits[::-1].copy()  # inv[m] = 1 - table[full ^ m]
        witness = _subset_or(inv, r)
        # S forces 1  <=>  every c containing S outputs 1
        forcing = witness[np.arange(n) ^ full] == 0
    else:
        raise InputError(f"unknown forcing kind {kind!r}")

    minimal = forcing.copy()
    masks = np.arange(n)
    for i in range(r):
        bit = 1 << i
        has = (masks & bit) != 0
        # drop S if S minus one element still forces
        minimal[has] &= ~forcing[masks[has] ^ bit]
    sets = [frozenset(i for i in range(r) if m & (1 << i)) for m in masks[minimal]]
    sets.sort(key=lambda s: (len(s), sorted(s)))
    return ZeroSetFamily(tuple(sets), kind)


def forces_zero(rule: UpdateRule, indices) -> bool:
    """Exhaustive check that zeros on the given offsets force output 0."""
    mask = 0
    for i in indices:
        mask |= 1 << i
    free = [i for i in range(rule.r) if not mask & (1 << i)]
    for pick in range(1 << len(free)):
        c = 0
        for j, i in enumerate(free):
            if pick & (1 << j):
                c |= 1 << i
        if rule.output(c):
            return False
    return True


# ---------------------------------------------------------------------------
# builtin catalog: the worked examples


def _majority_table(r: int) -> int:
    t = 0
    for c in range(1 << r):
        if bin(c).count("1") * 2 > r:
            t |= 1 << c
    return t


def stavskaya() -> UpdateRule:
    # phi(w0, w1) = 1 iff both are 1
    return UpdateRule(1, ((0,), (1,)), 0b1000, "stavskaya")


def majority_1d() -> UpdateRule:
    return UpdateRule(1, ((-1,), (0,), (1,)), _majority_table(3), "majority1d")


def nec() -> UpdateRule:
    # center, east, north majority
    return UpdateRule(2, ((0, 0), (1, 0), (0, 1)), _majority_table(3), "nec")


def majority_2d() -> UpdateRule:
    offs = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))
    return UpdateRule(2, offs, _majority_table(5), "majority2d")


def nsmm() -> UpdateRule:
    # max of the two minima over the southern pair {(0,0),(1,0)} and the
    # northern pair {(0,1),(1,1)}
    offs = ((0, 0), (1, 0), (0, 1), (1, 1))
    t = 0
    for c in range(16):
        s = [(c >> i) & 1 for i in range(4)]
        if max(min(s[0], s[1]), min(s[2], s[3])):
            t |= 1 << c
    return UpdateRule(2, offs, t, "nsmm")


CATALOG = {
    "stavskaya": stavskaya,
    "majority1d": majority_1d,
    "nec": nec,
    "majority2d": majority_2d,
    "nsmm": nsmm,
}


def catalog_rule(name: str) -> UpdateRule:
    try:
        return CATALOG[name]()
    except KeyError:
        raise InputError(f"unknown catalog rule {name!r}") from None


# ---------------------------------------------------------------------------
# rule files


def rule_to_json(rule: UpdateRule) -> dict:
    digits = ceil((1 << rule.r) / 4)
    return {
        "name": rule.name,
        "d": rule.d,
        "offsets": [list(o) for o in rule.neighborhood],
        "table_hex": format(rule.table, f"0{digits}x"),
    }


def rule_from_json(obj: dict) -> UpdateRule:
    try:
        d = int(obj["d"])
        offsets = tuple(tuple(int(c) for c in o) for o in obj["offsets"])
        hexstr = obj["table_hex"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed rule object: {exc}") from None
    if not isinstance(hexstr, str):
        raise InputError("table_hex must be a string")
    m = re.search(r"[^0-9a-fA-F]", hexstr)
    if m is not None:
        raise InputError(f"malformed table_hex: invalid hex digit at byte offset {m.start()}")
    digits = ceil((1 << len(offsets)) / 4)
    if len(hexstr) != digits:
        raise InputError(f"table_hex has {len(hexstr)} digits, expected {digits}")
    return UpdateRule(d, offsets, int(hexstr, 16), str(obj.get("name", "")))


def load_rule(path) -> UpdateRule:
    with open(path, "r", encoding="utf-8") as fh:
        return rule_from_json(json.load(fh))


def save_rule(rule: UpdateRule, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rule_to_json(rule), fh, indent=2)
        fh.write("\n")
