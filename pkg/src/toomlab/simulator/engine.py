"""Synchronous torus dynamics: bit-packed word-parallel core plus a general
unpacked path, batched over replicas.

Conventions
-----------
* dims = (L_1, ..., L_d) are the side lengths; state arrays are indexed in
  reverse, e.g. states[..., x2, x1] for d = 2, so x1 is the packed axis.
* Packed states hold 64 cells per uint64 word, little-endian (cell x lives
  in word x // 64, bit x % 64).  The packed path requires L_1 % 64 == 0.
* Replicas are processed in fixed-size batches; batch b draws from the
  counter-based Philox stream keyed by (seed, stream0 + b), so results are
  independent of the thread count.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..automaton import UpdateRule
from ..errors import InputError, ResourceCapError
from .noise import PROB_SCALE, NoiseModel

DEFAULT_BATCH = 256
GENERATOR_ID = "philox4x64"
RESOURCE_CAP_ENV = "TOOMLAB_RESOURCE_CAP_MB"
DEFAULT_CAP_MB = 1024


def resource_cap_mb() -> int:
    raw = os.environ.get(RESOURCE_CAP_ENV)
    if raw is None:
        return DEFAULT_CAP_MB
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{RESOURCE_CAP_ENV} must be an integer, got {raw!r}") from None


def make_rng(seed: int, stream: int) -> np.random.Generator:
    key = np.array([seed % (1 << 64), stream % (1 << 64)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def check_dims(rule: UpdateRule, dims) -> tuple[int, ...]:
    dims = tuple(int(x) for x in dims)
    if len(dims) != rule.d:
        raise InputError(f"dims {dims} do not match rule dimension {rule.d}")
    need = 2 * rule.max_offset() + 1
    for ln in dims:
        if ln < need:
            raise InputError(f"side length {ln} below 2*max|offset|+1 = {need}")
    return dims


# ---------------------------------------------------------------------------
# unpacked path (general; required for table noise and L_1 % 64 != 0)


def _config_index_unpacked(states: np.ndarray, rule: UpdateRule) -> np.ndarray:
    d = rule.d
    axes = tuple(range(states.ndim - d, states.ndim))
    idx = np.zeros(states.shape, dtype=np.int32)
    for i, off in enumerate(rule.neighborhood):
        shift = tuple(-off[a] for a in reversed(range(d)))
        plane = np.roll(states, shift, axis=axes)
        idx |= plane.astype(np.int32) << i
    return idx


def _step_unpacked(states, table_arr, flip_thr, rule, rng):
    idx = _config_index_unpacked(states, rule)
    phi = np.take(table_arr, idx)
    thr = np.take(flip_thr, idx)
    draws = rng.integers(0, PROB_SCALE, size=states.shape, dtype=np.uint16)
    return (phi ^ (draws < thr)).astype(np.uint8)


# ---------------------------------------------------------------------------
# packed path


def _rot_bits(a: np.ndarray, k: int, nbits: int) -> np.ndarray:
    """p[x] = s[(x + k) mod nbits] on little-endian packed words."""
    k %= nbits
    q, r = divmod(k, 64)
    out = np.roll(a, -q, axis=-1)
    if r:
        nxt = np.roll(out, -1, axis=-1)
        out = (out >> np.uint64(r)) | (nxt << np.uint64(64 - r))
    return out


def _plane_packed(words: np.ndarray, off, d: int, lx: int) -> np.ndarray:
    if d == 1:
        return _rot_bits(words, off[0], lx)
    return _rot_bits(np.roll(words, -off[1], axis=-2), off[0], lx)


def _phi_packed(planes, rule: UpdateRule) -> np.ndarray:
    """Wordwise truth-table evaluation as a sum of minterm products."""
    r = rule.r
    full = np.uint64(0xFFFFFFFFFFFFFFFF)
    ones = [c for c in range(1 << r) if rule.output(c)]
    invert = len(ones) > (1 << r) // 2
    terms = [c for c in range(1 << r) if rule.output(c) == (0 if invert else 1)]
    acc = np.zeros_like(planes[0])
    for c in terms:
        term = np.full_like(planes[0], full)
        for i in range(r):
            term &= planes[i] if (c >> i) & 1 else ~planes[i]
        acc |= term
    return ~acc if invert else acc


def _mask_packed(rng, thr: int, cells_shape, word_shape) -> np.ndarray:
    draws = rng.integers(0, PROB_SCALE, size=cells_shape, dtype=np.uint16)
    bits = np.ascontiguousarray(draws < thr)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64).reshape(word_shape)


def _step_packed(words, rule, noise: NoiseModel, rng, dims, cells_shape):
    lx = dims[0]
    planes = [_plane_packed(words, off, rule.d, lx) for off in rule.neighborhood]
    phi = _phi_packed(planes, rule)
    up, down = noise.up_down_thresholds()
    if noise.kind == "totally_asymmetric_up":
        return phi | _mask_packed(rng, up, cells_shape, words.shape)
    if noise.kind == "symmetric":
        return phi ^ _mask_packed(rng, up, cells_shape, words.shape)
    flip = (~phi) & _mask_packed(rng, up, cells_shape, words.shape)
    flip |= phi & _mask_packed(rng, down, cells_shape, words.shape)
    return phi ^ flip


def _pack(states: np.ndarray) -> np.ndarray:
    bits = np.ascontiguousarray(states.astype(bool))
    packed = np.packbits(bits, axis=-1, bitorder="little")
    shape = states.shape[:-1] + (states.shape[-1] // 64,)
    return np.ascontiguousarray(packed).view(np.uint64).reshape(shape)


def _unpack(words: np.ndarray, lx: int) -> np.ndarray:
    bytes_ = np.ascontiguousarray(words).view(np.uint8)
    bits = np.unpackbits(bytes_, axis=-1, bitorder="little")
    return bits[..., :lx]


def _use_packed(rule: UpdateRule, noise: NoiseModel, dims) -> bool:
    return noise.kind != "table" and dims[0] % 64 == 0 and rule.d <= 2


def _initial_states(init, batch, dims, rng) -> np.ndarray:
    shape = (batch,) + tuple(reversed(dims))
    if init == "zeros":
        return np.zeros(shape, dtype=np.uint8)
    if init == "ones":
        return np.ones(shape, dtype=np.uint8)
    if isinstance(init, tuple) and len(init) == 2 and init[0] == "bernoulli":
        thr = int(round(float(init[1]) * PROB_SCALE))
        draws = rng.integers(0, PROB_SCALE, size=shape, dtype=np.uint16)
        return (draws < thr).astype(np.uint8)
    raise InputError(f"unknown initial condition {init!r}")


# ---------------------------------------------------------------------------
# batched ensemble driver


def run_ensemble(
    rule: UpdateRule,
    noise: NoiseModel,
    dims,
    steps: int,
    seed: int,
    replicas: int,
    init="zeros",
    measure=None,
    measure_times=(),
    batch_size: int = DEFAULT_BATCH,
    threads: int = 1,
    stream0: int = 0,
):
    """Run `replicas` independent copies; at each time in `measure_times`
    apply `measure` to the unpacked (batch, ...) state array and collect the
    per-replica rows.  Returns {t: np.ndarray of shape (replicas, ...)}.
    """
    dims = check_dims(rule, dims)
    mtimes = sorted(set(int(t) for t in measure_times))
    if mtimes and (mtimes[0] < 0 or mtimes[-1] > steps):
        raise InputError("measure times outside [0, steps]")
    packed = _use_packed(rule, noise, dims)
    table_arr = rule.table_array()
    flip_thr = noise.flip_thresholds(rule)
    nbatches = (replicas + batch_size - 1) // batch_size

    def run_batch(b):
        rng = make_rng(seed, stream0 + b)
        bsize = min(batch_size, replicas - b * batch_size)
        states = _initial_states(init, bsize, dims, rng)
        cells_shape = states.shape
        words = _pack(states) if packed else None
        out = {}
        for t in range(steps + 1):
            if measure is not None and t in mtimes:
                cur = _unpack(words, dims[0]) if packed else states
                out[t] = np.asarray(measure(cur))
            if t == steps:
                break
            if packed:
                words = _step_packed(words, rule, noise, rng, dims, cells_shape)
            else:
                states = _step_unpacked(states, table_arr, flip_thr, rule, rng)
        return out

    results = [None] * nbatches
    if threads > 1 and nbatches > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for b, res in zip(range(nbatches), pool.map(run_batch, range(nbatches))):
                results[b] = res
    else:
        for b in range(nbatches):
            results[b] = run_batch(b)
    merged = {}
    for t in mtimes:
        merged[t] = np.concatenate([res[t] for res in results], axis=0)
    return merged


# ---------------------------------------------------------------------------
# single-lattice API


@dataclass(frozen=True)
class TorusLattice:
    """One periodic configuration; states indexed [x2, x1] (or [x1] in d=1)."""

    dims: tuple[int, ...]
    states: np.ndarray

    @staticmethod
    def filled(dims, value: int) -> "TorusLattice":
        dims = tuple(int(x) for x in dims)
        arr = np.full(tuple(reversed(dims)), int(value), dtype=np.uint8)
        return TorusLattice(dims, arr)

    def density(self) -> float:
        return float(self.states.mean())


def step(lattice: TorusLattice, rule: UpdateRule, noise: NoiseModel, rng) -> TorusLattice:
    """One synchronous update with periodic wraparound; each cell draws
    independently per the noise model."""
    check_dims(rule, lattice.dims)
    if lattice.states.shape != tuple(reversed(lattice.dims)):
        raise InputError("lattice state array does not match its dims")
    states = lattice.states[np.newaxis, ...]
    new = _step_unpacked(states, rule.table_array(), noise.flip_thresholds(rule), rule, rng)
    return TorusLattice(lattice.dims, new[0])


# ---------------------------------------------------------------------------
# recorded space-time windows


@dataclass(frozen=True)
class SpaceTimeConfig:
    """A recorded window of states over space x {0..T}.

    states has shape (T+1, L_d, ..., L_1); entry [t, ..., x2, x1].  Error
    flags are recomputable from the states and the rule.
    """

    rule: UpdateRule
    dims: tuple[int, ...]
    states: np.ndarray
    noise: NoiseModel
    seed: int | None
    initial: str
    periodic: bool = True

    @property
    def T(self) -> int:
        return self.states.shape[0] - 1

    def state(self, x, t: int) -> int:
        return int(self.states[(t,) + tuple(reversed(x))])

    def error_flags(self) -> np.ndarray:
        """flags[t-1, ...] is True iff the recorded state at time t differs
        from the rule applied to the recorded states at time t-1 (torus)."""
        prev = self.states[:-1]
        idx = _config_index_unpacked(prev, self.rule)
        phi = np.take(self.rule.table_array(), idx)
        return self.states[1:] != phi

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(
            json.dumps(
                {
                    "rule": self.rule.name or "custom",
                    "dims": list(self.dims),
                    "T": self.T,
                    "noise": self.noise.describe(),
                    "seed": self.seed,
                    "initial": self.initial,
                },
                sort_keys=True,
            ).encode()
        )
        h.update(np.ascontiguousarray(self.states).tobytes())
        return h.hexdigest()

    def recentered(self, point) -> "SpaceTimeConfig":
        """Roll the torus so the given spatial point lands mid-window; used
        before graph building, which treats the window as plain Z^d."""
        if not self.periodic:
            return self
        shifts = []
        for a, ln in enumerate(self.dims):
            shifts.append((ln // 2 - point[a]) % ln)
        arr = self.states
        for a, s in enumerate(shifts):
            arr = np.roll(arr, s, axis=len(self.dims) - a)
        return SpaceTimeConfig(
            self.rule, self.dims, arr, self.noise, self.seed, self.initial, self.periodic
        )


def record_trajectory(
    rule: UpdateRule,
    noise: NoiseModel,
    dims,
    T: int,
    seed: int,
    initial="zeros",
    cap_mb: int | None = None,
) -> SpaceTimeConfig:
    """Record the full window; deterministic given the seed."""
    for cfg in record_trajectories(rule, noise, dims, T, seed, 1, initial, cap_mb=cap_mb):
        return cfg
    raise AssertionError("unreachable")


def record_trajectories(
    rule: UpdateRule,
    noise: NoiseModel,
    dims,
    T: int,
    seed: int,
    replicas: int,
    initial="zeros",
    batch_size: int = DEFAULT_BATCH,
    cap_mb: int | None = None,
):
    """Yield `replicas` recorded windows, batched internally."""
    dims = check_dims(rule, dims)
    cap = resource_cap_mb() if cap_mb is None else cap_mb
    cells = int(np.prod(dims))
    need_mb = (T + 1) * cells * min(batch_size, replicas) / (1 << 20)
    if need_mb > cap:
        raise ResourceCapError(
            f"recording needs ~{need_mb:.0f} MB, over cap {cap} MB "
            f"(set {RESOURCE_CAP_ENV} to raise it)"
        )
    packed = _use_packed(rule, noise, dims)
    table_arr = rule.table_array()
    flip_thr = noise.flip_thresholds(rule)
    init_name = initial if isinstance(initial, str) else f"bernoulli({initial[1]})"
    nbatches = (replicas + batch_size - 1) // batch_size
    for b in range(nbatches):
        rng = make_rng(seed, b)
        bsize = min(batch_size, replicas - b * batch_size)
        states = _initial_states(initial, bsize, dims, rng)
        cells_shape = states.shape
        words = _pack(states) if packed else None
        rec = np.empty((bsize, T + 1) + states.shape[1:], dtype=np.uint8)
        rec[:, 0] = states
        for t in range(1, T + 1):
            if packed:
                words = _step_packed(words, rule, noise, rng, dims, cells_shape)
                rec[:, t] = _unpack(words, dims[0])
            else:
                states = _step_unpacked(states, table_arr, flip_thr, rule, rng)
                rec[:, t] = states
        for i in range(bsize):
            yield SpaceTimeConfig(
                rule, dims, rec[i].copy(), noise, seed, init_name, periodic=True
            )
