"""Monte Carlo estimators over the batched engine.

Estimates average first over torus translations within a replica (the
dynamics is translation invariant) and then report mean and standard error
across independent replicas.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from ..automaton import UpdateRule
from ..errors import InputError
from .engine import run_ensemble
from .noise import NoiseModel


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int  # replica count
    seed: int
    config_digest: str
    extras: dict = field(default_factory=dict)

    def sigma_floor(self) -> float:
        """Standard error with a Poisson-style floor for zero/low counts, used
        when comparing rare-event estimates against bounds."""
        samples = self.extras.get("samples")
        if not samples:
            return self.stderr
        hits = self.extras.get("hits", 0)
        return max(self.stderr, sqrt(max(hits, 1.0)) / samples)


def _digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _replica_stats(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / sqrt(n)) if n > 1 else 0.0
    return mean, stderr


def _translated_all_ones(states: np.ndarray, block, d: int) -> np.ndarray:
    """Per-replica fraction of torus translations carrying ones on the block."""
    axes = tuple(range(states.ndim - d, states.ndim))
    acc = None
    for site in block:
        shift = tuple(-site[a] for a in reversed(range(d)))
        plane = np.roll(states, shift, axis=axes)
        acc = plane if acc is None else (acc & plane)
    red = tuple(range(1, states.ndim))
    return acc.astype(np.float64).mean(axis=red)


def block_ones_probability(
    rule: UpdateRule,
    noise: NoiseModel,
    block,
    t: int,
    replicas: int,
    dims,
    seed: int,
    threads: int = 1,
) -> Estimate:
    """P(all sites of the block are 1 at time t), started from all-zeros."""
    block = tuple(tuple(int(c) for c in p) for p in block)
    if not block:
        raise InputError("block must be nonempty")
    for p in block:
        if len(p) != rule.d:
            raise InputError("block sites must match the rule dimension")
        for a, c in enumerate(p):
            if not 0 <= c < dims[a]:
                raise InputError(f"block site {p} outside the lattice {dims}")

    def measure(states):
        return _translated_all_ones(states, block, rule.d)

    res = run_ensemble(
        rule, noise, dims, t, seed, replicas, measure=measure, measure_times=(t,),
        threads=threads,
    )
    vals = res[t]
    mean, stderr = _replica_stats(vals)
    cells = int(np.prod(dims))
    payload = {
        "op": "block_ones_probability", "rule": rule.name, "noise": noise.describe(),
        "block": [list(p) for p in block], "t": t, "replicas": replicas,
        "dims": list(dims), "seed": seed,
    }
    samples = replicas * cells
    return Estimate(mean, stderr, replicas, seed, _digest(payload),
                    {"samples": samples, "hits": float(vals.sum() * cells)})


def correlation(
    rule: UpdateRule,
    noise: NoiseModel,
    distance,
    t: int,
    replicas: int,
    dims,
    seed: int,
    threads: int = 1,
) -> Estimate:
    """Cov(omega_x, omega_{x+distance}) in the time-t distribution from
    all-zeros, averaged over torus positions within each replica."""
    dx = tuple(int(c) for c in distance)
    if len(dx) != rule.d:
        raise InputError("distance vector must match the rule dimension")
    d = rule.d

    def measure(states):
        axes = tuple(range(states.ndim - d, states.ndim))
        shift = tuple(-dx[a] for a in reversed(range(d)))
        other = np.roll(states, shift, axis=axes)
        red = tuple(range(1, states.ndim))
        m1 = states.astype(np.float64).mean(axis=red)
        m11 = (states & other).astype(np.float64).mean(axis=red)
        return np.stack([m1, m11], axis=1)

    res = run_ensemble(
        rule, noise, dims, t, seed, replicas, measure=measure, measure_times=(t,),
        threads=threads,
    )
    m1 = res[t][:, 0]
    m11 = res[t][:, 1]
    # plug-in estimate from ensemble means, jackknifed over replicas (squaring
    # per-replica means would bias the covariance on small lattices)
    n = len(m1)
    mean = float(m11.mean() - m1.mean() ** 2)
    if n > 1:
        loo1 = (m1.sum() - m1) / (n - 1)
        loo11 = (m11.sum() - m11) / (n - 1)
        theta = loo11 - loo1**2
        stderr = float(np.sqrt((n - 1) / n * ((theta - theta.mean()) ** 2).sum()))
    else:
        stderr = 0.0
    payload = {
        "op": "correlation", "rule": rule.name, "noise": noise.describe(),
        "distance": list(dx), "t": t, "replicas": replicas, "dims": list(dims),
        "seed": seed,
    }
    return Estimate(mean, stderr, replicas, seed, _digest(payload),
                    {"moment11": float(m11.mean()),
                     "moment11_stderr": _replica_stats(m11)[1],
                     "density": float(m1.mean()),
                     "density_stderr": _replica_stats(m1)[1]})


def density_series(
    rule: UpdateRule,
    noise: NoiseModel,
    dims,
    T: int,
    replicas: int,
    seed: int,
    init="zeros",
    times=None,
    threads: int = 1,
):
    """Mean density of ones at each requested time; returns a list of rows
    (t, mean, stderr, n)."""
    times = list(range(T + 1)) if times is None else sorted(set(times))

    def measure(states):
        red = tuple(range(1, states.ndim))
        return states.astype(np.float64).mean(axis=red)

    res = run_ensemble(
        rule, noise, dims, T, seed, replicas, init=init, measure=measure,
        measure_times=times, threads=threads,
    )
    rows = []
    for t in times:
        mean, stderr = _replica_stats(res[t])
        rows.append((t, mean, stderr, replicas))
    return rows
