"""Exact Markov-chain oracle for rings (d = 1, L <= 12).

Ground truth for the Monte Carlo engine on tiny systems: the full 2^L-state
transition matrix built from the same quantized per-cell flip probabilities
the engine uses, so the two describe literally the same chain.
"""

from __future__ import annotations

import numpy as np

from ..automaton import UpdateRule
from ..errors import InputError, ResourceCapError
from .noise import NoiseModel

MAX_RING = 12


def _check_ring(rule: UpdateRule, length: int) -> None:
    if rule.d != 1:
        raise InputError("the exact chain oracle handles d = 1 rings only")
    if length > MAX_RING:
        raise ResourceCapError(f"ring length {length} above exact-chain cap {MAX_RING}")
    if length < 2 * rule.max_offset() + 1:
        raise InputError("ring shorter than the neighborhood span")


def _bits_matrix(length: int) -> np.ndarray:
    states = np.arange(1 << length, dtype=np.uint32)
    return ((states[:, None] >> np.arange(length)[None, :]) & 1).astype(np.uint8)


def transition_matrix(rule: UpdateRule, noise: NoiseModel, length: int) -> np.ndarray:
    _check_ring(rule, length)
    n = 1 << length
    bits = _bits_matrix(length)
    table = rule.table_array()
    fp = noise.effective_flip_probs(rule)

    # local configuration index at every site of every state
    idx = np.zeros((n, length), dtype=np.int32)
    for i, off in enumerate(rule.neighborhood):
        cols = (np.arange(length) + off[0]) % length
        idx |= bits[:, cols].astype(np.int32) << i
    det = table[idx]  # deterministic image bits
    flip = fp[idx]  # per-site flip probability

    p = np.empty((n, n), dtype=np.float64)
    for s in range(n):
        agree = bits == det[s][None, :]
        rows = np.where(agree, 1.0 - flip[s][None, :], flip[s][None, :])
        p[s] = rows.prod(axis=1)
    return p


def distribution_at(
    rule: UpdateRule, noise: NoiseModel, length: int, t: int, init="zeros"
) -> np.ndarray:
    p = transition_matrix(rule, noise, length)
    v = np.zeros(1 << length)
    if init == "zeros":
        v[0] = 1.0
    elif init == "ones":
        v[-1] = 1.0
    else:
        raise InputError(f"unknown initial condition {init!r}")
    for _ in range(t):
        v = v @ p
    return v


def stationary(p: np.ndarray, tol: float = 1e-12, max_iter: int = 200000) -> np.ndarray:
    v = np.full(p.shape[0], 1.0 / p.shape[0])
    for _ in range(max_iter):
        nxt = v @ p
        if np.abs(nxt - v).sum() < tol:
            return nxt
        v = nxt
    raise ResourceCapError("power iteration did not converge to tolerance")


def block_probability_exact(dist: np.ndarray, length: int, sites) -> float:
    bits = _bits_matrix(length)
    mask = np.ones(len(dist), dtype=bool)
    for x in sites:
        mask &= bits[:, x % length] == 1
    return float(dist[mask].sum())


def moment_exact(dist: np.ndarray, length: int, sites) -> float:
    """E[prod of omega over the sites]."""
    return block_probability_exact(dist, length, sites)


def density_exact(dist: np.ndarray, length: int) -> float:
    bits = _bits_matrix(length)
    return float((dist[:, None] * bits).sum() / length)


def covariance_exact(dist: np.ndarray, length: int, x: int, y: int) -> float:
    pxy = block_probability_exact(dist, length, [x, y])
    px = block_probability_exact(dist, length, [x])
    py = block_probability_exact(dist, length, [y])
    return pxy - px * py
