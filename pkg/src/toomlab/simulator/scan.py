"""Critical-noise bracketing by bisection on a survival order parameter.

The literature quotes epsilon_c values from heterogeneous methods and no
finite-size protocol is canonical, so results are brackets tied to an
explicit protocol: lattice size, horizon, burn-in, classifier threshold and
bisection depth, all echoed in the digest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..automaton import UpdateRule
from ..errors import RegimeError
from .engine import run_ensemble
from .noise import NoiseModel


@dataclass(frozen=True)
class ScanProtocol:
    dims: tuple[int, ...]
    T: int
    burn_in: int
    eps_lo: float
    eps_hi: float
    depth: int
    seed: int
    replicas: int = 1
    mixed_density: float | None = None  # density in the disordered phase
    sample_every: int = 8

    def describe(self) -> dict:
        return {
            "dims": list(self.dims), "T": self.T, "burn_in": self.burn_in,
            "eps_lo": self.eps_lo, "eps_hi": self.eps_hi, "depth": self.depth,
            "seed": self.seed, "replicas": self.replicas,
            "mixed_density": self.mixed_density, "sample_every": self.sample_every,
        }


@dataclass(frozen=True)
class ScanResult:
    bracket: tuple[float, float]
    threshold: float
    curve: tuple[tuple[float, float], ...]  # (eps, order parameter) evaluations
    digest: str
    protocol: dict = field(default_factory=dict)


def _noise_for(kind: str, eps: float) -> NoiseModel:
    if kind == "symmetric":
        return NoiseModel.symmetric(eps)
    if kind == "totally_asymmetric_up":
        return NoiseModel.totally_asymmetric_up(eps)
    raise RegimeError(f"scan supports symmetric or totally asymmetric noise, not {kind!r}")


def _default_mixed_density(kind: str) -> float:
    # symmetric noise mixes to density 1/2; up-biased noise collapses to all-ones
    return 0.5 if kind == "symmetric" else 1.0


def order_parameter(rule: UpdateRule, kind: str, eps: float, proto: ScanProtocol) -> float:
    """Minority-state (ones) density from the all-zeros start, time-averaged
    over [burn_in, T]."""
    noise = _noise_for(kind, eps)
    times = list(range(proto.burn_in, proto.T + 1, proto.sample_every))

    def measure(states):
        red = tuple(range(1, states.ndim))
        return states.astype(np.float64).mean(axis=red)

    res = run_ensemble(
        rule, noise, proto.dims, proto.T, proto.seed, proto.replicas,
        measure=measure, measure_times=times,
    )
    return float(np.mean([res[t].mean() for t in times]))


def estimate_critical_epsilon(rule: UpdateRule, kind: str, proto: ScanProtocol) -> ScanResult:
    """Bisect on eps between a surviving low anchor and a mixed high anchor.

    Raises RegimeError (with the raw curve attached) when the anchors do not
    bracket the classifier threshold, e.g. a non-monotone response."""
    curve = []
    rho_lo = order_parameter(rule, kind, proto.eps_lo, proto)
    curve.append((proto.eps_lo, rho_lo))
    rho_hi = order_parameter(rule, kind, proto.eps_hi, proto)
    curve.append((proto.eps_hi, rho_hi))
    mixed = proto.mixed_density
    if mixed is None:
        mixed = _default_mixed_density(kind)
    threshold = 0.5 * (rho_lo + mixed)
    if not (rho_lo < threshold < mixed + 1e-9) or rho_hi < threshold:
        raise RegimeError(
            "scan anchors do not bracket the survival threshold", payload=curve
        )
    lo, hi = proto.eps_lo, proto.eps_hi
    for _ in range(proto.depth):
        mid = 0.5 * (lo + hi)
        rho = order_parameter(rule, kind, mid, proto)
        curve.append((mid, rho))
        if rho < threshold:
            lo = mid
        else:
            hi = mid
    payload = {"rule": rule.name, "kind": kind, **proto.describe()}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return ScanResult((lo, hi), threshold, tuple(curve), digest, payload)
