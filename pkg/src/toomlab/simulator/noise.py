"""Noise models for the perturbed dynamics.

Per-cell randomness is quantized to 16-bit thresholds (floor), shared by the
Monte Carlo engine and the exact ring-chain oracle so the two see identical
transition probabilities.  The quantization error is at most 2^-16 and always
downward, so the Bounded-noise bound is never exceeded.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..automaton import UpdateRule
from ..errors import InputError

PROB_SCALE = 1 << 16

KINDS = ("symmetric", "asymmetric", "totally_asymmetric_up", "table")


def _check_prob(p, name):
    if not (0.0 <= float(p) <= 1.0):
        raise InputError(f"{name} must lie in [0, 1], got {p}")
    return float(p)


def _threshold(p) -> int:
    # floor quantization on an exact rational grid
    return int(Fraction(p).limit_denominator(10**12) * PROB_SCALE)


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    eps_up: float = 0.0  # P(output flips | prescribed state is 0)
    eps_down: float = 0.0  # P(output flips | prescribed state is 1)
    table: tuple[float, ...] | None = None  # p(1 | local config), kind "table"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown noise kind {self.kind!r}")
        _check_prob(self.eps_up, "eps_up")
        _check_prob(self.eps_down, "eps_down")
        if self.kind == "totally_asymmetric_up" and self.eps_down != 0.0:
            raise InputError("totally asymmetric noise never flips a prescribed 1")
        if self.kind == "table":
            if self.table is None:
                raise InputError("table noise requires per-configuration probabilities")
            for p in self.table:
                _check_prob(p, "table entry")

    # constructors ---------------------------------------------------------
    @staticmethod
    def symmetric(eps) -> "NoiseModel":
        e = _check_prob(eps, "eps")
        return NoiseModel("symmetric", eps_up=e, eps_down=e)

    @staticmethod
    def asymmetric(eps_up, eps_down) -> "NoiseModel":
        return NoiseModel("asymmetric", eps_up=float(eps_up), eps_down=float(eps_down))

    @staticmethod
    def totally_asymmetric_up(eps) -> "NoiseModel":
        return NoiseModel("totally_asymmetric_up", eps_up=_check_prob(eps, "eps"))

    @staticmethod
    def from_table(p_one) -> "NoiseModel":
        return NoiseModel("table", table=tuple(float(p) for p in p_one))

    # semantics ------------------------------------------------------------
    def flip_thresholds(self, rule: UpdateRule) -> np.ndarray:
        """Quantized flip probability per local configuration, as a threshold
        against a uniform 16-bit draw."""
        n = 1 << rule.r
        phi = rule.table_array()
        if self.kind == "table":
            if len(self.table) != n:
                raise InputError(f"table noise needs {n} entries, got {len(self.table)}")
            err = np.where(phi == 1, 1.0 - np.asarray(self.table), np.asarray(self.table))
        else:
            err = np.where(phi == 1, self.eps_down, self.eps_up)
        return np.array([_threshold(p) for p in err], dtype=np.int64)

    def effective_flip_probs(self, rule: UpdateRule) -> np.ndarray:
        return self.flip_thresholds(rule).astype(np.float64) / PROB_SCALE

    def bound_epsilon(self, rule: UpdateRule) -> float:
        """The Bounded-noise bound: max probability of disobeying the rule."""
        return float(self.effective_flip_probs(rule).max())

    def noise_floor(self, rule: UpdateRule) -> float:
        """High-noise floor: min over configurations and outputs of p(s|omega)."""
        f = self.effective_flip_probs(rule)
        return float(np.minimum(f, 1.0 - f).min())

    def up_down_thresholds(self) -> tuple[int, int]:
        if self.kind == "table":
            raise InputError("table noise has no uniform up/down thresholds")
        return _threshold(self.eps_up), _threshold(self.eps_down)

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "table":
            out["table"] = list(self.table)
        else:
            out["eps_up"] = self.eps_up
            out["eps_down"] = self.eps_down
        return out

    @staticmethod
    def from_spec(obj) -> "NoiseModel":
        """Build from a config-file dictionary like {"kind": ..., "eps": ...}."""
        if isinstance(obj, NoiseModel):
            return obj
        try:
            kind = obj["kind"]
        except (TypeError, KeyError):
            raise InputError("noise spec must be an object with a 'kind'") from None
        if kind == "symmetric":
            return NoiseModel.symmetric(obj["eps"])
        if kind == "asymmetric":
            return NoiseModel.asymmetric(obj["eps_up"], obj["eps_down"])
        if kind == "totally_asymmetric_up":
            return NoiseModel.totally_asymmetric_up(obj["eps"])
        if kind == "table":
            return NoiseModel.from_table(obj["table"])
        raise InputError(f"unknown noise kind {kind!r}")
