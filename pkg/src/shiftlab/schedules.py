"""Curriculum weighting mechanisms and learning-rate annealing.

A mechanism maps training progress r in [0, 1] to a loss weight lambda in
[0, 1].  Increment mechanisms start at 0 and shift focus toward the target
domain; the steep exponential variant crosses 0.5 earliest, spending the
longest stretch of training on the target side.  Mechanism names below are
the exact strings accepted in config files and on the command line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

STEEP_EXP_INCREMENT = "steep_exp_increment"
LINEAR = "linear"
COSINE = "cosine"
FLAT_EXP_INCREMENT = "flat_exp_increment"
STEP_EXP_DECREMENT = "step_exp_decrement"

_FIXED_RE = re.compile(r"^fixed\(([^)]*)\)$")

INCREMENT_MECHANISMS = (STEEP_EXP_INCREMENT, LINEAR, COSINE, FLAT_EXP_INCREMENT)

# The eight ablation variants, weakest-first ordering kept for sweep output.
TABLE_MECHANISMS = (
    STEP_EXP_DECREMENT,
    "fixed(0.2)",
    "fixed(0.5)",
    "fixed(0.8)",
    FLAT_EXP_INCREMENT,
    COSINE,
    LINEAR,
    STEEP_EXP_INCREMENT,
)

FIXED_MECHANISMS = ("fixed(0.2)", "fixed(0.5)", "fixed(0.8)")

_FORMULAS = {
    STEEP_EXP_INCREMENT: "2/(1+exp(-10r))-1",
    LINEAR: "r",
    COSINE: "1-cos(pi*r/2)",
    FLAT_EXP_INCREMENT: "exp(ln(2)*r^3)-1",
    STEP_EXP_DECREMENT: "2-2/(1+exp(-10r))",
}


def parse_mechanism(name: str) -> tuple[str, float | None]:
    """Split a mechanism string into (kind, fixed_value).

    fixed_value is None except for ``fixed(x)`` mechanisms, whose constant
    must lie in [0, 1].
    """
    name = name.strip()
    m = _FIXED_RE.match(name)
    if m:
        try:
            value = float(m.group(1))
        except ValueError:
            raise ValueError(f"fixed mechanism needs a numeric constant, got {name!r}") from None
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"fixed mechanism constant must lie in [0, 1], got {value}")
        return "fixed", value
    if name in _FORMULAS:
        return name, None
    known = ", ".join((*_FORMULAS, "fixed(x)"))
    raise ValueError(f"unknown schedule mechanism {name!r}; known: {known}")


def lambda_formula(name: str) -> str:
    """Human-readable closed form of a mechanism (for sweep tables)."""
    kind, value = parse_mechanism(name)
    if kind == "fixed":
        return f"{value:g}"
    return _FORMULAS[kind]


@dataclass(frozen=True)
class ScheduleSpec:
    """Mechanism selection plus the target-loss normalizer alpha."""

    mechanism: str = STEEP_EXP_INCREMENT
    alpha: float = 1.0

    def __post_init__(self):
        parse_mechanism(self.mechanism)
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class LrSpec:
    """Annealed rate eta0 / (1 + gamma*r)^beta."""

    eta0: float = 0.01
    gamma: float = 10.0
    beta: float = 0.75

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


def _check_progress(r: float) -> float:
    r = float(r)
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"training progress must lie in [0, 1], got {r}")
    return r


def lambda_at(spec: ScheduleSpec, r: float) -> float:
    """Evaluate the configured mechanism at progress r."""
    r = _check_progress(r)
    kind, fixed_value = parse_mechanism(spec.mechanism)
    if kind == "fixed":
        return fixed_value
    if kind == STEEP_EXP_INCREMENT:
        return 2.0 / (1.0 + math.exp(-10.0 * r)) - 1.0
    if kind == LINEAR:
        return r
    if kind == COSINE:
        return 1.0 - math.cos(math.pi * r / 2.0)
    if kind == FLAT_EXP_INCREMENT:
        return math.exp(math.log(2.0) * r**3) - 1.0
    return 2.0 - 2.0 / (1.0 + math.exp(-10.0 * r))


def blend_weights(spec: ScheduleSpec, r: float) -> tuple[float, float]:
    """(alpha * lambda, 1 - lambda): coefficients of the target and source
    losses in the blended stage-2 objective."""
    lam = lambda_at(spec, r)
    return spec.alpha * lam, 1.0 - lam


def lr_at(spec: LrSpec, r: float) -> float:
    """Annealed learning rate at progress r."""
    r = _check_progress(r)
    return spec.eta0 / (1.0 + spec.gamma * r) ** spec.beta
