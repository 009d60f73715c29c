"""Exponential fault-free probability of a circuit, counted in transistors or NAND gates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .costmodel import ARCHITECTURES


@dataclass(frozen=True)
class ReliabilityParams:
    lambda_sum: float = 1e-5  # per transistor, 1/h
    transistors_per_gate: int = 4

    def __post_init__(self):
        if self.lambda_sum <= 0:
            raise ValueError("lambda_sum must be positive")
        if self.transistors_per_gate < 1:
            raise ValueError("transistors_per_gate must be >= 1")


@dataclass(frozen=True)
class ReliabilityCurve:
    architecture: str
    samples: tuple[tuple[float, float], ...]


def fault_free_prob_transistors(n_transistors: float, p: ReliabilityParams, t: float) -> float:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return math.exp(-n_transistors * p.lambda_sum * t)


def fault_free_prob_gates(gates: float, p: ReliabilityParams, t: float) -> float:
    return fault_free_prob_transistors(gates * p.transistors_per_gate, p, t)


def _order_key(label: str):
    known = [a.value for a in ARCHITECTURES]
    return (known.index(label), "") if label in known else (len(known), label)


def reliability_curves(
    gate_counts: Mapping[str, float],
    p: ReliabilityParams,
    t_grid: Sequence[float],
) -> list[ReliabilityCurve]:
    """One curve per architecture; known architectures first in canonical order, then by name."""
    if not t_grid:
        raise ValueError("time grid is empty")
    return [
        ReliabilityCurve(
            str(label),
            tuple((float(t), fault_free_prob_gates(gate_counts[label], p, t)) for t in t_grid),
        )
        for label in sorted(gate_counts, key=lambda a: _order_key(str(a)))
    ]


def linear_grid(t_max: float, steps: int) -> list[float]:
    """``steps`` equal intervals on [0, t_max] (``steps + 1`` points)."""
    if steps < 1 or t_max < 0:
        raise ValueError("need steps >= 1 and t_max >= 0")
    return [t_max * i / steps for i in range(steps + 1)]
