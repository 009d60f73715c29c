"""Per-module choice between TMR, the BIST scheme and 3-version software."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .costmodel import ModuleCostSpec


class Choice(str, enum.Enum):
    FTMR = "Ftmr"
    PROPOSED = "Proposed"
    THREE_VERSION_SOFTWARE = "ThreeVersionSoftware"
    NEEDS_REPARTITION = "NeedsRepartition"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Constraints:
    ht: float  # on-chip gate budget for the module
    tt: float  # runtime deadline, cycles

    def __post_init__(self):
        if self.ht < 0 or self.tt < 0:
            raise ValueError("ht and tt must be non-negative")


@dataclass(frozen=True)
class Decision:
    choice: Choice
    guard_ftmr: float
    guard_proposed: float
    guard_sw_time: float
    guard_sw_gates: float

    def __str__(self):
        return self.choice.value


def select_architecture(spec: ModuleCostSpec, c: Constraints) -> Decision:
    """First branch that fits wins; every comparison is strict."""
    g_ftmr = spec.h_p + 3 * spec.h_h
    g_prop = spec.h_p + spec.h_h + spec.m_tp
    g_time = spec.t_s1 + spec.t_sf
    g_gates = 3 * spec.h_p
    if c.ht > g_ftmr:
        choice = Choice.FTMR
    elif c.ht > g_prop:
        choice = Choice.PROPOSED
    elif c.tt > g_time and c.ht > g_gates:
        choice = Choice.THREE_VERSION_SOFTWARE
    else:
        # recovery blocks / 2-version programming have no cost model: flag for repartitioning
        choice = Choice.NEEDS_REPARTITION
    return Decision(choice, g_ftmr, g_prop, g_time, g_gates)


@dataclass(frozen=True)
class SystemPlan:
    decisions: tuple[Decision, ...]

    @property
    def repartition_required(self) -> bool:
        return any(d.choice is Choice.NEEDS_REPARTITION for d in self.decisions)


def plan_system(modules: Sequence[tuple[ModuleCostSpec, Constraints]]) -> SystemPlan:
    if not modules:
        raise ValueError("no modules to plan")
    return SystemPlan(tuple(select_architecture(s, c) for s, c in modules))
