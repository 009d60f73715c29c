"""Event-driven run of one accelerated call under the BIST detect-and-fallback protocol.

Timeline of a run:

    processor  |--- software t_s1 ---------------|wait|--- hw t_hf or sw fallback ---|
    BIST       |  ^request  DMA bursts / apply patterns ...|ack(fault bit)

The processor keeps running software until it reaches the accelerated call,
then waits for the BIST acknowledgement and dispatches to the hardware module
(fault bit clear) or to software on the spare cores (fault bit set).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .bist import DEFAULT_CYCLES_PER_PATTERN, DmaConfig, dma_timeline
from .costmodel import Architecture, ModuleCostSpec, runtime

EVENT_KINDS = (
    "SwSegment", "BistRequest", "DmaBurst", "BistStart",
    "SwWait", "BistAck", "HwExec", "SwFallback",
)


@dataclass(frozen=True)
class FaultMode:
    """``none``; ``forced`` (a fault is present, ``detectable`` says whether BIST sees it);
    ``bernoulli`` (present with ``p_fault``, seen with probability ``coverage``)."""

    kind: str = "none"
    detectable: bool = True
    p_fault: float = 0.0
    seed: int = 0
    coverage: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "forced", "bernoulli"):
            raise ValueError(f"unknown fault mode {self.kind!r}")
        if not (0 <= self.p_fault <= 1 and 0 <= self.coverage <= 1):
            raise ValueError("p_fault and coverage must lie in [0, 1]")


@dataclass(frozen=True)
class RunConfig:
    spec: ModuleCostSpec
    bist_request_offset: int = 0
    test_cycles_per_pattern: int = DEFAULT_CYCLES_PER_PATTERN
    dma: DmaConfig | None = None
    pattern_bytes: int = 16
    spare_cores: int = 1
    parallel_efficiency: float = 0.0
    fault_mode: FaultMode = field(default_factory=FaultMode)

    def __post_init__(self):
        if not 0 <= self.bist_request_offset <= self.spec.t_s1:
            raise ValueError("bist_request_offset must lie within the software segment")
        if self.spare_cores < 1:
            raise ValueError("spare_cores must be >= 1")
        if not 0 <= self.parallel_efficiency <= 1:
            raise ValueError("parallel_efficiency must lie in [0, 1]")
        if self.test_cycles_per_pattern < 1 or self.pattern_bytes < 0:
            raise ValueError("test_cycles_per_pattern must be >= 1 and pattern_bytes >= 0")


class Event(NamedTuple):
    cycle: float
    kind: str
    duration: float = 0
    detail: str = ""

    @property
    def end(self) -> float:
        return self.cycle + self.duration


@dataclass(frozen=True)
class SimTrace:
    events: tuple[Event, ...]
    total_cycles: float
    total_energy: float
    fault_present: bool
    fault_bit: bool

    @property
    def silent_escape(self) -> bool:
        """A fault was present but BIST let it through to the hardware path."""
        return self.fault_present and not self.fault_bit


class _Engine:
    def __init__(self):
        self.now = 0.0
        self.events: list[Event] = []
        self._queue: list = []
        self._seq = 0

    def at(self, cycle: float, action: Callable[[], None]):
        heapq.heappush(self._queue, (cycle, self._seq, action))
        self._seq += 1

    def log(self, kind: str, duration: float = 0, detail: str = ""):
        self.events.append(Event(self.now, kind, duration, detail))

    def run(self):
        while self._queue:
            self.now, _, action = heapq.heappop(self._queue)
            action()


def _fault_outcome(mode: FaultMode) -> tuple[bool, bool]:
    """(fault present, detected by BIST)."""
    if mode.kind == "none":
        return False, False
    if mode.kind == "forced":
        return True, mode.detectable
    u = np.random.default_rng(mode.seed).random(2)
    present = bool(u[0] < mode.p_fault)
    return present, present and bool(u[1] < mode.coverage)


def bist_length(cfg: RunConfig) -> tuple[float, int, float]:
    """(BIST cycles incl. visible DMA stall, burst count, DMA energy)."""
    apply = cfg.spec.n_patterns * cfg.test_cycles_per_pattern
    if cfg.dma is None:
        return apply, 0, 0.0
    tl = dma_timeline(cfg.spec.n_patterns * cfg.pattern_bytes, cfg.dma, apply)
    return apply + tl.visible_stall_cycles, tl.bursts, tl.total_energy


def fallback_cycles(cfg: RunConfig) -> float:
    speedup = 1 + cfg.parallel_efficiency * (cfg.spare_cores - 1)
    return cfg.spec.t_sf / speedup


def simulate_run(cfg: RunConfig, outcome: tuple[bool, bool] | None = None) -> SimTrace:
    """Simulate one invocation.  ``outcome`` overrides the fault draw as (present, detected)."""
    spec = cfg.spec
    present, detected = _fault_outcome(cfg.fault_mode) if outcome is None else outcome
    length, bursts, dma_energy = bist_length(cfg)
    sim = _Engine()
    state = {"bist_done": None, "waiting": False}
    offset = cfg.bist_request_offset

    def start():
        if offset > 0:
            sim.log("SwSegment", offset, "before_request")
        sim.at(offset, request)

    def request():
        sim.log("BistRequest")
        sim.log("BistStart", length, f"patterns={spec.n_patterns}")
        if spec.t_s1 - offset > 0:
            sim.log("SwSegment", spec.t_s1 - offset, "after_request")
        if cfg.dma is not None:
            for i in range(bursts):
                sim.at(offset + i * cfg.dma.burst_cycles, lambda i=i: sim.log(
                    "DmaBurst", cfg.dma.burst_cycles, f"burst={i} mode={cfg.dma.mode}"))
        sim.at(offset + length, bist_done)
        sim.at(spec.t_s1, reach_call)

    def bist_done():
        state["bist_done"] = sim.now
        if state["waiting"]:
            ack()

    def reach_call():
        if state["bist_done"] is None:
            state["waiting"] = True
            sim.log("SwWait", offset + length - sim.now)
        else:
            ack()

    def ack():
        sim.log("BistAck", 0, f"fault_bit={int(detected)}")
        if detected:
            sim.log("SwFallback", fallback_cycles(cfg), f"cores_used={cfg.spare_cores}")
        else:
            sim.log("HwExec", spec.t_hf, "fault_present=1" if present else "")

    sim.at(0, start)
    sim.run()
    events = tuple(sim.events)
    total = max(e.end for e in events)
    watts = spec.power.get(Architecture.PROPOSED.value, 0.0)
    return SimTrace(events, total, watts * total / spec.clock_hz + dma_energy, present, detected)


class MonteCarloResult(NamedTuple):
    mean_cycles: float
    stderr: float


def analytic_cycles(spec: ModuleCostSpec, p_fault: float) -> float:
    return runtime(replace(spec, p_fault=p_fault), Architecture.PROPOSED)


def monte_carlo(cfg: RunConfig, trials: int) -> MonteCarloResult:
    """Mean and standard error of the total cycles over ``trials`` Bernoulli runs.

    Draws come from one seeded stream; each distinct outcome is simulated once and
    weighted by how many trials produced it, so the result is order-independent.
    """
    mode = cfg.fault_mode
    if mode.kind != "bernoulli":
        raise ValueError("monte_carlo needs a bernoulli fault mode")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    u = np.random.default_rng(mode.seed).random((trials, 2))
    present = u[:, 0] < mode.p_fault
    detected = present & (u[:, 1] < mode.coverage)
    counts = {
        (False, False): int((~present).sum()),
        (True, True): int(detected.sum()),
        (True, False): int((present & ~detected).sum()),
    }
    totals = {o: simulate_run(cfg, o).total_cycles for o, c in counts.items() if c}
    mean = sum(counts[o] / trials * x for o, x in totals.items())
    if trials == 1:
        return MonteCarloResult(mean, 0.0)
    var = sum(counts[o] * (x - mean) ** 2 for o, x in totals.items()) / (trials - 1)
    return MonteCarloResult(mean, math.sqrt(var / trials))


@dataclass(frozen=True)
class QosRow:
    frame_label: str
    cycles_per_frame_fault: float
    cycles_per_frame_nofault: float


def frame_rate(cycles_per_frame: float, clock_hz: float) -> float:
    if cycles_per_frame <= 0:
        raise ValueError("cycles_per_frame must be positive")
    return clock_hz / cycles_per_frame


def qos_adapt(
    table: Sequence[QosRow],
    clock_hz: float,
    target_fps: float,
    fault_present: bool,
) -> QosRow | None:
    """Largest frame size (table is ordered largest first) that still reaches ``target_fps``."""
    if not table:
        raise ValueError("QoS table is empty")
    for row in table:
        cycles = row.cycles_per_frame_fault if fault_present else row.cycles_per_frame_nofault
        if frame_rate(cycles, clock_hz) >= target_fps:
            return row
    return None
