"""BIST core model: priority-ordered pattern store, TPG/TRA run, DMA transfer timing."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .netlist import (
    FaultSite,
    Netlist,
    TestPattern,
    WidthMismatchError,
    enumerate_faults,
    fault_simulate,
    simulate,
)

DEFAULT_CYCLES_PER_PATTERN = 2  # apply + compare


@dataclass(frozen=True)
class DmaConfig:
    setup_cycles: int
    beats_per_burst: int
    bytes_per_beat: int
    energy_per_fetch_optimized: float  # joules per burst
    energy_per_fetch_unoptimized: float
    mode: str = "overlapped"

    def __post_init__(self):
        if self.mode not in ("overlapped", "blocking"):
            raise ValueError(f"dma mode must be 'overlapped' or 'blocking', got {self.mode!r}")
        for name in ("setup_cycles", "beats_per_burst", "bytes_per_beat",
                     "energy_per_fetch_optimized", "energy_per_fetch_unoptimized"):
            if getattr(self, name) <= 0:
                raise ValueError(f"dma {name} must be positive")
        if self.energy_per_fetch_optimized >= self.energy_per_fetch_unoptimized:
            raise ValueError("optimized per-fetch energy must be below the unoptimized one")

    @property
    def burst_bytes(self) -> int:
        return self.beats_per_burst * self.bytes_per_beat

    @property
    def burst_cycles(self) -> int:
        return self.setup_cycles + self.beats_per_burst

    def fetch_energy(self, optimized: bool) -> float:
        return self.energy_per_fetch_optimized if optimized else self.energy_per_fetch_unoptimized


@dataclass(frozen=True)
class DmaTimeline:
    bursts: int
    total_transfer_cycles: int
    visible_stall_cycles: int
    total_energy: float


def dma_timeline(total_bytes: int, cfg: DmaConfig, software_slack_cycles: int = 0) -> DmaTimeline:
    """Burst-transfer cost of moving ``total_bytes``.

    In overlapped mode the transfer hides behind ``software_slack_cycles`` of other
    work; blocking mode stalls for the whole transfer.
    """
    if total_bytes < 0:
        raise ValueError("total_bytes must be non-negative")
    bursts = math.ceil(total_bytes / cfg.burst_bytes)
    transfer = bursts * cfg.burst_cycles
    if cfg.mode == "overlapped":
        stall = max(0, transfer - software_slack_cycles)
    else:
        stall = transfer
    return DmaTimeline(bursts, transfer, stall, bursts * cfg.fetch_energy(cfg.mode == "overlapped"))


def pattern_bytes(n: Netlist, pattern: TestPattern) -> int:
    """Bytes the DMA moves for one pattern: stimulus plus golden response."""
    in_bytes = math.ceil(len(n.primary_inputs) / 8)
    out_bytes = math.ceil(len(n.primary_outputs) / 8)
    return pattern.cycles * in_bytes + len(pattern.golden) * out_bytes


def prioritize_patterns(
    n: Netlist,
    candidates: Sequence[TestPattern],
    weights: Mapping[FaultSite, float] | None = None,
    faults: Sequence[FaultSite] | None = None,
) -> list[TestPattern]:
    """Greedy weighted-coverage ordering of ``candidates``.

    Each step takes the pattern that detects the largest weight of still-undetected
    faults (lowest original index on ties).  Patterns adding nothing are appended in
    their original order.  Faults default to the full single-stuck-at universe with
    weight 1; ``weights`` overrides individual faults.
    """
    faults = list(enumerate_faults(n) if faults is None else faults)
    weights = dict(weights or {})
    known = set(faults)
    for f in weights:
        if f not in known:
            raise KeyError(f"weight given for unknown fault {f}")
    matrix = fault_simulate(n, candidates, faults)
    w = np.array([weights.get(f, 1.0) for f in faults], dtype=float)
    remaining = np.ones(len(faults), dtype=bool)
    left = list(range(len(candidates)))
    order = []
    while left:
        gains = [float(w[matrix.detects[p] & remaining].sum()) for p in left]
        best = int(np.argmax(gains))  # first maximum == lowest original index
        if gains[best] <= 0:
            break
        p = left.pop(best)
        order.append(p)
        remaining &= ~matrix.detects[p]
    order += left
    return [replace(candidates[p], priority=rank) for rank, p in enumerate(order)]


@dataclass(frozen=True)
class BistResult:
    fault_bit: bool
    patterns_applied: int
    first_detecting_pattern: int | None
    test_cycles: int
    dma_stall_cycles: int


def run_bist(
    n: Netlist,
    ordered: Sequence[TestPattern],
    budget_N: int,
    fault: FaultSite | None = None,
    cycles_per_pattern: int = DEFAULT_CYCLES_PER_PATTERN,
    dma: DmaConfig | None = None,
    slack_cycles: int | None = None,
) -> BistResult:
    """Apply up to ``budget_N`` patterns in priority order and raise the fault bit on a miscompare.

    A pattern of ``c`` stimulus cycles takes ``cycles_per_pattern + c - 1`` cycles.
    DMA prefetch overlaps pattern application unless ``slack_cycles`` says otherwise.
    """
    if budget_N > len(ordered):
        raise ValueError(f"budget {budget_N} exceeds the {len(ordered)} available patterns")
    if budget_N < 0:
        raise ValueError("budget must be non-negative")
    if cycles_per_pattern < 1:
        raise ValueError("cycles_per_pattern must be >= 1")
    batch = list(ordered[:budget_N])
    first = None
    for k, pat in enumerate(batch):
        response = simulate(n, pat.stimulus, fault)
        if tuple(response[len(response) - len(pat.golden):]) != tuple(pat.golden):
            first = k
            break
    applied = budget_N if first is None else first + 1
    test_cycles = sum(cycles_per_pattern + p.cycles - 1 for p in batch[:applied])
    stall = 0
    if dma is not None:
        nbytes = sum(pattern_bytes(n, p) for p in batch[:applied])
        slack = test_cycles if slack_cycles is None else slack_cycles
        stall = dma_timeline(nbytes, dma, slack).visible_stall_cycles
    return BistResult(first is not None, applied, first, test_cycles, stall)


def coverage_curve(
    n: Netlist,
    ordered: Sequence[TestPattern],
    faults: Sequence[FaultSite],
    block_size: int | None = None,
) -> list[tuple[int, float]]:
    """Cumulative coverage after each pattern, or after each block of ``block_size`` patterns.

    The first point is ``(0, 0.0)``.
    """
    points = [(0, 0.0)]
    if not ordered or not faults:
        return points
    matrix = fault_simulate(n, ordered, faults)
    step = block_size or 1
    if step < 1:
        raise ValueError("block_size must be >= 1")
    seen = np.zeros(len(faults), dtype=bool)
    for k, start in enumerate(range(0, len(ordered), step), 1):
        seen |= matrix.detects[start:start + step].any(axis=0)
        points.append((k, float(seen.sum()) / len(faults)))
    return points


def default_block_size(count: int, blocks: int = 3) -> int:
    return max(1, math.ceil(count / blocks))


# .tpat: "pattern <priority> stim <hex>[,<hex>...] golden <hex>[,...]"
# hex vectors are LSB-first over the netlist's input/output order


def _to_hex(bits: Sequence[int], width: int) -> str:
    value = sum(b << i for i, b in enumerate(bits))
    return format(value, f"0{max(1, math.ceil(width / 4))}x")


def _from_hex(token: str, width: int, lineno: int) -> tuple[int, ...]:
    try:
        value = int(token, 16)
    except ValueError:
        raise ValueError(f"line {lineno}: bad hex vector {token!r}") from None
    if value >> width:
        raise WidthMismatchError(f"line {lineno}: vector {token} wider than {width} bits")
    return tuple((value >> i) & 1 for i in range(width))


def format_patterns(n: Netlist, patterns: Sequence[TestPattern]) -> str:
    n_in, n_out = len(n.primary_inputs), len(n.primary_outputs)
    lines = []
    for p in patterns:
        stim = ",".join(_to_hex(v, n_in) for v in p.stimulus)
        gold = ",".join(_to_hex(v, n_out) for v in p.golden)
        lines.append(f"pattern {p.priority} stim {stim} golden {gold}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_patterns(text: str, n: Netlist) -> list[TestPattern]:
    """Read a ``.tpat`` file; patterns come back sorted by priority."""
    n_in, n_out = len(n.primary_inputs), len(n.primary_outputs)
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if len(tokens) != 6 or tokens[0] != "pattern" or tokens[2] != "stim" or tokens[4] != "golden":
            raise ValueError(f"line {lineno}: expected 'pattern <priority> stim <hex,...> golden <hex,...>'")
        try:
            priority = int(tokens[1])
        except ValueError:
            raise ValueError(f"line {lineno}: bad priority {tokens[1]!r}") from None
        stim = tuple(_from_hex(t, n_in, lineno) for t in tokens[3].split(","))
        gold = tuple(_from_hex(t, n_out, lineno) for t in tokens[5].split(","))
        if len(gold) > len(stim):
            raise ValueError(f"line {lineno}: more golden vectors than stimulus cycles")
        out.append(TestPattern(stim, gold, priority))
    out.sort(key=lambda p: p.priority)
    return out
