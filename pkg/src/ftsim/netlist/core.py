"""NAND/DFF netlists: parsing, logic simulation and single-stuck-at fault simulation.

Simulation is bit-parallel over patterns: every net carries a Python int whose
bit ``p`` is the value seen by pattern ``p``.  Faults are simulated one at a
time (pattern-parallel, single fault), so results never depend on evaluation
order.
"""

from __future__ import annotations

import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DFF_GATE_EQUIVALENTS = 6

_NET_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Bits = tuple[int, ...]


class NetlistError(ValueError):
    """Base class for malformed netlists."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class MultiplyDrivenNetError(NetlistError):
    def __init__(self, net: str):
        self.net = net
        super().__init__(f"net {net!r} is driven more than once")


class UndrivenNetError(NetlistError):
    def __init__(self, net: str, used_as: str = "gate input"):
        self.net = net
        super().__init__(f"net {net!r} used as {used_as} but never driven")


class UndrivenOutputError(UndrivenNetError):
    def __init__(self, net: str):
        super().__init__(net, "primary output")


class CombinationalCycleError(NetlistError):
    def __init__(self, nets: Sequence[str]):
        self.nets = tuple(nets)
        super().__init__("combinational cycle through " + ", ".join(self.nets[:8]))


class WidthMismatchError(ValueError):
    pass


class GoldenMismatchError(ValueError):
    """A pattern's stored golden response disagrees with fault-free simulation."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"pattern {index}: golden response does not match fault-free simulation")


@dataclass(frozen=True)
class FaultSite:
    net: str
    stuck_at: int

    def __post_init__(self):
        if self.stuck_at not in (0, 1):
            raise ValueError(f"stuck_at must be 0 or 1, got {self.stuck_at!r}")

    def __str__(self):
        return f"{self.net}/sa{self.stuck_at}"


@dataclass(frozen=True)
class TestPattern:
    """Stimulus vectors (one per cycle) and the expected outputs.

    ``golden`` covers the trailing ``len(golden)`` cycles of the stimulus;
    a single-vector golden on a multi-cycle stimulus checks only the final cycle.
    """

    __test__ = False  # not a pytest class

    stimulus: tuple[Bits, ...]
    golden: tuple[Bits, ...]
    priority: int = 0

    @property
    def cycles(self) -> int:
        return len(self.stimulus)


@dataclass(frozen=True)
class Netlist:
    name: str
    primary_inputs: tuple[str, ...]
    primary_outputs: tuple[str, ...]
    nand_gates: tuple[tuple[str, str, str], ...]
    dffs: tuple[tuple[str, str, int], ...] = ()
    # hint for pattern generators; the circuit itself has no notion of it
    stimulus_cycles: int = 1
    nets: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "primary_inputs", tuple(self.primary_inputs))
        object.__setattr__(self, "primary_outputs", tuple(self.primary_outputs))
        object.__setattr__(self, "nand_gates", tuple(tuple(g) for g in self.nand_gates))
        object.__setattr__(self, "dffs", tuple((q, d, int(i)) for q, d, i in self.dffs))
        driven: list[str] = []
        seen: set[str] = set()
        sources = (
            list(self.primary_inputs)
            + [g[0] for g in self.nand_gates]
            + [q for q, _, _ in self.dffs]
        )
        for net in sources:
            if net in seen:
                raise MultiplyDrivenNetError(net)
            seen.add(net)
            driven.append(net)
        for out, a, b in self.nand_gates:
            for net in (a, b):
                if net not in seen:
                    raise UndrivenNetError(net)
        for q, d, init in self.dffs:
            if d not in seen:
                raise UndrivenNetError(d, "flip-flop input")
            if init not in (0, 1):
                raise ValueError(f"dff {q}: initial bit must be 0 or 1")
        for net in self.primary_outputs:
            if net not in seen:
                raise UndrivenOutputError(net)
        object.__setattr__(self, "nets", tuple(driven))
        self._order  # raises on cycles

    @property
    def net_count(self) -> int:
        return len(self.nets)

    @cached_property
    def index(self) -> dict[str, int]:
        return {net: i for i, net in enumerate(self.nets)}

    @cached_property
    def _order(self) -> tuple[tuple[int, int, int], ...]:
        """NAND gates as index triples in topological order (Kahn)."""
        idx = {net: i for i, net in enumerate(self.nets)}
        driver = {g[0]: k for k, g in enumerate(self.nand_gates)}
        indeg = [0] * len(self.nand_gates)
        fanout: dict[int, list[int]] = defaultdict(list)
        for k, (_, a, b) in enumerate(self.nand_gates):
            for net in (a, b):
                src = driver.get(net)
                if src is not None:
                    indeg[k] += 1
                    fanout[src].append(k)
        ready = deque(k for k, d in enumerate(indeg) if d == 0)
        order = []
        while ready:
            k = ready.popleft()
            order.append(k)
            for nxt in fanout[k]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if len(order) != len(self.nand_gates):
            stuck = [self.nand_gates[k][0] for k, d in enumerate(indeg) if d > 0]
            raise CombinationalCycleError(stuck)
        return tuple(
            (idx[self.nand_gates[k][0]], idx[self.nand_gates[k][1]], idx[self.nand_gates[k][2]])
            for k in order
        )

    def _run(
        self,
        stim: Sequence[Sequence[int]],
        mask: int,
        fault: tuple[int, int] | None = None,
    ) -> list[list[int]]:
        """Evaluate ``len(stim)`` cycles. ``stim[c][i]`` is the packed word of input ``i``."""
        idx = self.index
        pis = [idx[n] for n in self.primary_inputs]
        pos = [idx[n] for n in self.primary_outputs]
        regs = [(idx[q], idx[d]) for q, d, _ in self.dffs]
        state = [mask if init else 0 for _, _, init in self.dffs]
        fnet, fval = fault if fault is not None else (-1, 0)
        forced = mask if fval else 0
        vals = [0] * self.net_count
        out = []
        for words in stim:
            for i, w in zip(pis, words):
                vals[i] = w
            for (q, _), s in zip(regs, state):
                vals[q] = s
            if fnet >= 0:
                vals[fnet] = forced
            for o, a, b in self._order:
                vals[o] = forced if o == fnet else ~(vals[a] & vals[b]) & mask
            out.append([vals[o] for o in pos])
            # two-phase update: all d read before any q changes
            state = [vals[d] for _, d in regs]
        return out


def _check_net(token: str, line: int) -> str:
    if not _NET_RE.match(token):
        raise NetlistSyntaxError(line, f"invalid net name {token!r}")
    return token


def parse_netlist(text: str | Iterable[str], name: str = "netlist") -> Netlist:
    """Parse ``.gnl`` text (``input``/``output``/``nand``/``dff`` lines, ``#`` comments)."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    inputs: list[str] = []
    outputs: list[str] = []
    gates: list[tuple[str, str, str]] = []
    dffs: list[tuple[str, str, int]] = []
    driven_at: dict[str, int] = {}

    def drive(net: str, line: int):
        if net in driven_at:
            raise MultiplyDrivenNetError(net)
        driven_at[net] = line

    for lineno, raw in enumerate(lines, 1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        kw, args = tokens[0], tokens[1:]
        if kw == "input":
            if not args:
                raise NetlistSyntaxError(lineno, "input needs at least one net")
            for a in args:
                drive(_check_net(a, lineno), lineno)
                inputs.append(a)
        elif kw == "output":
            if not args:
                raise NetlistSyntaxError(lineno, "output needs at least one net")
            outputs.extend(_check_net(a, lineno) for a in args)
        elif kw == "nand":
            if len(args) != 3:
                raise NetlistSyntaxError(lineno, f"nand takes 3 nets, got {len(args)}")
            out, a, b = (_check_net(t, lineno) for t in args)
            drive(out, lineno)
            gates.append((out, a, b))
        elif kw == "dff":
            if len(args) != 3 or args[2] not in ("0", "1"):
                raise NetlistSyntaxError(lineno, "expected 'dff <q> <d> <0|1>'")
            q, d = _check_net(args[0], lineno), _check_net(args[1], lineno)
            drive(q, lineno)
            dffs.append((q, d, int(args[2])))
        else:
            raise NetlistSyntaxError(lineno, f"unknown keyword {kw!r}")
    return Netlist(name, inputs, outputs, gates, dffs)


def format_netlist(n: Netlist) -> str:
    lines = [f"# {n.name}", "input " + " ".join(n.primary_inputs)]
    if n.primary_outputs:
        lines.append("output " + " ".join(n.primary_outputs))
    lines += [f"nand {o} {a} {b}" for o, a, b in n.nand_gates]
    lines += [f"dff {q} {d} {i}" for q, d, i in n.dffs]
    return "\n".join(lines) + "\n"


def _pack(vectors: Sequence[Sequence[Bits]], width: int, cycles: int) -> list[list[int]]:
    """Pack per-pattern vectors into per-cycle, per-signal words (bit p = pattern p)."""
    words = [[0] * width for _ in range(cycles)]
    for p, seq in enumerate(vectors):
        for c, vec in enumerate(seq):
            row = words[c]
            for i, bit in enumerate(vec):
                if bit:
                    row[i] |= 1 << p
    return words


def _check_widths(n: Netlist, stim: Sequence[Sequence[int]]):
    for c, vec in enumerate(stim):
        if len(vec) != len(n.primary_inputs):
            raise WidthMismatchError(
                f"cycle {c}: vector width {len(vec)} != {len(n.primary_inputs)} inputs"
            )
        if any(b not in (0, 1) for b in vec):
            raise ValueError(f"cycle {c}: stimulus bits must be 0 or 1")


def simulate(n: Netlist, stim: Sequence[Sequence[int]], fault: FaultSite | None = None) -> list[Bits]:
    """Outputs for each stimulus cycle, fault-free unless ``fault`` is given."""
    _check_widths(n, stim)
    words = [list(vec) for vec in stim]
    forced = None if fault is None else (n.index[fault.net], fault.stuck_at)
    return [tuple(row) for row in n._run(words, 1, forced)]


def enumerate_faults(n: Netlist) -> list[FaultSite]:
    return [FaultSite(net, v) for net in n.nets for v in (0, 1)]


def gate_equivalents(n: Netlist) -> int:
    return len(n.nand_gates) + DFF_GATE_EQUIVALENTS * len(n.dffs)


@dataclass(frozen=True)
class DetectionMatrix:
    faults: tuple[FaultSite, ...]
    patterns: tuple[TestPattern, ...]
    detects: np.ndarray  # bool [pattern, fault]

    def coverage(self, k: int | None = None) -> float:
        """Fraction of faults detected by the first ``k`` patterns (all when ``None``)."""
        if not self.faults:
            return 0.0
        rows = self.detects[: len(self.patterns) if k is None else k]
        return float(rows.any(axis=0).sum()) / len(self.faults)

    def detected_by(self, p: int) -> set[FaultSite]:
        return {f for f, hit in zip(self.faults, self.detects[p]) if hit}

    def first_detecting(self, fault: FaultSite) -> int | None:
        col = self.detects[:, self.faults.index(fault)]
        hits = np.flatnonzero(col)
        return int(hits[0]) if hits.size else None


def _groups(patterns: Sequence[TestPattern]) -> dict[tuple[int, int], list[int]]:
    groups: dict[tuple[int, int], list[int]] = defaultdict(list)
    for p, pat in enumerate(patterns):
        groups[(pat.cycles, len(pat.golden))].append(p)
    return groups


def fault_simulate(
    n: Netlist,
    patterns: Sequence[TestPattern],
    faults: Sequence[FaultSite],
) -> DetectionMatrix:
    """Detection matrix of ``patterns`` against ``faults``, one fault active at a time."""
    patterns = tuple(patterns)
    faults = tuple(faults)
    idx = n.index
    for f in faults:
        if f.net not in idx:
            raise KeyError(f"fault on unknown net {f.net!r}")
    detects = np.zeros((len(patterns), len(faults)), dtype=bool)
    n_in, n_out = len(n.primary_inputs), len(n.primary_outputs)

    for (cycles, observed), members in _groups(patterns).items():
        if observed > cycles:
            raise ValueError(f"pattern {members[0]}: golden longer than stimulus")
        for p in members:
            _check_widths(n, patterns[p].stimulus)
            if any(len(g) != n_out for g in patterns[p].golden):
                raise WidthMismatchError(f"pattern {p}: golden width != {n_out} outputs")
        mask = (1 << len(members)) - 1
        stim = _pack([patterns[p].stimulus for p in members], n_in, cycles)
        golden = _pack([patterns[p].golden for p in members], n_out, observed)
        first_obs = cycles - observed

        good = n._run(stim, mask)[first_obs:]
        bad = 0
        for row, gold in zip(good, golden):
            for a, b in zip(row, gold):
                bad |= a ^ b
        if bad:
            raise GoldenMismatchError(members[(bad & -bad).bit_length() - 1])

        for j, f in enumerate(faults):
            got = n._run(stim, mask, (idx[f.net], f.stuck_at))[first_obs:]
            diff = 0
            for row, gold in zip(got, golden):
                for a, b in zip(row, gold):
                    diff |= a ^ b
            while diff:
                low = diff & -diff
                detects[members[low.bit_length() - 1], j] = True
                diff ^= low
    return DetectionMatrix(faults, patterns, detects)


def make_pattern(n: Netlist, stimulus: Sequence[Sequence[int]], observe: int | None = None,
                 priority: int = 0) -> TestPattern:
    """Build a pattern whose golden response comes from fault-free simulation."""
    stim = tuple(tuple(int(b) for b in v) for v in stimulus)
    out = simulate(n, stim)
    keep = len(out) if observe is None else observe
    return TestPattern(stim, tuple(out[len(out) - keep:]), priority)


def random_patterns(n: Netlist, count: int, seed: int = 0, cycles: int | None = None) -> list[TestPattern]:
    """Uniform random stimuli, golden responses observed on every cycle."""
    rng = np.random.default_rng(seed)
    cycles = n.stimulus_cycles if cycles is None else cycles
    bits = rng.integers(0, 2, size=(count, cycles, len(n.primary_inputs)))
    return [make_pattern(n, bits[p].tolist(), priority=p) for p in range(count)]


def sample_faults(n: Netlist, count: int, seed: int = 0) -> list[FaultSite]:
    faults = enumerate_faults(n)
    if count > len(faults):
        raise ValueError(f"cannot sample {count} faults from {len(faults)}")
    rng = np.random.default_rng(seed)
    picks = sorted(rng.choice(len(faults), size=count, replace=False).tolist())
    return [faults[i] for i in picks]


def int_to_bits(value: int, width: int) -> Bits:
    """LSB-first bit tuple."""
    return tuple((value >> i) & 1 for i in range(width))


def bits_to_int(bits: Sequence[int]) -> int:
    return sum(b << i for i, b in enumerate(bits))
