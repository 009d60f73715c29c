"""Runtime, resource, energy and communication models for the three redundancy schemes.

Symbols follow the usual hardware/software co-design notation:

    t_s1  software runtime of everything except the accelerated function
    t_sf  software runtime of the accelerated function (fallback path)
    t_hf  hardware runtime of the accelerated function
    c_c   processor <-> accelerator communication cycles
    h_p   processor gates, h_h hardware-module gates
    m_s1, m_s2, m_tp   memory in gate-equivalents (full software, module
                       software, one test pattern)
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping

from .bist import DmaConfig

RATIO_K = 3e9


class Architecture(str, enum.Enum):
    HARDWARE_REDUNDANCY = "hardware_redundancy"
    SOFTWARE_REDUNDANCY = "software_redundancy"
    PROPOSED = "proposed"

    def __str__(self):
        return self.value


ARCHITECTURES = tuple(Architecture)


@dataclass(frozen=True)
class ModuleCostSpec:
    t_s1: float
    t_sf: float
    t_hf: float
    c_c: float = 0
    h_p: float = 0
    h_h: float = 0
    m_s1: float = 0
    m_s2: float = 0
    m_tp: float = 0
    n_patterns: int = 1
    p_fault: float = 0.0
    clock_hz: float = 100e6
    power: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name != "power" and value < 0:
                raise ValueError(f"{f.name} must be non-negative, got {value}")
        if not 0.0 <= self.p_fault <= 1.0:
            raise ValueError(f"p_fault must lie in [0, 1], got {self.p_fault}")
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")
        power = {str(Architecture(k)): float(v) for k, v in dict(self.power).items()}
        if any(v < 0 for v in power.values()):
            raise ValueError("power entries must be non-negative")
        object.__setattr__(self, "power", power)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModuleCostSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown cost-spec fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["power"] = dict(self.power)
        return d


@dataclass(frozen=True)
class CostReport:
    architecture: Architecture
    runtime_cycles: float
    onchip_gates: float
    offchip_memory_gates: float
    energy_joules: float
    perf_per_logic_ratio: float


def runtime(spec: ModuleCostSpec, arch: Architecture) -> float:
    arch = Architecture(arch)
    if arch is Architecture.HARDWARE_REDUNDANCY:
        return spec.t_s1 + spec.t_hf + spec.c_c
    if arch is Architecture.SOFTWARE_REDUNDANCY:
        return spec.t_s1 + spec.t_sf
    # expected value over the hardware being faulty or not; c_c is hidden by DMA overlap
    return spec.t_s1 + spec.t_hf * (1 - spec.p_fault) + spec.t_sf * spec.p_fault


def resources(spec: ModuleCostSpec, arch: Architecture, include_offchip: bool = False):
    """``(onchip_gates, offchip_memory_gates)``; with ``include_offchip`` the single total.

    Code and pattern memory that can live in off-chip RAM is reported separately;
    only one test pattern's buffer sits next to the BIST core.
    """
    arch = Architecture(arch)
    if arch is Architecture.HARDWARE_REDUNDANCY:
        onchip, offchip = spec.h_p + 3 * spec.h_h, spec.m_s2
    elif arch is Architecture.SOFTWARE_REDUNDANCY:
        onchip, offchip = 3 * spec.h_p, 3 * spec.m_s2 + spec.m_s1
    else:
        if spec.n_patterns < 1:
            raise ValueError("the proposed architecture needs at least one test pattern")
        onchip = spec.h_p + spec.h_h + spec.m_tp
        offchip = spec.m_s1 + spec.m_s2 + (spec.n_patterns - 1) * spec.m_tp
    if include_offchip:
        return onchip + offchip
    return onchip, offchip


def energy(spec: ModuleCostSpec, arch: Architecture) -> float:
    arch = Architecture(arch)
    try:
        watts = spec.power[arch.value]
    except KeyError:
        raise KeyError(f"no power entry for {arch.value}") from None
    return watts * runtime(spec, arch) / spec.clock_hz


def ratio(runtime_cycles: float, onchip_gates: float, k: float = RATIO_K) -> float:
    """Performance per logic gate, performance being 1/runtime."""
    if runtime_cycles <= 0 or onchip_gates <= 0:
        raise ValueError("runtime and gate count must be positive")
    return k / (runtime_cycles * onchip_gates)


def evaluate(spec: ModuleCostSpec, arch: Architecture, k: float = RATIO_K) -> CostReport:
    arch = Architecture(arch)
    t = runtime(spec, arch)
    onchip, offchip = resources(spec, arch)
    e = energy(spec, arch) if arch.value in spec.power else 0.0
    return CostReport(arch, t, onchip, offchip, e, ratio(t, onchip, k))


def compare(spec: ModuleCostSpec, k: float = RATIO_K) -> list[CostReport]:
    return [evaluate(spec, arch, k) for arch in ARCHITECTURES]


def perf_ratio(reports, k: float = RATIO_K) -> tuple[float, float, float]:
    """Ratios in (hardware, software, proposed) order.

    ``reports`` is a mapping ``architecture -> CostReport`` or an iterable of reports.
    """
    if isinstance(reports, Mapping):
        by_arch = {Architecture(a): r for a, r in reports.items()}
    else:
        by_arch = {r.architecture: r for r in reports}
    return tuple(ratio(by_arch[a].runtime_cycles, by_arch[a].onchip_gates, k) for a in ARCHITECTURES)


def comm_cost(fetches: int, cfg: DmaConfig, optimized: bool) -> tuple[int, float]:
    """Cycles and joules for ``fetches`` bursts.

    Optimized fetches are prefetched by DMA behind running software, so their time
    is not visible; unoptimized ones stall for the full burst.
    """
    if fetches < 0:
        raise ValueError("fetches must be non-negative")
    cycles = 0 if optimized else fetches * cfg.burst_cycles
    return cycles, fetches * cfg.fetch_energy(optimized)
