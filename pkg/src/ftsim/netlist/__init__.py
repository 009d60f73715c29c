from .core import (
    DFF_GATE_EQUIVALENTS,
    CombinationalCycleError,
    DetectionMatrix,
    FaultSite,
    GoldenMismatchError,
    MultiplyDrivenNetError,
    Netlist,
    NetlistError,
    NetlistSyntaxError,
    TestPattern,
    UndrivenNetError,
    UndrivenOutputError,
    WidthMismatchError,
    bits_to_int,
    enumerate_faults,
    fault_simulate,
    format_netlist,
    gate_equivalents,
    int_to_bits,
    make_pattern,
    parse_netlist,
    random_patterns,
    sample_faults,
    simulate,
)
from .examples import build_example, macc, sorter

__all__ = [name for name in dir() if not name.startswith("_")]
