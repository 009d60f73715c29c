"""Workbench configuration: JSON in, validated dataclasses out.

Every problem found is reported, not just the first.  Keys starting with ``_``
are free-form annotations (provenance notes) and are ignored.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .bist import DmaConfig
from .costmodel import RATIO_K, ModuleCostSpec
from .reliability import ReliabilityParams
from .selector import Constraints
from .simulator import QosRow

_NUM = {"type": "number", "minimum": 0}
_INT = {"type": "integer", "minimum": 0}
_NOTES = {"^_": {}}


def _obj(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "patternProperties": _NOTES,
        "additionalProperties": False,
    }


SPEC_SCHEMA = _obj(
    {
        "t_s1": _NUM, "t_sf": _NUM, "t_hf": _NUM, "c_c": _NUM,
        "h_p": _NUM, "h_h": _NUM, "m_s1": _NUM, "m_s2": _NUM, "m_tp": _NUM,
        "n_patterns": _INT,
        "p_fault": {"type": "number", "minimum": 0, "maximum": 1},
        "clock_hz": {"type": "number", "exclusiveMinimum": 0},
        "power": _obj({
            "hardware_redundancy": _NUM, "software_redundancy": _NUM, "proposed": _NUM,
        }),
    },
    required=("t_s1", "t_sf", "t_hf"),
)

DMA_SCHEMA = _obj(
    {
        "setup_cycles": {"type": "integer", "minimum": 1},
        "beats_per_burst": {"type": "integer", "minimum": 1},
        "bytes_per_beat": {"type": "integer", "minimum": 1},
        "energy_per_fetch_optimized": {"type": "number", "exclusiveMinimum": 0},
        "energy_per_fetch_unoptimized": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"enum": ["overlapped", "blocking"]},
    },
    required=("setup_cycles", "beats_per_burst", "bytes_per_beat",
              "energy_per_fetch_optimized", "energy_per_fetch_unoptimized"),
)

FAULT_MODE_SCHEMA = _obj({
    "kind": {"enum": ["none", "forced", "bernoulli"]},
    "detectable": {"type": "boolean"},
    "p_fault": {"type": "number", "minimum": 0, "maximum": 1},
    "coverage": {"type": "number", "minimum": 0, "maximum": 1},
    "seed": _INT,
})

SCHEMA = _obj(
    {
        "seed": _INT,
        "ratio_k": {"type": "number", "exclusiveMinimum": 0},
        "output_dir": {"type": "string"},
        "modules": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": _obj(
                {
                    "spec": SPEC_SCHEMA,
                    "constraints": _obj({"ht": _NUM, "tt": _NUM}, required=("ht", "tt")),
                    "table": {"type": "object"},
                },
                required=("spec",),
            ),
        },
        "reliability": _obj({
            "lambda_sum": {"type": "number", "exclusiveMinimum": 0},
            "transistors_per_gate": {"type": "integer", "minimum": 1},
        }),
        "dma": DMA_SCHEMA,
        "run": _obj({
            "module": {"type": "string"},
            "bist_request_offset": _NUM,
            "test_cycles_per_pattern": {"type": "integer", "minimum": 1},
            "pattern_bytes": _INT,
            "spare_cores": {"type": "integer", "minimum": 1},
            "parallel_efficiency": {"type": "number", "minimum": 0, "maximum": 1},
            "fault_mode": FAULT_MODE_SCHEMA,
        }),
        "montecarlo": _obj({
            "trials": {"type": "integer", "minimum": 1},
            "p_fault": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        }),
        "qos": _obj(
            {
                "table": {"type": "string"},
                "clock_hz": {"type": "number", "exclusiveMinimum": 0},
                "target_fps": _NUM,
            },
            required=("table",),
        ),
        "netlist": {"type": "string"},
        "patterns": {"type": "string"},
        "bist": _obj({
            "budget": _INT,
            "cycles_per_pattern": {"type": "integer", "minimum": 1},
            "fault": {"type": "string"},
        }),
        "coverage": _obj({
            "blocks": {"type": "integer", "minimum": 1},
            "fault_sample": {"type": "integer", "minimum": 1},
            "random_patterns": {"type": "integer", "minimum": 1},
            "prioritize": {"type": "boolean"},
        }),
    },
    required=("modules",),
)


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _strip_notes(obj):
    if isinstance(obj, dict):
        return {k: _strip_notes(v) for k, v in obj.items() if not k.startswith("_")}
    if isinstance(obj, list):
        return [_strip_notes(v) for v in obj]
    return obj


@dataclass
class ModuleEntry:
    spec: ModuleCostSpec
    constraints: Constraints | None = None
    table: dict = field(default_factory=dict)


@dataclass
class WorkbenchConfig:
    modules: dict[str, ModuleEntry]
    reliability: ReliabilityParams = field(default_factory=ReliabilityParams)
    ratio_k: float = RATIO_K
    dma: DmaConfig | None = None
    run: dict[str, Any] = field(default_factory=dict)
    montecarlo: dict[str, Any] = field(default_factory=dict)
    qos: dict[str, Any] = field(default_factory=dict)
    qos_table: list[QosRow] = field(default_factory=list)
    netlist_path: Path | None = None
    pattern_path: Path | None = None
    bist: dict[str, Any] = field(default_factory=dict)
    coverage: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    output_dir: Path | None = None
    base_dir: Path = Path(".")

    def module(self, name: str | None = None) -> tuple[str, ModuleEntry]:
        if name is None:
            name = next(iter(self.modules))
        if name not in self.modules:
            raise ConfigError([f"unknown module {name!r}; known: {', '.join(self.modules)}"])
        return name, self.modules[name]


def parse_qos_table(text: str) -> list[QosRow]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    need = {"frame_label", "cycles_fault", "cycles_nofault"}
    if not reader.fieldnames or not need <= set(reader.fieldnames):
        raise ConfigError([f"QoS table needs columns {sorted(need)}"])
    rows = []
    for i, rec in enumerate(reader, 2):
        try:
            rows.append(QosRow(rec["frame_label"], float(rec["cycles_fault"]), float(rec["cycles_nofault"])))
        except ValueError as exc:
            raise ConfigError([f"QoS table row {i}: {exc}"]) from None
    return rows


def load_config(path: str | Path) -> WorkbenchConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw: Any, base_dir: Path = Path(".")) -> WorkbenchConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    problems = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path))):
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        problems.append(f"{where}: {err.message}")
    if problems:
        raise ConfigError(problems)
    data = _strip_notes(raw)

    modules = {}
    for name, entry in data["modules"].items():
        try:
            spec = ModuleCostSpec.from_dict(entry["spec"])
        except ValueError as exc:
            problems.append(f"modules/{name}/spec: {exc}")
            continue
        cons = Constraints(**entry["constraints"]) if "constraints" in entry else None
        modules[name] = ModuleEntry(spec, cons, entry.get("table", {}))

    dma = None
    if "dma" in data:
        try:
            dma = DmaConfig(**data["dma"])
        except ValueError as exc:
            problems.append(f"dma: {exc}")

    run = dict(data.get("run", {}))
    run_module = run.get("module", next(iter(data["modules"])))
    if run_module not in data["modules"]:
        problems.append(f"run/module: unknown module {run_module!r}")
    elif run_module in modules and run.get("bist_request_offset", 0) > modules[run_module].spec.t_s1:
        problems.append("run/bist_request_offset: exceeds the module's t_s1")

    def existing(key: str, rel: str | None) -> Path | None:
        if rel is None:
            return None
        p = (base_dir / rel).resolve()
        if not p.is_file():
            problems.append(f"{key}: file not found: {p}")
        return p

    netlist_path = existing("netlist", data.get("netlist"))
    pattern_path = existing("patterns", data.get("patterns"))
    qos = dict(data.get("qos", {}))
    qos_path = existing("qos/table", qos.get("table"))
    qos_table = []
    if qos_path is not None and qos_path.is_file():
        try:
            qos_table = parse_qos_table(qos_path.read_text())
        except ConfigError as exc:
            problems.extend(exc.problems)

    if problems:
        raise ConfigError(problems)
    rel = data.get("reliability", {})
    return WorkbenchConfig(
        modules=modules,
        reliability=ReliabilityParams(**rel),
        ratio_k=data.get("ratio_k", RATIO_K),
        dma=dma,
        run=run,
        montecarlo=dict(data.get("montecarlo", {})),
        qos=qos,
        qos_table=qos_table,
        netlist_path=netlist_path,
        pattern_path=pattern_path,
        bist=dict(data.get("bist", {})),
        coverage=dict(data.get("coverage", {})),
        seed=data.get("seed"),
        output_dir=(base_dir / data["output_dir"]) if "output_dir" in data else None,
        base_dir=base_dir,
    )
