"""Acceptance gate: one group of checks per criterion; the summary prints PASS/FAIL per group."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from ftsim.bist import DmaConfig, coverage_curve, dma_timeline, prioritize_patterns, run_bist
from ftsim.config import parse_qos_table
from ftsim.costmodel import ARCHITECTURES, CostReport, ModuleCostSpec, comm_cost, perf_ratio, resources
from ftsim.netlist import build_example, enumerate_faults, fault_simulate, random_patterns
from ftsim.reliability import ReliabilityParams, fault_free_prob_gates, linear_grid, reliability_curves
from ftsim.selector import Choice, Constraints, select_architecture
from ftsim.simulator import FaultMode, RunConfig, analytic_cycles, frame_rate, monte_carlo, qos_adapt

from oracles import brute_detects, literal_procedure

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
TABLES = json.loads((FIXTURES / "tables_fixture.json").read_text())["modules"]
HW, SW, PR = ARCHITECTURES


def criterion(n, title):
    return pytest.mark.criterion(n, title)


# 1 --------------------------------------------------------------------------

C1 = criterion(1, "performance/logic ratio reproduction")


def _table_ratios(module):
    t = TABLES[module]["table"]
    reports = [CostReport(a, t[a.value]["runtime_cycles"], t[a.value]["onchip_gates"], 0, 0, 0) for a in ARCHITECTURES]
    return perf_ratio(reports)


@C1
def test_c1_sorting_ratios():
    hw, sw, pr = _table_ratios("sorting")
    assert hw == pytest.approx(4.9026, rel=5e-3)
    assert sw == pytest.approx(2.6344, rel=1e-3)
    assert pr == pytest.approx(8.8299, rel=1e-3)


@C1
def test_c1_idct_ratios():
    got = _table_ratios("idct")
    assert got == pytest.approx((12.4209, 3.7236, 24.3144), rel=1e-3)


@C1
def test_c1_fixture_gates_and_cycles():
    assert [TABLES["sorting"]["table"][a.value]["onchip_gates"] for a in ARCHITECTURES] == [151789, 120000, 83417]
    assert [TABLES["sorting"]["table"][a.value]["runtime_cycles"] for a in ARCHITECTURES] == [4019, 9490, 4073]
    assert [TABLES["idct"]["table"][a.value]["onchip_gates"] for a in ARCHITECTURES] == [170692, 120000, 84106]
    assert [TABLES["idct"]["table"][a.value]["runtime_cycles"] for a in ARCHITECTURES] == [1415, 6714, 1467]


# 2 --------------------------------------------------------------------------

C2 = criterion(2, "Monte Carlo expected runtime")
MC_SPEC = ModuleCostSpec(t_s1=2000, t_hf=2073, t_sf=7490, n_patterns=256)


def _mc(p, seed=2024):
    cfg = RunConfig(MC_SPEC, test_cycles_per_pattern=2, fault_mode=FaultMode("bernoulli", p_fault=p, seed=seed))
    return monte_carlo(cfg, 100_000)


@C2
def test_c2_bist_fully_overlapped():
    assert MC_SPEC.n_patterns * 2 <= MC_SPEC.t_s1


@C2
def test_c2_one_percent_within_three_stderr():
    mean, err = _mc(0.01)
    want = 2000 + 2073 * 0.99 + 7490 * 0.01
    assert want == pytest.approx(4127.17)
    assert analytic_cycles(MC_SPEC, 0.01) == pytest.approx(want)
    assert err > 0
    assert abs(mean - want) <= 3 * err


@C2
def test_c2_exact_at_endpoints():
    assert _mc(0.0).mean_cycles == 2000 + 2073
    assert _mc(1.0).mean_cycles == 2000 + 7490


@C2
@pytest.mark.parametrize("p", [0.001, 0.1])
def test_c2_sweep(p):
    mean, err = _mc(p, seed=7)
    assert abs(mean - analytic_cycles(MC_SPEC, p)) <= 3 * err


# 3 --------------------------------------------------------------------------

C3 = criterion(3, "DMA prefetch optimization")
DMA = json.loads((FIXTURES / "dma_fetch.json").read_text())


def _reduction(row):
    cfg = DmaConfig(**DMA[row]["dma"])
    before = comm_cost(1, cfg, optimized=False)
    after = comm_cost(1, cfg, optimized=True)
    return before, after, 1 - after[1] / before[1]


@C3
@pytest.mark.parametrize("row", ["idct", "compare"])
def test_c3_optimized_fetch_is_hidden(row):
    before, after, _ = _reduction(row)
    table = DMA[row]["table"]
    assert before[0] == table["before_cycles"]
    assert after[0] == 0 == table["after_cycles"]
    assert before[1] == pytest.approx(table["before_energy_joules"])
    assert after[1] == pytest.approx(table["after_energy_joules"])


@C3
def test_c3_idct_reduction():
    assert _reduction("idct")[2] == pytest.approx(0.397, abs=1e-3)


@C3
def test_c3_compare_reduction():
    assert _reduction("compare")[2] == pytest.approx(0.331, abs=1e-3)


@C3
def test_c3_timeline_agrees():
    cfg = DmaConfig(**DMA["idct"]["dma"])
    tl = dma_timeline(cfg.burst_bytes, cfg, software_slack_cycles=cfg.burst_cycles)
    assert (tl.bursts, tl.total_transfer_cycles, tl.visible_stall_cycles) == (1, 128, 0)


# 4 --------------------------------------------------------------------------

C4 = criterion(4, "fault-free probability curves")
P = ReliabilityParams(lambda_sum=1e-5, transistors_per_gate=4)


def _gates(module):
    return {a.value: TABLES[module]["table"][a.value]["onchip_gates"] for a in ARCHITECTURES}


@C4
def test_c4_point_value():
    assert fault_free_prob_gates(83417, P, 1.0) == pytest.approx(math.exp(-3.33668), rel=1e-6)


@C4
@pytest.mark.parametrize("module", ["sorting", "idct"])
def test_c4_proposed_strictly_highest(module):
    grid = linear_grid(2.0, 200)
    curves = {c.architecture: c.samples for c in reliability_curves(_gates(module), P, grid)}
    for i, t in enumerate(grid):
        if t > 0:
            pr = curves[PR.value][i][1]
            assert pr > curves[HW.value][i][1] and pr > curves[SW.value][i][1]


@C4
@pytest.mark.parametrize("module", ["sorting", "idct"])
def test_c4_log_linear(module):
    grid = linear_grid(2.0, 64)[1:]
    for arch, g in _gates(module).items():
        logs = np.array([math.log(fault_free_prob_gates(g, P, t)) for t in grid])
        expect = -4e-5 * g * np.array(grid)
        np.testing.assert_allclose(logs, expect, rtol=1e-12)


# 5 --------------------------------------------------------------------------

C5 = criterion(5, "QoS frame-rate arithmetic")
QOS = parse_qos_table((FIXTURES / "qos_cycles.csv").read_text())


@C5
@pytest.mark.parametrize("cycles, fps", [(21680195, 25.37), (23321460, 23.58), (11269878, 48.80)])
def test_c5_frame_rates(cycles, fps):
    assert frame_rate(cycles, 550e6) == pytest.approx(fps, abs=0.01)
    assert frame_rate(cycles, 550e6) == pytest.approx(550e6 / cycles, rel=1e-15)


@C5
def test_c5_adaptation():
    assert qos_adapt(QOS, 550e6, 25, fault_present=False).frame_label == "1920x1080"
    assert qos_adapt(QOS, 550e6, 25, fault_present=True).frame_label == "1280x720"


# 6 --------------------------------------------------------------------------

C6 = criterion(6, "architecture selector oracle")


@C6
def test_c6_random_pairs_match_literal_procedure():
    rng = np.random.default_rng(20240601)
    n = 100_000
    # half drawn on a coarse grid so that equality at a guard is common
    coarse = rng.integers(0, 60, size=(n // 2, 7)) * np.array([2000, 2000, 1000, 200, 200, 5000, 400])
    fine = rng.uniform(0, 1, size=(n - n // 2, 7)) * np.array([1e5, 1e5, 2e4, 1e4, 1e4, 4e5, 2e4])
    mismatches = 0
    for h_p, h_h, m_tp, t_s1, t_sf, ht, tt in np.vstack([coarse, fine]).tolist():
        spec = ModuleCostSpec(t_s1=t_s1, t_hf=0, t_sf=t_sf, h_p=h_p, h_h=h_h, m_tp=m_tp)
        got = select_architecture(spec, Constraints(ht, tt)).choice.value
        mismatches += got != literal_procedure(h_p, h_h, m_tp, t_s1, t_sf, ht, tt)
    assert mismatches == 0


@C6
def test_c6_worked_examples():
    idct = ModuleCostSpec.from_dict(TABLES["idct"]["spec"])
    small = ModuleCostSpec(t_s1=2000, t_hf=100, t_sf=6000, h_p=10000, h_h=50000, m_tp=500)
    assert select_architecture(idct, Constraints(180000, 1e6)).choice is Choice.FTMR
    assert select_architecture(idct, Constraints(100000, 1e6)).choice is Choice.PROPOSED
    assert select_architecture(small, Constraints(40000, 9000)).choice is Choice.THREE_VERSION_SOFTWARE
    assert select_architecture(small, Constraints(40000, 7000)).choice is Choice.NEEDS_REPARTITION


# 7 --------------------------------------------------------------------------

C7 = criterion(7, "fault-simulation oracle and BIST properties")
CIRCUITS = {"sorter44": ("sorter", {"n": 4, "w": 4}), "macc48": ("macc", {"w": 4, "k": 8})}


@pytest.fixture(scope="module", params=sorted(CIRCUITS))
def circuit(request):
    kind, params = CIRCUITS[request.param]
    return build_example(kind, **params)


@C7
def test_c7_batch_matrix_equals_brute_force(circuit):
    pats = random_patterns(circuit, 16, seed=99)
    faults = enumerate_faults(circuit)
    m = fault_simulate(circuit, pats, faults)
    expect = np.array([[brute_detects(circuit, p, f) for f in faults] for p in pats])
    assert m.detects.shape == (16, 2 * circuit.net_count)
    assert np.array_equal(m.detects, expect)


@C7
def test_c7_coverage_monotone(circuit):
    pats = random_patterns(circuit, 24, seed=5)
    curve = [c for _, c in coverage_curve(circuit, pats, enumerate_faults(circuit))]
    assert curve[0] == 0.0
    assert all(b >= a for a, b in zip(curve, curve[1:]))


@C7
def test_c7_greedy_prefix_dominates(circuit):
    cands = random_patterns(circuit, 32, seed=21)
    faults = enumerate_faults(circuit)
    orig = fault_simulate(circuit, cands, faults)
    greedy = fault_simulate(circuit, prioritize_patterns(circuit, cands), faults)
    for k in range(len(cands) + 1):
        assert greedy.coverage(k) >= orig.coverage(k)


@C7
def test_c7_no_false_positives():
    nets = [build_example("sorter", n=4, w=4), build_example("macc", w=4, k=8)]
    raised = 0
    for seed in range(1000):
        net = nets[seed % 2]
        pats = random_patterns(net, 3, seed=seed)
        raised += run_bist(net, pats, len(pats)).fault_bit
    assert raised == 0


# 8 --------------------------------------------------------------------------

C8 = criterion(8, "on-chip resource model")
X = 40000


@C8
def test_c8_sorting_resources():
    spec = ModuleCostSpec.from_dict(TABLES["sorting"]["spec"])
    assert [resources(spec, a)[0] for a in ARCHITECTURES] == [111789 + X, 3 * X, X + 43417]


@C8
def test_c8_idct_resources():
    spec = ModuleCostSpec.from_dict(TABLES["idct"]["spec"])
    assert [resources(spec, a)[0] for a in ARCHITECTURES] == [X + 130692, 3 * X, X + 44106]
