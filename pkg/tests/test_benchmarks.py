"""Benchmark pipelines: idle tolerance, Dicke baseline, gate FT, cycle time."""

import numpy as np
import pytest

from spincat.catcode import CatCode, ErrorWord
from spincat.protocols import ProtocolParams
from spincat.benchmarks import (
    BenchmarkConfig,
    PulseBudget,
    dicke_infidelity,
    dicke_infidelity_lindblad,
    dicke_time,
    ft_gate_test,
    improvement_ratio,
    realistic_cycle_time,
    tau_max,
)
from spincat.noise import bias_rates


# ---------------------------------------------------------------------------
# Dicke baseline closed forms
# ---------------------------------------------------------------------------

def test_dicke_time_values():
    assert abs(dicke_time(100, 210, 1e-3) - 2.313e-4) / 2.313e-4 < 1e-3
    assert abs(dicke_time(10, 210, 1e-3) - 2.609e-5) / 2.609e-5 < 1e-3


def test_dicke_time_pure_dephasing_limit():
    p = bias_rates(1e9)
    assert abs(dicke_time(1e9, 0, 1e-3) - 6e-3 / p.gamma_z) < 1e-9


def test_dicke_infidelity_zero_time():
    assert dicke_infidelity(0.0, 10, 30) == 0.0


def test_dicke_infidelity_small_t_linearization():
    eta, spin = 10, 30
    p = bias_rates(eta)
    t = 0.02 / p.gamma_z
    lin = (p.gamma_z / 6 + 2 * spin * (p.gamma_plus + p.gamma_minus)) * t
    assert abs(dicke_infidelity(t, eta, spin) - lin) / lin < 0.01


def test_dicke_infidelity_monotone():
    base = dicke_infidelity(1e-4, 10, 30)
    assert dicke_infidelity(2e-4, 10, 30) > base
    assert dicke_infidelity(1e-4, 10, 60) > base
    assert dicke_infidelity(1e-4, 5, 30) > base  # more ladder weight


@pytest.mark.parametrize("eta", [10, 100])
def test_dicke_closed_form_vs_lindblad(eta):
    spin = 30
    t = dicke_time(eta, spin, 1e-3)
    cf = dicke_infidelity(t, eta, spin)
    lb = dicke_infidelity_lindblad(t, eta, spin)
    assert abs(cf - lb) / lb < 0.10


def test_dicke_lindblad_fidelity_convention_more_optimistic():
    lb_d = dicke_infidelity_lindblad(5e-5, 10, 30)
    lb_f = dicke_infidelity_lindblad(5e-5, 10, 30, jump_convention="fidelity")
    assert lb_f < lb_d
    with pytest.raises(ValueError):
        dicke_infidelity_lindblad(1e-5, 10, 30, jump_convention="bogus")


# ---------------------------------------------------------------------------
# tau_max
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_tau_max_bias_monotone():
    lo = tau_max(BenchmarkConfig(6, 30, 10.0, tau_hi=0.5))
    hi = tau_max(BenchmarkConfig(6, 30, 1000.0, tau_hi=0.5))
    assert hi.tau >= lo.tau
    assert lo.fidelity >= 0.999


@pytest.mark.slow
def test_tau_max_tighter_target_shorter():
    loose = tau_max(BenchmarkConfig(6, 30, 10.0, f_target=0.999, tau_hi=0.5))
    tight = tau_max(BenchmarkConfig(6, 30, 10.0, f_target=0.9999, tau_hi=0.5))
    assert tight.tau <= loose.tau


def test_tau_max_zero_noise_unbounded():
    # eta cannot encode zero noise; emulate with explicit tiny rates via a
    # huge tau_hi and check the unbounded flag instead
    res = tau_max(BenchmarkConfig(6, 30, 1e6, f_target=0.999, tau_hi=1e-6))
    assert res.unbounded and res.tau == 1e-6


@pytest.mark.slow
def test_tau_max_swap_ladder_rates_symmetric():
    a = tau_max(BenchmarkConfig(6, 30, 10.0, tau_hi=0.5, plus_fraction=0.3))
    b = tau_max(BenchmarkConfig(6, 30, 10.0, tau_hi=0.5, plus_fraction=0.7))
    assert abs(a.tau - b.tau) / a.tau < 0.02


def test_benchmark_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(6, 30, 10.0, f_target=1.5)
    with pytest.raises(ValueError):
        BenchmarkConfig(6, 30, 10.0, tau_hi=-1.0)


@pytest.mark.slow
def test_improvement_ratio_beats_baseline():
    res = improvement_ratio(6, 10.0, 30, tau_hi=0.5)
    assert res["ratio"] > 1.0
    assert res["tau_max"] > 0 and res["t_dicke"] > 0


# ---------------------------------------------------------------------------
# ft_gate_test
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def p60():
    return ProtocolParams(CatCode(6, 60))


@pytest.mark.slow
def test_ft_no_error(p60):
    for gate in ("cnot_ens", "cnot_elec", "hadamard", "phase"):
        f = ft_gate_test(gate, ErrorWord(0, 0), p60, inputs=((1, 0), (1, 1)))
        assert f >= 1 - 1e-4, gate


@pytest.mark.slow
def test_ft_hadamard_iz3(p60):
    assert ft_gate_test("hadamard", ErrorWord(0, 3), p60,
                        inputs=((1, 0), (1, 1))) >= 0.99


@pytest.mark.slow
def test_ft_hadamard_ladder(p60):
    for w in (ErrorWord(1, 0), ErrorWord(-1, 0)):
        assert ft_gate_test("hadamard", w, p60, inputs=((1, 0), (1, 1))) >= 0.99


@pytest.mark.slow
def test_ft_sharp_drop_beyond_order(p60):
    assert ft_gate_test("phase", ErrorWord(0, 5), p60,
                        inputs=((1, 0), (1, 1))) < 0.95


@pytest.mark.slow
def test_ft_uniform_over_inputs(p60):
    fids = [ft_gate_test("phase", ErrorWord(0, 2), p60, inputs=(inp,))
            for inp in ((1, 0), (0, 1), (1, 1), (1, 1j))]
    assert max(fids) - min(fids) < 0.01


def test_ft_unknown_gate(p60):
    with pytest.raises(ValueError):
        ft_gate_test("toffoli", ErrorWord(0, 1), p60)


# ---------------------------------------------------------------------------
# realistic_cycle_time
# ---------------------------------------------------------------------------

def test_cycle_pm_stage_decreases_with_spin():
    pms = [realistic_cycle_time(CatCode(6, spin)).pm_stage
           for spin in (21, 39, 81)]
    assert pms[0] > pms[1] > pms[2]


def test_cycle_z_stage_roughly_constant():
    zs = [realistic_cycle_time(CatCode(6, spin)).z_stage
          for spin in (21, 39, 81)]
    assert max(zs) / min(zs) < 1.25


def test_cycle_total_magnitude():
    r = realistic_cycle_time(CatCode(6, 99))
    assert 1000 / 3 <= r.total <= 3000
    assert r.fidelity >= 0.998


def test_cycle_infeasible_reports_bottleneck():
    with pytest.raises(RuntimeError, match="bottleneck"):
        realistic_cycle_time(CatCode(6, 30),
                             budget=PulseBudget(gamma_deco=1e-2))
