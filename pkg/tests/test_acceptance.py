"""End-to-end acceptance checks.

Each test exercises one top-level requirement at its stated tolerance and
prints a single PASS/FAIL line with the measured numbers. Requirements that
the implementation cannot meet are asserted anyway so they fail visibly
rather than being weakened; the design-notes ledger records why.
"""

from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from spincat.benchmarks import (
    dicke_infidelity,
    dicke_infidelity_lindblad,
    ft_gate_test,
    improvement_ratio,
    realistic_cycle_time,
)
from spincat.catcode import (
    CatCode,
    ErrorWord,
    fit_alpha_beta,
    max_dephasing_order,
    max_dephasing_order_power,
)
from spincat.gates import (
    JointState,
    apply_circuit,
    apply_circuit_density,
    gate_unitary,
)
from spincat.noise import bias_rates, lindblad_evolve
from spincat.protocols import (
    ProtocolParams,
    cnot_electron_control,
    cnot_ensemble_control,
    correct_pm,
    decode_circuit,
    encode_circuit,
    encode_fidelity,
    hadamard_circuit,
    phase_gate_circuit,
)
from spincat.pulses import (
    DriveParams,
    engineered_rotation_sim,
    fourier_coeffs,
    optimize_sequence,
    sideband_flipflop,
)

_NWORK = min(8, os.cpu_count() or 1)


def _line(num: int, name: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:02d} "
          f"{name}: {detail}")
    return ok


def _encode_input(code, alpha, beta):
    from spincat.collective import dim
    ens = np.zeros(dim(code.spin_i), dtype=complex)
    ens[0] = 1.0
    v = np.array([alpha, beta], dtype=complex)
    return JointState.product(code.spin_i, v / np.linalg.norm(v), ens)


def test_criterion_01_modular_support():
    worst = 0.0
    for spin in (9, 15, 30):
        code = CatCode(6, spin)
        outside = ~code.sector_mask(0)
        for which in (0, 1):
            amp = code.logical_state(which).amp
            worst = max(worst, float(np.sum(np.abs(amp[outside]) ** 2)))
    assert _line(1, "modular support", worst < 1e-12,
                 f"max weight outside the M mod 3 = 0 sector "
                 f"{worst:.2e} (< 1e-12)")


def test_criterion_02_codeword_orthogonality():
    spins = (9, 15, 21, 30)
    ovl = []
    for spin in spins:
        code = CatCode(6, spin)
        ovl.append(abs(np.vdot(code.logical_state(0).amp,
                               code.logical_state(1).amp)))
    ok = ovl[-1] <= 1e-6 and all(a > b for a, b in zip(ovl, ovl[1:]))
    assert _line(2, "codeword orthogonality", ok,
                 f"|<0|1>| over I={spins}: "
                 + ", ".join(f"{o:.2e}" for o in ovl)
                 + " (decreasing; last <= 1e-6)")


def test_criterion_03_kl_slope():
    fit6 = fit_alpha_beta(6, range(45, 61, 3))
    fit10 = fit_alpha_beta(10, range(30, 61, 5))
    ok6 = 0.75 * (2 / 6) <= fit6.alpha <= 1.25 * (2 / 6)
    ok10 = 0.75 * (2 / 10) <= fit10.alpha <= 1.25 * (2 / 10)
    agree = all(
        max_dephasing_order(CatCode(n, spin))
        == max_dephasing_order_power(CatCode(n, spin))
        for n in (6, 10) for spin in range(6, 21, 2))
    ok = ok6 and ok10 and agree
    assert _line(3, "correctable-order slope", ok,
                 f"alpha(N=6)={fit6.alpha:.4f} (target 0.333 +-25%), "
                 f"alpha(N=10)={fit10.alpha:.4f} (target 0.200 +-25%; "
                 f"order is still 0 for all I <= 60), "
                 f"dual-route agreement for I <= 20: {agree}")


def test_criterion_04_encoding():
    fids, rts = {}, {}
    for spin in (12, 30):
        p = ProtocolParams(CatCode(6, spin))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fids[spin] = encode_fidelity(p)
        circ = encode_circuit(p) + decode_circuit(p)
        st0 = _encode_input(p.code, 0.6, 0.8j)
        out = apply_circuit(circ, st0)
        rts[spin] = float(np.max(np.abs(out.amp - st0.amp)))
    ok = all(f >= 1 - 1e-6 for f in fids.values()) \
        and all(r < 1e-9 for r in rts.values())
    assert _line(4, "encoding circuit", ok,
                 f"fidelity I=12: {fids[12]:.7f}, I=30: {fids[30]:.7f} "
                 f"(>= 1-1e-6); roundtrip deviation "
                 f"{max(rts.values()):.1e} (< 1e-9)")


def test_criterion_05_fault_tolerant_gates():
    p = ProtocolParams(CatCode(6, 60))
    words = [ErrorWord(0, 1), ErrorWord(0, 2), ErrorWord(0, 3),
             ErrorWord(1, 0), ErrorWord(-1, 0)]
    gates = ("cnot_ens", "cnot_elec", "hadamard", "phase")
    jobs = [(g, w) for g in gates for w in words]
    with ThreadPoolExecutor(max_workers=_NWORK) as ex:
        fids = list(ex.map(lambda j: ft_gate_test(j[0], j[1], p), jobs))
    worst = min(fids)
    deep = ft_gate_test("hadamard", ErrorWord(0, 5), p)
    ok = worst >= 0.99 and deep < 0.99
    assert _line(5, "fault-tolerant gates", ok,
                 f"min fidelity over 4 gates x {{Iz,Iz^2,Iz^3,I+,I-}} at "
                 f"I=60: {worst:.4f} (>= 0.99); Iz^5 injection drops to "
                 f"{deep:.4f} (< 0.99)")


def test_criterion_06_ladder_correction():
    p = ProtocolParams(CatCode(6, 30))
    code = p.code
    circ = correct_pm(p)
    worst = 1.0
    for ladder in (1, -1):
        for a, b in ((1, 0), (1, 1), (1, -1j)):
            psi = code.logical(a, b)
            img = ErrorWord(ladder, 0).apply(psi)
            st = JointState.product(code.spin_i, [1, 0], img.amp)
            rho = apply_circuit_density(circ, st.density(), code.spin_i)
            tgt = JointState.product(code.spin_i, [1, 0], psi.amp)
            worst = min(worst, float(np.real(np.vdot(tgt.amp,
                                                     rho @ tgt.amp))))
    assert _line(6, "ladder-error correction", worst >= 0.999,
                 f"worst recovery fidelity of a single I+- error at I=30: "
                 f"{worst:.5f} (>= 0.999)")


def test_criterion_07_dicke_baseline():
    worst = 0.0
    for spin in (30.0, 210.0):
        for eta in (10.0, 100.0):
            for target in (1e-3, 5e-3):
                lo, hi = 1e-9, 10.0
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if dicke_infidelity(mid, eta, spin) < target:
                        lo = mid
                    else:
                        hi = mid
                cf = dicke_infidelity(lo, eta, spin)
                lb = dicke_infidelity_lindblad(lo, eta, spin)
                worst = max(worst, abs(lb - cf) / cf)
    assert _line(7, "uncorrected two-level baseline", worst <= 0.10,
                 f"max closed-form vs master-equation deviation over "
                 f"I in {{30,210}}, eta in {{10,100}}, infidelity <= 5e-3: "
                 f"{worst:.3%} (<= 10%)")


def test_criterion_08_idle_ratio_scaled():
    t0 = time.time()
    r6 = improvement_ratio(6, 10.0, 60.0)["ratio"]
    r10 = improvement_ratio(10, 10.0, 60.0)["ratio"]
    elapsed = time.time() - t0
    ok = r10 > r6 and r6 > 1 and r10 > 1 and elapsed < 900
    assert _line(8, "idle-ratio scaled run", ok,
                 f"I=60: R(N=10,eta=10)={r10:.2f} > "
                 f"R(N=6,eta=10)={r6:.2f}, both > 1, in {elapsed:.0f}s "
                 f"(< 900 s)")


_RATIO_REFS = {(6, 10.0): 3.93, (10, 10.0): 4.13, (6, 100.0): 5.60,
               (10, 100.0): 14.82, (6, 1000.0): 13.45, (10, 1000.0): 4.01}


@pytest.mark.slow
def test_criterion_08_idle_ratio_full_scale():
    with ThreadPoolExecutor(max_workers=_NWORK) as ex:
        ratios = dict(zip(_RATIO_REFS, ex.map(
            lambda k: improvement_ratio(k[0], k[1], 210.0,
                                        l_values="auto")["ratio"],
            _RATIO_REFS)))
    order10 = ratios[(10, 10.0)] > ratios[(6, 10.0)]
    order1000 = ratios[(6, 1000.0)] > ratios[(10, 1000.0)]
    all_gt1 = all(r > 1 for r in ratios.values())
    within = {k: 0.5 * ref <= ratios[k] <= 1.5 * ref
              for k, ref in _RATIO_REFS.items()}
    ok = order10 and order1000 and all_gt1 and all(within.values())
    assert _line(8, "idle-ratio full scale (I=210)", ok,
                 "R=" + ", ".join(f"(N={n},eta={e:g}): {ratios[(n, e)]:.2f}"
                                  f"/{_RATIO_REFS[(n, e)]:.2f}"
                                  for n, e in ratios)
                 + f"; eta=10 ordering {order10}, eta=1000 ordering "
                 f"{order1000}, all > 1 {all_gt1}, within +-50% "
                 f"{sum(within.values())}/6")


def test_criterion_09_pulse_engineering():
    tau = 2 * np.pi / 5.0
    seq = optimize_sequence(2, tau=tau)
    c = fourier_coeffs(seq, 2)
    q2, p2 = abs(c.q[2]), abs(c.p[2])
    p = DriveParams(4, omega_n=5.0, a=0.1, a_nc=0.1)  # omega_n = 50 a_nc
    fid, _ = engineered_rotation_sim(seq, p, np.pi / 2)
    ok = q2 >= 0.6 and p2 <= 1e-3 and fid >= 0.99
    assert _line(9, "pulse engineering", ok,
                 f"|Q2|={q2:.4f} (>= 0.6), |P2|={p2:.1e} (<= 1e-3); "
                 f"engineered conditional rotation at I=4, "
                 f"omega_n=50*a_nc: fidelity {fid:.4f} (>= 0.99)")


def test_criterion_10_sideband_flip_flop():
    prods, fids = [], []
    for spin in (2, 4, 8):
        p = DriveParams(spin, omega=0.02, omega_n=10.0, a=1.0, a_nc=0.1)
        t_gate, fid = sideband_flipflop(p, 0, "flop")
        fids.append(fid)
        prods.append(t_gate * np.sqrt(spin * (spin + 1)))
    spread = (max(prods) - min(prods)) / min(prods)
    ok = min(fids) >= 0.98 and spread <= 0.10
    assert _line(10, "sideband flip-flop", ok,
                 f"transfer over I in {{2,4,8}}: min {min(fids):.4f} "
                 f"(>= 0.98); optimal-time * sqrt(I(I+1)) spread "
                 f"{spread:.1%} (<= 10%)")


def test_criterion_11_cycle_time_trends():
    res = {spin: realistic_cycle_time(CatCode(6, spin))
           for spin in (20, 40, 80, 100)}
    pm = [res[s].pm_stage for s in (20, 40, 80)]
    z = [res[s].z_stage for s in (20, 40, 80)]
    z_var = (max(z) - min(z)) / min(z)
    total100 = res[100].total
    ok = pm[0] > pm[1] > pm[2] and z_var < 0.25 \
        and total100 <= 3000.0 and total100 >= 1000.0 / 3.0
    assert _line(11, "realistic cycle-time trends", ok,
                 f"I+- stage over I={{20,40,80}}: "
                 + " > ".join(f"{v:.0f}" for v in pm)
                 + f" (decreasing); Iz stage varies {z_var:.1%} (< 25%); "
                 f"full cycle at I=100: {total100:.0f}/a "
                 f"(within 3x of 1000/a)")


def test_criterion_12_numerical_hygiene():
    code = CatCode(6, 30)
    rho0 = np.outer(code.logical(1, 1j).amp,
                    code.logical(1, 1j).amp.conj())
    drift = max(
        abs(float(np.trace(lindblad_evolve(rho0, None, bias_rates(eta),
                                           0.1, 30.0)).real) - 1.0)
        for eta in (10.0, 1000.0))
    p = ProtocolParams(CatCode(6, 60))
    circs = [cnot_ensemble_control(p, 1, 3), cnot_electron_control(p),
             hadamard_circuit(p, 1, 3),
             phase_gate_circuit(p, np.pi / 8, 1, 3)]
    unit = 0.0
    sector = 0.0
    for circ in circs:
        for op in circ.ops:
            u = gate_unitary(op, 60.0)
            unit = max(unit, float(np.max(np.abs(
                u.conj().T @ u - np.eye(u.shape[0])))))
        for a, b in ((1, 0), (0, 1), (1, 1), (1, 1j)):
            ens = p.code.logical(a, b).amp
            out = apply_circuit(circ, JointState.product(60.0, [1, 0], ens))
            pin = p.code.sector_populations(ens)
            pa = np.abs(out.amp.reshape(2, -1)) ** 2
            pout = sum(np.array([pa[e][p.code.sector_mask(s)].sum()
                                 for s in range(p.code.half_n)])
                       for e in (0, 1))
            sector = max(sector, float(np.max(np.abs(pin - pout))))
    ok = drift <= 1e-8 and unit <= 1e-10 and sector <= 1e-8
    assert _line(12, "numerical hygiene", ok,
                 f"master-equation trace drift {drift:.1e} (<= 1e-8); "
                 f"gate unitarity defect {unit:.1e} (<= 1e-10); "
                 f"sector-population drift on logical circuits "
                 f"{sector:.1e} (<= 1e-8)")
