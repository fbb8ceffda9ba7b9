"""Lindblad dynamics, biased rates, and recovery channel."""

import numpy as np
import pytest
from scipy.linalg import expm

from spincat.catcode import CatCode, ErrorWord
from spincat.collective import DickeVector, dim, m_index, m_values, op_collective
from spincat.noise import (
    NoiseParams,
    avg_logical_fidelity,
    bias_rates,
    ideal_recovery,
    inject_error,
    lindblad_evolve,
)

ZERO = NoiseParams(0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# bias_rates
# ---------------------------------------------------------------------------

def test_bias_rates_equal_split():
    p = bias_rates(1.0)
    assert (p.gamma_z, p.gamma_plus, p.gamma_minus) == (0.5, 0.25, 0.25)


def test_bias_rates_large_eta():
    p = bias_rates(100.0)
    assert abs(p.gamma_z - 100.0 / 101.0) < 1e-15
    assert abs(p.gamma_tot - 1.0) < 1e-12
    assert abs(p.eta - 100.0) < 1e-10


def test_bias_rates_pure_dephasing_limit():
    p = bias_rates(1e12)
    assert p.gamma_z > 1 - 1e-11 and p.gamma_plus < 1e-12


def test_bias_rates_split_override():
    p = bias_rates(10.0, plus_fraction=0.2)
    assert abs(p.gamma_plus / (p.gamma_plus + p.gamma_minus) - 0.2) < 1e-12
    assert abs(p.eta - 10.0) < 1e-10


def test_bias_rates_rejects_bad_args():
    with pytest.raises(ValueError):
        bias_rates(0.0)
    with pytest.raises(ValueError):
        bias_rates(1.0, plus_fraction=1.5)
    with pytest.raises(ValueError):
        NoiseParams(-0.1, 0.0, 0.0)


# ---------------------------------------------------------------------------
# lindblad_evolve
# ---------------------------------------------------------------------------

def _pure(spin, amp):
    amp = np.asarray(amp, complex)
    amp = amp / np.linalg.norm(amp)
    return np.outer(amp, amp.conj())


def test_zero_noise_is_identity():
    spin = 5
    rng = np.random.default_rng(0)
    v = rng.normal(size=dim(spin)) + 1j * rng.normal(size=dim(spin))
    rho0 = _pure(spin, v)
    rho = lindblad_evolve(rho0, None, ZERO, 1.0, spin)
    assert np.max(np.abs(rho - rho0)) < 1e-12


def test_hamiltonian_only_matches_exact_unitary():
    spin = 4
    h = op_collective(spin, "x").mat * 0.7 + np.diag(m_values(spin)) * 0.3
    v = np.zeros(dim(spin)); v[0] = 1.0
    rho0 = _pure(spin, v)
    rho = lindblad_evolve(rho0, h, ZERO, 2.0, spin)
    u = expm(-2.0j * h)
    exact = u @ rho0 @ u.conj().T
    assert np.max(np.abs(rho - exact)) < 1e-6


def test_two_level_coherence_decays_at_half_gamma_z():
    # coherence between adjacent Dicke levels under pure dephasing
    spin = 30
    noise = NoiseParams(0.0, 0.0, 0.8)
    lo, l1 = m_index(spin, -spin), m_index(spin, -spin + 1)
    v = np.zeros(dim(spin)); v[lo] = v[l1] = 1.0
    rho0 = _pure(spin, v)
    t = 0.9
    rho = lindblad_evolve(rho0, None, noise, t, spin)
    assert abs(abs(rho[lo, l1]) - 0.5 * np.exp(-0.5 * noise.gamma_z * t)) < 1e-4


def test_bottom_level_leak_rate_collectively_enhanced():
    spin = 30
    noise = NoiseParams(0.01, 0.0, 0.0)
    lo = m_index(spin, -spin)
    v = np.zeros(dim(spin)); v[lo] = 1.0
    t = 1e-3
    rho = lindblad_evolve(_pure(spin, v), None, noise, t, spin)
    leak = 1.0 - rho[lo, lo].real
    assert abs(leak / t - 2 * spin * noise.gamma_plus) / (2 * spin * noise.gamma_plus) < 0.05


def test_trace_and_hermiticity_preserved():
    spin = 30
    noise = bias_rates(10.0)
    psi = CatCode(6, spin).logical(1, 1j).amp
    rho = lindblad_evolve(np.outer(psi, psi.conj()), None, noise, 0.05, spin)
    assert abs(np.trace(rho).real - 1.0) < 1e-8
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
    assert np.linalg.eigvalsh(rho).min() > -1e-10


def test_input_validation():
    spin = 2
    rho = np.eye(dim(spin)) / dim(spin)
    with pytest.raises(ValueError):
        lindblad_evolve(np.eye(3), None, ZERO, 1.0, spin)
    with pytest.raises(ValueError):
        lindblad_evolve(2 * rho, None, ZERO, 1.0, spin)


# ---------------------------------------------------------------------------
# ideal_recovery / avg_logical_fidelity
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def code30():
    return CatCode(6, 30)


def test_recovery_identity_on_codespace(code30):
    rec = ideal_recovery(code30, 1, 2)
    for a, b in ((1, 0), (1, 1), (1, -1j)):
        psi = code30.logical(a, b).amp
        out, failure = rec.apply(np.outer(psi, psi.conj()))
        assert np.real(np.vdot(psi, out @ psi)) >= 1 - 1e-9
        assert failure < 1e-9


def test_recovery_completeness_on_correctable_span(code30):
    rec = ideal_recovery(code30, 1, 2)
    cols = []
    for j in (-1, 0, 1):
        for m in range(3):
            for i in (0, 1):
                cols.append(ErrorWord(j, m).apply(code30.logical_state(i)).amp)
    span, _ = np.linalg.qr(np.array(cols).T)
    assert rec.completeness_deficit_on(span) <= 1e-8


def test_recovery_single_ladder_error(code30):
    rec = ideal_recovery(code30, 1, 0)
    psi = code30.logical(1, 1).amp
    for word in (ErrorWord(1, 0), ErrorWord(-1, 0)):
        img = word.apply(code30.logical(1, 1)).amp
        out, _ = rec.apply(np.outer(img, img.conj()))
        assert np.real(np.vdot(psi, out @ psi)) >= 0.999


def test_recovery_dephasing_orders(code30):
    from spincat.catcode import max_dephasing_order
    l = max_dephasing_order(code30)
    rec = ideal_recovery(code30, 0, l)
    psi = code30.logical(1, 1).amp
    for m in range(1, l + 1):
        img = ErrorWord(0, m).apply(code30.logical(1, 1)).amp
        out, _ = rec.apply(np.outer(img, img.conj()))
        assert np.real(np.vdot(psi, out @ psi)) >= 1 - 1e-3


def test_recovery_rejects_bad_orders(code30):
    with pytest.raises(ValueError):
        ideal_recovery(code30, code30.k_ladder + 1, 0)
    with pytest.raises(ValueError):
        ideal_recovery(code30, 0, -1)


def test_avg_fidelity_identity_channel(code30):
    rec = ideal_recovery(code30, 1, 2)
    assert avg_logical_fidelity(code30, lambda r: r, rec) >= 1 - 1e-9


def test_avg_fidelity_depolarizing_bound(code30):
    d = dim(code30.spin_i)
    rec = ideal_recovery(code30, 1, 2)

    def depol(rho):
        return np.eye(d) / d * np.trace(rho).real

    assert avg_logical_fidelity(code30, depol, rec) <= 0.5 + 0.05


def test_avg_fidelity_monotone_in_idle_time(code30):
    noise = bias_rates(10.0)
    rec = ideal_recovery(code30, 1, 2)
    taus = [2e-4, 1e-3, 3e-3, 1e-2]
    fids = [avg_logical_fidelity(
        code30, lambda r, t=t: lindblad_evolve(r, None, noise, t, code30.spin_i),
        rec) for t in taus]
    assert all(b <= a + 1e-9 for a, b in zip(fids, fids[1:]))
    assert fids[0] > 0.999


def test_avg_fidelity_weighted_estimator(code30):
    rec = ideal_recovery(code30, 1, 2)
    f = avg_logical_fidelity(code30, lambda r: r, rec, estimator="weighted")
    assert f >= 1 - 1e-9
    with pytest.raises(ValueError):
        avg_logical_fidelity(code30, lambda r: r, rec, estimator="median")


# ---------------------------------------------------------------------------
# inject_error
# ---------------------------------------------------------------------------

def test_inject_identity_word(code30):
    st = code30.logical_state(0)
    out = inject_error(st, ErrorWord(0, 0))
    assert np.max(np.abs(out.amp - st.amp)) < 1e-12


def test_inject_annihilation_raises():
    spin = 3
    v = np.zeros(dim(spin)); v[0] = 1.0  # |I, I>
    with pytest.raises(ValueError):
        inject_error(DickeVector(spin, v), ErrorWord(1, 0))


def test_inject_dephasing_preserves_sectors(code30):
    st = code30.logical(1, 1)
    out = inject_error(st, ErrorWord(0, 1))
    assert np.max(np.abs(code30.sector_populations(out.amp)[1:])) < 1e-12
