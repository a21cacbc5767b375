from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmon_cqed import hilbert as hs
from plasmon_cqed.cavity import DriveSpec, EmitterSpec, NanocavityParams, build_hamiltonian, in_coupling
from plasmon_cqed.constants import HBAR_MEV_FS
from plasmon_cqed.hilbert import HilbertSpec
from plasmon_cqed.lindblad import (
    DEPHASING,
    EvolutionConfig,
    build_liouvillian,
    check_density_matrix,
    coherence_decay_rate,
    evolve,
    propagator_expm,
    steady_state,
)
from plasmon_cqed.observables import expectation


def random_density(d, rng):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def dense_rhs(h, a, szs, kappa, kvibs, rho, convention="literal"):
    sandwich, anti = DEPHASING[convention]
    ad = a.conj().T
    out = -1j * (h @ rho - rho @ h)
    out += 2 * kappa * a @ rho @ ad - kappa * (ad @ a @ rho + rho @ ad @ a)
    for sz, kv in zip(szs, kvibs):
        out += sandwich * kv * sz @ rho @ sz - anti * kv * (sz @ sz @ rho + rho @ sz @ sz)
    return out


def two_emitter_system(spec=None, alpha=0.05, convention="literal"):
    cav = NanocavityParams()
    spec = spec or HilbertSpec(2, 2)
    ems = [EmitterSpec(omega_qe=cav.omega_cav + 15.0, kappa_vib=25.0),
           EmitterSpec(omega_qe=cav.omega_cav - 10.0, kappa_vib=12.0, position=(2.0, 0.0))]
    drive = DriveSpec(omega_p=cav.omega_cav, alpha=alpha, kappa_in=3.0)
    h = build_hamiltonian(spec, cav, ems, None, drive, couplings=[38.0, 20.0])
    return cav, ems, h, build_liouvillian(h, spec, cav, ems, convention)


@pytest.mark.parametrize("convention", ["literal", "half_rate"])
def test_liouvillian_matches_dense_master_equation(convention):
    cav, ems, h, liou = two_emitter_system(convention=convention)
    spec = liou.spec
    rho = random_density(spec.dim, np.random.default_rng(1))
    oracle = dense_rhs(h.toarray(), hs.annihilation(spec).toarray(),
                       [hs.pauli(spec, "z", j).toarray() for j in (1, 2)],
                       cav.kappa_out, [e.kappa_vib for e in ems], rho, convention)
    assert np.allclose(liou.apply(rho), oracle, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_generator_preserves_trace_and_hermiticity(seed):
    _, _, _, liou = two_emitter_system()
    rho = random_density(liou.dim, np.random.default_rng(seed))
    drho = liou.apply(rho)
    assert abs(np.trace(drho)) < 1e-9
    assert np.allclose(drho, drho.conj().T, atol=1e-9)


def test_coherence_decay_rates():
    assert coherence_decay_rate(25.0) == 50.0
    assert coherence_decay_rate(25.0, "half_rate") == 25.0
    spec = HilbertSpec(1, 1)
    cav = NanocavityParams()
    em = EmitterSpec(omega_qe=cav.omega_cav, kappa_vib=25.0)
    h = build_hamiltonian(spec, cav, [em], None, couplings=[0.0])
    for conv in ("literal", "half_rate"):
        liou = build_liouvillian(h, spec, cav, [em], conv)
        coh = np.zeros((4, 4), dtype=complex)
        coh[spec.index(0, (1,)), spec.index(0)] = 1.0
        out = liou.apply(coh)
        assert out[spec.index(0, (1,)), spec.index(0)] == pytest.approx(-coherence_decay_rate(25.0, conv))


def test_rejects_non_hermitian_hamiltonian():
    spec = HilbertSpec(1, 0)
    h = hs.annihilation(spec)
    with pytest.raises(ValueError, match="Hermitian"):
        build_liouvillian(h, spec, NanocavityParams(), [])


def test_adaptive_matches_matrix_exponential_d12():
    _, _, _, liou = two_emitter_system(alpha=0.3)
    assert liou.dim == 12
    rho0 = hs.basis_density(liou.spec, 1)
    cfg = EvolutionConfig(t_max=500.0, record_stride=100)
    adaptive = evolve(liou, rho0, cfg)
    exact = evolve(liou, rho0, replace(cfg, method="expm_propagator"))
    assert np.array_equal(adaptive.times, exact.times)
    assert np.max(np.abs(adaptive.states - exact.states)) < 1e-8
    # direct single-shot propagator as a second oracle
    direct = propagator_expm(liou, 500.0) @ hs.vectorize(rho0)
    assert np.allclose(hs.devectorize(direct), exact.states[-1], atol=1e-10)


def test_rk4_fixed_step_matches_exponential():
    _, _, _, liou = two_emitter_system()
    rho0 = hs.basis_density(liou.spec, 0, (1,))
    cfg = EvolutionConfig(t_max=50.0, dt_initial=0.01, record_stride=500, method="rk4_fixed")
    fixed = evolve(liou, rho0, cfg)
    exact = evolve(liou, rho0, replace(cfg, method="expm_propagator"))
    assert np.max(np.abs(fixed.states - exact.states)) < 1e-8


def test_evolution_invariants_hold_on_snapshots():
    _, _, _, liou = two_emitter_system(alpha=0.5)
    traj = evolve(liou, hs.basis_density(liou.spec, 0, (2,)), EvolutionConfig(t_max=200.0))
    for rho in traj.states:
        check_density_matrix(rho, liou.spec, herm_tol=1e-12, trace_tol=1e-9, pos_tol=1e-9)
    assert traj.warnings == []
    assert traj.times[0] == 0.0 and traj.times[-1] == 200.0


def test_record_times_and_config_validation():
    cfg = EvolutionConfig(t_max=1.2, dt_initial=0.05, record_stride=10)
    assert np.allclose(cfg.record_times(), [0.0, 0.5, 1.0, 1.2])
    with pytest.raises(ValueError):
        EvolutionConfig(t_max=0.0)
    with pytest.raises(ValueError):
        EvolutionConfig(t_max=1.0, method="euler")
    with pytest.raises(ValueError):
        EvolutionConfig(t_max=1.0, record_stride=0)


def test_rejects_invalid_initial_state():
    _, _, _, liou = two_emitter_system()
    with pytest.raises(ValueError):
        evolve(liou, 2 * hs.basis_density(liou.spec, 0), EvolutionConfig(t_max=1.0))


@pytest.mark.parametrize("detuning", [-80.0, 0.0, 35.0])
def test_empty_cavity_steady_state_is_coherent(detuning):
    cav = NanocavityParams()
    spec = HilbertSpec(3, 0)
    drive = DriveSpec(omega_p=cav.omega_cav - detuning, alpha=1e-4, kappa_in=in_coupling(cav))
    h = build_hamiltonian(spec, cav, [], None, drive)
    rho = steady_state(build_liouvillian(h, spec, cav, []))
    a_mean = expectation(hs.annihilation(spec), rho)
    beta = -math.sqrt(drive.kappa_in) * drive.alpha / (cav.kappa_out + 1j * detuning)
    assert a_mean == pytest.approx(beta, rel=1e-9)
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-14)


def test_steady_state_agrees_with_long_time_evolution():
    _, _, _, liou = two_emitter_system(alpha=0.5)
    rho_ss = steady_state(liou)
    assert np.max(np.abs(liou.apply(rho_ss))) < 1e-10
    late = propagator_expm(liou, 2000.0) @ hs.vectorize(hs.basis_density(liou.spec, 0))
    assert np.allclose(hs.devectorize(late), rho_ss, atol=1e-9)


def test_photon_decays_at_twice_kappa_out():
    cav = NanocavityParams()
    spec = HilbertSpec(1, 0)
    liou = build_liouvillian(build_hamiltonian(spec, cav, [], None), spec, cav, [])
    traj = evolve(liou, hs.basis_density(spec, 1), EvolutionConfig(t_max=20.0))
    n = np.real(traj.states[:, spec.index(1), spec.index(1)])
    assert np.allclose(n, np.exp(-2 * cav.kappa_out * traj.times / HBAR_MEV_FS), atol=1e-9)
