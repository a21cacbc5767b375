from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plasmon_cqed import constants as C
from plasmon_cqed import hilbert as hs
from plasmon_cqed.cavity import (
    DriveSpec,
    EmitterSpec,
    ModeProfile,
    NanocavityParams,
    build_hamiltonian,
    coupling_strength,
    default_profile_width,
    drive_for_photon_number,
    effective_coupling,
    emitter_couplings,
    in_coupling,
    load_mode_profile,
    make_drive,
    place_emitters,
    plasmon_lifetime,
    write_mode_profile,
)
from plasmon_cqed.hilbert import HilbertSpec
from plasmon_cqed.observables import extinction_empty

# literal SI values, independent of scipy.constants
H_PLANCK = 6.62607015e-34
EPS0 = 8.8541878128e-12
E_CHARGE = 1.602176634e-19
DEBYE = 3.33564095e-30
G0_FROZEN = 38.664543873889265


def test_central_coupling_against_si_oracle(cav):
    energy = H_PLANCK * 338.9e12
    field = math.sqrt(energy / (2 * EPS0 * 6.25 * 60.01e-27))
    oracle = 10.1 * DEBYE * field / (E_CHARGE * 1e-3)
    g0 = coupling_strength(cav, EmitterSpec(), None)
    assert abs(g0 - oracle) / oracle < 1e-8
    assert abs(g0 - G0_FROZEN) / G0_FROZEN < 1e-8


def test_default_units():
    assert NanocavityParams().omega_cav == pytest.approx(1401.5777821744, rel=1e-12)
    assert NanocavityParams().kappa_out == pytest.approx(40.5295434208, rel=1e-12)
    assert plasmon_lifetime(NanocavityParams()) == pytest.approx(C.HBAR_MEV_FS / 40.5295434208)


def test_coupling_scales_with_dipole_and_volume(cav):
    g = coupling_strength(cav, EmitterSpec(), None)
    assert coupling_strength(cav, EmitterSpec(dipole=20.2), None) == pytest.approx(2 * g, rel=1e-14)
    small = NanocavityParams(mode_volume_re=60.01 / 4)
    assert coupling_strength(small, EmitterSpec(), None) == pytest.approx(2 * g, rel=1e-14)


def test_default_profile_width_places_weak_coupling_at_6nm(cav):
    prof = ModeProfile()
    assert prof.width == pytest.approx(default_profile_width())
    g6 = coupling_strength(cav, EmitterSpec(position=(6.0, 0.0)), prof)
    assert g6 == pytest.approx(C.DEFAULT_KAPPA_VIB, rel=1e-12)
    assert prof(0.0) == 1.0


def test_g0_override_and_scale(cav):
    prof = ModeProfile(width=5.0)
    ems = [EmitterSpec(position=(0.0, 0.0)), EmitterSpec(position=(5.0, 0.0))]
    gs = emitter_couplings(cav, ems, prof, g0=100.0, scale=0.5)
    assert gs == pytest.approx([50.0, 50.0 * math.exp(-0.5)])


def test_tabulated_profile(tmp_path):
    path = tmp_path / "u.txt"
    write_mode_profile(path, [0.0, 1.0, 2.0], [1.0, 0.5, 0.1])
    prof = load_mode_profile(path)
    assert prof(0.5) == pytest.approx(0.75)
    assert prof(-1.5) == pytest.approx(0.3)
    with pytest.raises(ValueError, match="outside"):
        prof(2.5)
    bad = tmp_path / "bad.txt"
    bad.write_text("r u\n0 1\n")
    with pytest.raises(ValueError, match="mode-profile v1"):
        load_mode_profile(bad)
    with pytest.raises(ValueError):
        ModeProfile(kind="tabulated", r=(0.0, 2.0, 1.0), u=(1.0, 0.5, 0.1))


def test_parameter_validation():
    with pytest.raises(ValueError):
        NanocavityParams(kappa_out=0.0)
    with pytest.raises(ValueError):
        NanocavityParams(epsilon=0.5)
    with pytest.raises(ValueError):
        EmitterSpec(kappa_vib=-1.0)
    with pytest.raises(ValueError):
        DriveSpec(omega_p=1.0, alpha=-1.0)
    with pytest.raises(ValueError):
        ModeProfile(width=-1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 200.0), st.floats(1.0, 1e6))
def test_extinction_equals_classical_on_resonance(kappa_out, sigma):
    cav = NanocavityParams(kappa_out=kappa_out, sigma_ext_classical=sigma)
    drive = DriveSpec(omega_p=cav.omega_cav, alpha=1.0, kappa_in=in_coupling(cav))
    assert abs(extinction_empty(cav, drive) - sigma) <= 1e-12 * sigma


@settings(max_examples=30, deadline=None)
@given(st.floats(-300, 300), st.floats(1e-9, 1.0))
def test_photon_number_calibration_inverts(detuning, n):
    cav = NanocavityParams()
    drive = DriveSpec(omega_p=cav.omega_cav + detuning, kappa_in=in_coupling(cav))
    alpha = drive_for_photon_number(cav, drive, n)
    assert drive.kappa_in * alpha**2 / (cav.kappa_out**2 + detuning**2) == pytest.approx(n, rel=1e-12)


def test_make_drive_calibrates_on_resonance(cav):
    d = make_drive(cav, cav.omega_cav + 50.0, photon_number=1e-4)
    assert d.kappa_in * d.alpha**2 / cav.kappa_out**2 == pytest.approx(1e-4, rel=1e-12)
    assert make_drive(cav, cav.omega_cav, alpha=2.0).alpha == 2.0


def test_effective_coupling_placements():
    prof = ModeProfile()
    for x in (0.0, 2.0, 5.0):
        ems = place_emitters("symmetric_pair", 2, x)
        assert effective_coupling(ems, prof) == pytest.approx(math.sqrt(2) * prof(x), rel=1e-14)
    assert effective_coupling(place_emitters("asymmetric_pair", 2, 10.0), prof) < 1.05
    assert effective_coupling(place_emitters("asymmetric_pair", 2, 20.0), prof) == pytest.approx(1.0, abs=1e-4)
    assert effective_coupling(place_emitters("ring", 8, 0.0), prof) == pytest.approx(math.sqrt(8))
    ring = place_emitters("encircled", 5, 3.0)
    assert len(ring) == 5 and ring[0].radius == 0.0
    assert all(e.radius == pytest.approx(3.0) for e in ring[1:])
    with pytest.raises(ValueError):
        place_emitters("symmetric_pair", 3, 1.0)
    with pytest.raises(ValueError):
        place_emitters("spiral", 3, 1.0)


def test_hamiltonian_matches_dense_oracle(cav):
    spec = HilbertSpec(2, 2)
    ems = [EmitterSpec(omega_qe=cav.omega_cav + 10.0), EmitterSpec(omega_qe=cav.omega_cav - 5.0)]
    drive = DriveSpec(omega_p=cav.omega_cav + 3.0, alpha=0.01, kappa_in=2.0)
    h = build_hamiltonian(spec, cav, ems, None, drive, couplings=[30.0, 20.0]).toarray()
    a = np.kron(np.diag(np.sqrt([1.0, 2.0]), 1), np.eye(4))
    s1 = np.kron(np.eye(3), np.kron([[0, 0], [1, 0]], np.eye(2)))
    s2 = np.kron(np.eye(3), np.kron(np.eye(2), [[0, 0], [1, 0]]))
    z1 = np.kron(np.eye(3), np.kron(np.diag([1, -1]), np.eye(2)))
    z2 = np.kron(np.eye(3), np.kron(np.eye(2), np.diag([1, -1])))
    oracle = (
        -3.0 * a.T @ a + 0.5 * 7.0 * z1 + 0.5 * (-8.0) * z2
        + 30.0 * (a.T @ s1 + a @ s1.T) + 20.0 * (a.T @ s2 + a @ s2.T)
        + 1j * math.sqrt(2.0) * 0.01 * (a - a.T)
    )
    assert np.allclose(h, oracle, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.floats(-100, 100), st.floats(0, 80), st.floats(0, 1))
def test_hamiltonian_hermitian_and_truncation_consistent(n_max, n_em, det, g, alpha):
    cav = NanocavityParams()
    ems = [EmitterSpec(omega_qe=cav.omega_cav + det * k) for k in range(n_em)]
    drive = DriveSpec(omega_p=cav.omega_cav, alpha=alpha, kappa_in=1.0)
    full = HilbertSpec(n_max, n_em)
    h = build_hamiltonian(full, cav, ems, None, drive, couplings=[g] * n_em)
    assert abs(h - hs.dagger(h)).max() < 1e-12 if h.nnz else True
    cut = HilbertSpec(n_max, n_em, sector_cap=1)
    h_cut = build_hamiltonian(cut, cav, ems, None, drive, couplings=[g] * n_em)
    idx = cut.retained
    assert np.allclose(h.toarray()[np.ix_(idx, idx)], h_cut.toarray())


def test_undriven_hamiltonian_conserves_excitations(cav):
    spec = HilbertSpec(3, 2)
    ems = [EmitterSpec(position=(1.0, 0.0)), EmitterSpec(position=(-2.0, 0.0))]
    h = build_hamiltonian(spec, cav, ems, ModeProfile())
    n = hs.excitation_number(spec)
    assert abs(h @ n - n @ h).max() < 1e-12
