from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.signal import find_peaks

from conftest import make_config
from plasmon_cqed import runner
from plasmon_cqed.cavity import EmitterSpec, ModeProfile
from plasmon_cqed.config import DriveBlock, SweepBlock
from plasmon_cqed.lindblad import coherence_decay_rate
from plasmon_cqed.sweep import SweepAxis, apply_axis, resolve_workers, run_map, run_position_sweep


def test_axis_validation_and_parsing():
    ax = SweepAxis.parse("delta_p:-10:10:5")
    assert np.allclose(ax.values, [-10, -5, 0, 5, 10])
    assert SweepAxis.parse(str(ax)) == ax
    for bad in ("delta_p:1:0:5", "delta_p:0:1:1", "omega:0:1:3", "delta_p:0:1", "delta_p:a:1:3"):
        with pytest.raises(ValueError):
            SweepAxis.parse(bad)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("PLASMON_CQED_WORKERS", "3")
    assert resolve_workers() == 3
    assert resolve_workers(2) == 2
    monkeypatch.setenv("PLASMON_CQED_WORKERS", "many")
    with pytest.raises(ValueError):
        resolve_workers()
    with pytest.raises(ValueError):
        resolve_workers(0)


def test_map_is_independent_of_worker_count(driven_single):
    a1 = SweepAxis("delta_cav", -40.0, 40.0, 3)
    a2 = SweepAxis("delta_p", -60.0, 60.0, 7)
    serial = run_map(driven_single, a1, a2, "re_a", workers=1)
    pooled = run_map(driven_single, a1, a2, "re_a", workers=3)
    assert serial.grid.shape == (3, 7)
    assert set(serial.grids) == set(pooled.grids)
    for k in serial.grids:
        assert np.array_equal(serial.grids[k], pooled.grids[k])
    assert np.all(np.isfinite(serial.grid)) and serial.n_failed == 0
    assert serial.metadata["code_version"] and "config.nanocavity.kappa_out" in serial.metadata


def test_zero_coupling_row_is_a_single_lorentzian(cav):
    em = EmitterSpec(omega_qe=cav.omega_cav - 30.0)
    cfg = make_config((em,), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav))
    res = run_map(cfg, SweepAxis("g_scale", 0.0, 1.0, 3), SweepAxis("delta_p", -150.0, 150.0, 61), workers=1)
    row = -res.grids["re_a"][0]
    peaks, _ = find_peaks(row)
    x = np.linspace(-150.0, 150.0, 61)
    assert len(peaks) == 1 and x[peaks[0]] == pytest.approx(30.0)
    drive = runner.resolve_drive(cfg)
    lorentz = math.sqrt(drive.kappa_in) * drive.alpha * cav.kappa_out / (cav.kappa_out**2 + (x - 30.0) ** 2)
    assert np.allclose(row, lorentz, rtol=1e-8)
    # coupling pushes the cavity-like peak away from the bare resonance
    coupled = find_peaks(-res.grids["re_a"][2])[0]
    assert all(abs(x[k] - 30.0) > 10.0 for k in coupled)


def test_anticrossing_has_minimum_gap_at_zero_cavity_detuning(cav):
    em = EmitterSpec(omega_qe=cav.omega_cav, kappa_vib=5.0)
    cfg = make_config((em,), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav))
    ax_c = SweepAxis("delta_cav", -60.0, 60.0, 7)
    ax_p = SweepAxis("delta_p", -150.0, 150.0, 121)
    res = run_map(cfg, ax_c, ax_p, workers=1)
    gaps = []
    for row in -res.grid:
        peaks, _ = find_peaks(row)
        assert len(peaks) == 2
        gaps.append(ax_p.values[peaks[1]] - ax_p.values[peaks[0]])
    assert int(np.argmin(gaps)) == 3


def test_map_symmetry_about_anticrossing_centre(cav):
    # emitter coherence decay equal to the cavity field decay
    kvib = cav.kappa_out / coherence_decay_rate(1.0)
    em = EmitterSpec(omega_qe=cav.omega_cav, kappa_vib=kvib)
    cfg = make_config((em,), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav))
    ax_c = SweepAxis("delta_cav", -60.0, 60.0, 5)
    ax_p = SweepAxis("delta_p", -100.0, 100.0, 41)
    res = run_map(cfg, ax_c, ax_p, workers=1)
    pop, re_a = res.grids["emitter_population_1"], res.grids["re_a"]
    x = ax_p.values
    checked = 0
    for i, dc in enumerate(ax_c.values):
        for j, dp in enumerate(x):
            k = np.nonzero(np.isclose(x, dc - dp))[0]
            if len(k):
                assert pop[i, k[0]] == pytest.approx(pop[i, j], rel=1e-5)
                checked += 1
    assert checked > 100
    centre = 2
    assert np.allclose(re_a[centre], re_a[centre][::-1], rtol=1e-5)


def test_budget_is_enforced(driven_single):
    with pytest.raises(ValueError, match="budget"):
        run_map(driven_single, SweepAxis("delta_cav", -1, 1, 10), SweepAxis("delta_p", -1, 1, 10), budget=99)


def test_failed_cells_are_marked_and_the_run_continues(tmp_path, cav):
    prof = ModeProfile(kind="tabulated", r=(0.0, 5.0), u=(1.0, 0.5))
    cfg = make_config((EmitterSpec(omega_qe=cav.omega_cav),), initial="ground",
                      drive=DriveBlock(omega_p=cav.omega_cav), profile=prof)
    res = run_map(cfg, SweepAxis("position_x", 0.0, 10.0, 3), SweepAxis("delta_p", -10.0, 10.0, 2), workers=1)
    assert res.n_failed == 2
    assert all(s.startswith("failed:") and "outside" in s for s in res.status[2])
    assert np.all(np.isnan(res.grid[2])) and np.all(np.isfinite(res.grid[:2]))


def test_apply_axis(driven_single):
    ref = driven_single.emitters[0].omega_qe
    assert apply_axis(driven_single, "delta_p", 5.0, ref).drive.omega_p == ref + 5.0
    assert apply_axis(driven_single, "delta_cav", -5.0, ref).cavity.omega_cav == ref - 5.0
    assert apply_axis(driven_single, "g_scale", 0.5, ref).model.g_scale == 0.5
    assert apply_axis(driven_single, "position_x", 2.0, ref).emitters[0].position == (2.0, 0.0)
    undriven = replace(driven_single, drive=None, initial=replace(driven_single.initial, state="photon"))
    with pytest.raises(ValueError):
        apply_axis(undriven, "delta_p", 1.0, ref)
    assert len(apply_axis(driven_single, "ring_radius", 1.0, ref).emitters) == 1
    paired = replace(driven_single, sweep=SweepBlock(placement="asymmetric_pair", n_emitters=2))
    with pytest.raises(ValueError):
        apply_axis(paired, "ring_radius", 1.0, ref)


def test_symmetric_pair_position_sweep(cav):
    ems = (EmitterSpec(omega_qe=cav.omega_cav, kappa_vib=0.0),)
    cfg = make_config(ems, initial="photon", t_max=150.0, sector_cap=1)
    res = run_position_sweep(cfg, "symmetric_pair", SweepAxis("position_x", 0.0, 4.0, 3), n_emitters=2, workers=1)
    u = ModeProfile()
    assert np.allclose(res.grids["effective_coupling"], [math.sqrt(2) * u(x) for x in (0.0, 2.0, 4.0)])
    assert np.all(np.diff(res.grids["rabi_frequency"]) < 0)
    assert "final_P_A" in res.grids and res.n_failed == 0


def test_ring_collapses_to_colocated_rabi_frequency(cav):
    ems = (EmitterSpec(omega_qe=cav.omega_cav, kappa_vib=0.0),)
    cfg = make_config(ems, initial="photon", t_max=200.0, sector_cap=1,
                      sweep=SweepBlock(kind="position", axis1="ring_radius:0:0.3:2", placement="ring", n_emitters=8))
    res = run_position_sweep(cfg, "ring", SweepAxis("ring_radius", 0.0, 0.3, 2), workers=1)
    g = runner.resolve_couplings(cfg)[0]
    colocated = math.sqrt(32 * g**2 - cav.kappa_out**2)
    assert res.grids["rabi_frequency"] == pytest.approx([colocated, colocated], rel=0.01)
    with pytest.raises(ValueError):
        run_position_sweep(cfg, "ring", SweepAxis("delta_p", 0.0, 1.0, 2))
