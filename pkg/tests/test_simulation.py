"""
Unit tests for floquetdg -- time marching, full runs and the CFL scale search.
"""

from __future__ import annotations

import numpy as np
import pytest

from floquetdg._constants import NATURAL
from floquetdg.config import parse_config
from floquetdg.exceptions import BlowUpError, SearchFailureError
from floquetdg.mesh import generate_box_mesh
from floquetdg.operators import MaterialTable
from floquetdg.postproc import build_probe
from floquetdg.simulation import (
    SimulationResult,
    StabilityProbe,
    find_min_stable_scale,
    is_stable,
    march,
    run_simulation,
)
from floquetdg.solver import Discretization, compute_dt
from floquetdg.types import BoundaryTag, IncidenceConfig, Lattice2, Material

LATTICE = Lattice2.rectangular(1.0, 1.0)

TINY_RUN = """\
lattice.a1_m = [1.0, 0.0, 0.0]
lattice.a2_m = [0.0, 1.0, 0.0]
incidence.f_min_hz = 0.3
incidence.f_max_hz = 0.9
mesh.order = 1
mesh.nx = 1
mesh.ny = 1
mesh.nz = [1, 1, 1, 1, 1, 1]
time.v_cfl = 8.0
time.t_final_s = 6.0
time.energy_every = 5
"""


# -- Helpers ------------------------------------------------------------------

def free_column(order: int = 2) -> Discretization:
    """Vacuum column of height 3 with absorbing ends and no injection."""
    mesh = generate_box_mesh(LATTICE, (0.0, 1.0, 2.0, 3.0), 1, 1, (4, 4, 4), (1, 1, 1))
    inc = IncidenceConfig.for_band(0.3, 0.9)
    return Discretization.build(
        mesh, order, MaterialTable({1: Material()}, NATURAL), inc, lattice=LATTICE
    )


def gaussian_slab(disc: Discretization) -> np.ndarray:
    def field(pts):
        out = np.zeros(pts.shape[:-1] + (6,))
        out[..., 0] = np.exp(-(((pts[..., 2] - 1.5) / 0.3) ** 2))
        return out

    return disc.project(field)


def pec_cavity() -> Discretization:
    """Vacuum between PEC walls on cubes of side 1/2, order 2, normal incidence."""
    mesh = generate_box_mesh(
        LATTICE,
        (0.0, 1.0, 2.0, 3.0),
        2,
        2,
        (2, 2, 2),
        (1, 1, 1),
        top_tag=BoundaryTag.PEC,
        bottom_tag=BoundaryTag.PEC,
    )
    inc = IncidenceConfig.for_band(0.3, 0.9)
    return Discretization.build(
        mesh, 2, MaterialTable({1: Material()}, NATURAL), inc, lattice=LATTICE
    )


def tiny_probe() -> StabilityProbe:
    return StabilityProbe(0.3, 0.9, order=1, elements_per_wavelength=2.0, units=NATURAL)


# -- march() ------------------------------------------------------------------

class TestMarch:
    def test_quiet_start_stays_quiet(self):
        disc = free_column()
        record = march(disc, 0.01, 5, energy_every=10)
        assert record.steps == 5
        np.testing.assert_allclose(record.times, 0.01 * np.arange(6))
        assert np.array_equal(record.q, np.zeros_like(record.q))
        # Energy is sampled at the first and the last step only.
        assert np.isnan(record.energy[1:5]).all()
        times, energy = record.sampled_energy()
        np.testing.assert_allclose(times, [0.0, 0.05])
        np.testing.assert_array_equal(energy, 0.0)

    def test_probe_series_are_recorded(self):
        disc = free_column()
        probe = build_probe(disc.mesh, disc.ref, disc.geo, 1.5, LATTICE.cell_area)
        q0 = gaussian_slab(disc)
        record = march(disc, 0.01, 3, probes=[probe], q0=q0)
        assert len(record.a00) == 1
        assert record.a00[0].shape == (4, 3)
        assert record.a00[0][0, 0] == pytest.approx(1.0, rel=0.05)

    def test_energy_leaves_through_absorbing_ends(self):
        disc = free_column()
        q0 = gaussian_slab(disc)
        dt = compute_dt(disc.mesh.h_min, 2, 4.0, NATURAL)
        record = march(disc, dt, int(round(4.0 / dt)), energy_every=8, q0=q0)
        _, energy = record.sampled_energy()
        assert np.all(np.diff(energy) <= 1e-8 * energy[0])
        assert energy[-1] < 0.5 * energy[0]

    def test_step_rule_is_stable_at_normal_incidence(self):
        disc = pec_cavity()
        q0 = gaussian_slab(disc)
        q0[4] = np.cos(2.0 * np.pi * disc.geo.x)
        dt = compute_dt(disc.mesh.h_min, 2, 1.0, NATURAL)
        record = march(disc, dt, 80, energy_every=1, q0=q0)
        _, energy = record.sampled_energy()
        assert np.all(np.diff(energy) <= 1e-10 * energy[0])
        assert energy[-1] > 0.0

    def test_initial_state_is_not_modified(self):
        disc = free_column()
        q0 = gaussian_slab(disc)
        before = q0.copy()
        march(disc, 0.01, 2, q0=q0)
        np.testing.assert_array_equal(q0, before)

    def test_non_finite_state_raises(self):
        disc = free_column(order=1)
        q0 = disc.zeros()
        q0[0, 0, 0] = np.nan
        with pytest.raises(BlowUpError):
            march(disc, 0.01, 1, q0=q0)

    def test_negative_step_count_raises(self):
        with pytest.raises(ValueError, match="n_steps"):
            march(free_column(order=1), 0.01, -1)

    def test_zero_energy_interval_raises(self):
        with pytest.raises(ValueError, match="energy_every"):
            march(free_column(order=1), 0.01, 1, energy_every=0)


# -- SimulationResult ---------------------------------------------------------

class TestSimulationResult:
    def synthetic(self, transmit_factor: float = 1.0) -> SimulationResult:
        inc = IncidenceConfig.for_band(0.3, 0.9)
        dt = 0.05
        times = dt * np.arange(round(2.5 * inc.t0 / dt) + 1)
        pulse = inc.waveform(times - inc.t0)
        zeros = np.zeros_like(pulse)
        return SimulationResult(
            times=times,
            a00_reflect=np.column_stack([0.5 * pulse, zeros, zeros]),
            a00_transmit=np.column_stack([zeros, pulse, zeros]),
            energy=np.full(times.size, np.nan),
            dt=dt,
            steps=times.size - 1,
            incidence=inc,
            f_min=0.3,
            f_max=0.9,
            transmit_factor=transmit_factor,
        )

    def test_power_spectra_in_band(self):
        freqs, r, t = self.synthetic().power_spectra()
        assert freqs.min() >= 0.3
        assert freqs.max() <= 0.9
        np.testing.assert_allclose(r.filled(np.nan), 0.25, atol=1e-6)
        np.testing.assert_allclose(t.filled(np.nan), 1.0, atol=1e-6)

    def test_full_grid_is_available(self):
        result = self.synthetic()
        freqs, r, _ = result.power_spectra(band_only=False)
        assert freqs[0] == 0.0
        assert r.mask[0]
        assert len(freqs) == len(result.spectra()[0].freqs)

    def test_transmission_factor_scales_t(self):
        r_avg, t_avg = self.synthetic(transmit_factor=0.8).band_average()
        assert r_avg == pytest.approx(0.25, abs=1e-6)
        assert t_avg == pytest.approx(0.8, abs=1e-6)


# -- run_simulation() ---------------------------------------------------------

class TestRunSimulation:
    def test_tiny_empty_cell_run(self):
        cfg = parse_config(TINY_RUN, NATURAL)
        result = run_simulation(cfg)
        # Inscribed diameter of the flattest tets, a 1 x 1 x 0.25 box split six ways.
        assert result.dt == pytest.approx(0.18980160 / 8.0, rel=1e-7)
        assert result.steps == 253
        assert result.times[-1] == pytest.approx(253 * result.dt)
        assert result.a00_reflect.shape == (254, 3)
        assert result.a00_transmit.shape == (254, 3)
        assert result.transmit_factor == pytest.approx(1.0)
        energy = result.energy[np.isfinite(result.energy)]
        assert energy[0] == 0.0
        assert np.isfinite(energy).all()
        assert result.summary["K"] == 36
        assert result.summary["Np"] == 4
        assert result.summary["periodic"]["fragments"] == 0

    def test_slab_sets_transmission_factor(self):
        cfg = parse_config(
            TINY_RUN
            + "structure.layer_materials = [2, 1, 1, 1, 1, 1]\n"
            + "materials.2.eps_r = 4.0\n",
            NATURAL,
        )
        result = run_simulation(cfg)
        # Transmission plane at z=0.5 sits on top of the eps_r=4 layer.
        assert result.transmit_factor == pytest.approx(2.0)


# -- Stability search ---------------------------------------------------------

class TestStability:
    def test_probe_cell_geometry(self):
        setup = tiny_probe()
        disc = setup.discretization(0.0)
        assert setup.lattice().lengths[0] == pytest.approx(0.5 / 0.9)
        assert disc.num_elements == 6 * 3
        assert disc.incidence.z_ref == pytest.approx(2.0 * 0.5 / 0.9)

    def test_small_steps_are_stable(self):
        setup = tiny_probe()
        disc = setup.discretization(0.0)
        assert is_stable(disc, 16.0, setup.duration(disc.incidence))

    def test_huge_steps_are_unstable(self):
        setup = tiny_probe()
        disc = setup.discretization(0.0)
        assert not is_stable(disc, 0.05, setup.duration(disc.incidence))

    def test_stable_lower_end_is_returned(self):
        assert find_min_stable_scale(0.0, tiny_probe(), v_min=16.0, v_max=32.0) == 16.0

    def test_bisection_lands_on_a_stable_scale(self):
        setup = tiny_probe()
        v = find_min_stable_scale(0.0, setup, v_min=0.05, v_max=16.0, tol=4.0)
        assert 0.05 < v <= 16.0
        disc = setup.discretization(0.0)
        assert is_stable(disc, v, setup.duration(disc.incidence))

    def test_unstable_bracket_raises(self):
        with pytest.raises(SearchFailureError, match="unstable even at"):
            find_min_stable_scale(0.0, tiny_probe(), v_min=0.01, v_max=0.05)

    def test_invalid_bracket_raises(self):
        with pytest.raises(ValueError, match="bracket"):
            find_min_stable_scale(0.0, tiny_probe(), v_min=2.0, v_max=1.0)
