import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holotomo.fields import AxialBox, FieldVolume, volume_energy_profile
from holotomo.phantom import (
    PAPER_PITCH,
    Cell,
    Dip,
    PhantomSpec,
    Reference,
    default_scene,
    make_phantom,
    paper_grid,
    paper_reference,
    simulate_hologram,
    standard_grid,
    two_cell_scene,
)
from holotomo.propagation import forward_A

from conftest import crandn, small_grid
from oracles import brute_propagate


def test_paper_grid_parameters():
    g = paper_grid()
    assert (g.nx, g.ny) == (280, 280)
    assert g.dx == pytest.approx(3.45 / 40) and g.magnification == pytest.approx(40)
    assert (g.dz, g.wavelength, g.na) == (0.75, 0.65, 0.75)
    spec = default_scene()
    assert spec.box.nz == 5 and spec.box.z_center == 9.0


def test_standard_grid_keeps_field_of_view():
    for n in (64, 128):
        g = standard_grid(n)
        assert g.nx * g.dx == pytest.approx(280 * PAPER_PITCH)


class TestSpec:
    def test_bad_cells(self):
        with pytest.raises(ValueError):
            Cell((0, 0), 0.0)
        with pytest.raises(ValueError):
            Cell((0, 0), 1.0, peak_phase=np.nan)
        with pytest.raises(ValueError):
            Cell((0, 0), 1.0, slices=(3, 1))
        with pytest.raises(ValueError):
            Cell((0, 0), 1.0, dip=Dip((0, 0), 0.0, 1.0))

    def test_occupancy_range(self, grid16):
        with pytest.raises(ValueError):
            PhantomSpec(grid16, AxialBox(3, 5.0), (Cell((0, 0), 1.0, slices=(1, 3)),))

    def test_overlapping_cells_allowed(self, grid16):
        cells = (Cell((0, 0), 1.0, slices=(0, 2)), Cell((0.2, 0), 1.0, slices=(0, 2)))
        make_phantom(PhantomSpec(grid16, AxialBox(3, 5.0), cells))


class TestMakePhantom:
    def test_empty(self, grid16):
        u = make_phantom(PhantomSpec(grid16, AxialBox(5, 6.0), ()))
        assert not np.any(u.values)

    def test_single_slice_occupancy(self):
        g = standard_grid(64)
        u = make_phantom(PhantomSpec(g, AxialBox(5, 9.0), (Cell((0, 0), 2.0, slices=(2, 2)),)))
        e = volume_energy_profile(u)
        assert e[2] > 0 and np.count_nonzero(e) == 1

    def test_peak_phase(self):
        g = standard_grid(64)
        u = make_phantom(default_scene(g))
        j = 2
        amp = np.abs(u.values[j])
        phase = np.angle(u.values[j])[amp > 0.5]
        assert phase.max() == pytest.approx(1.5, abs=1e-12)

    def test_unit_amplitude_over_cell(self):
        g = standard_grid(64)
        spec = default_scene(g)
        u = make_phantom(spec)
        x, y = g.coords()
        inside = x**2 + y**2 <= spec.cells[0].radius ** 2
        np.testing.assert_allclose(np.abs(u.values[2][inside]), 1.0, atol=1e-3)
        far = x**2 + y**2 >= (1.5 * spec.support_scale * spec.cells[0].radius) ** 2
        assert np.abs(u.values[2][far]).max() < 1e-6

    def test_two_cell_dip(self):
        g = paper_grid(128, 360 * PAPER_PITCH / 128)
        spec = two_cell_scene(g)
        u = make_phantom(spec)
        normal, infected = spec.cells
        x, y = g.coords()
        phase = np.angle(u.values[2])
        inside = (x - infected.center[0]) ** 2 + (y - infected.center[1]) ** 2 <= (0.8 * infected.radius) ** 2
        iy, ix = np.unravel_index(np.argmin(np.where(inside, phase, np.inf)), phase.shape)
        dx, dy = infected.dip.center
        assert abs(x[iy, ix] - dx) <= g.dx and abs(y[iy, ix] - dy) <= g.dy
        assert normal.dip is None


class TestHologram:
    def test_no_object_is_flat(self):
        g = paper_grid(64)
        u = FieldVolume.zeros(g, AxialBox(5, 9.0))
        h = simulate_hologram(u, Reference(1.0, 0.5, amplitude=2.0))
        np.testing.assert_allclose(h.intensity, 4.0, rtol=1e-14)

    def test_matches_direct_formula(self, rng):
        g = small_grid(8, dx=0.3)
        u = FieldVolume(g, 4.0, 0.2 * crandn(rng, (3, 8, 8)))
        ref = Reference(1 / (8 * 0.3), 2 / (8 * 0.3), 1.0)
        det = sum(brute_propagate(u.values[j], g, z) for j, z in enumerate(u.z_positions))
        x, y = g.coords()
        r = np.exp(2j * np.pi * (ref.fx * x + ref.fy * y))
        np.testing.assert_allclose(simulate_hologram(u, ref).intensity, np.abs(r + det) ** 2, rtol=1e-12)

    def test_carrier_at_nyquist(self):
        g = paper_grid(64)
        u = FieldVolume.zeros(g, AxialBox(5, 9.0))
        with pytest.raises(ValueError):
            simulate_hologram(u, Reference(1 / (2 * g.dx), 0.0))

    def test_snr(self):
        g = paper_grid(160)
        u = make_phantom(default_scene(g))
        ref = paper_reference(g)
        clean = simulate_hologram(u, ref).intensity
        for seed in range(3):
            noisy = simulate_hologram(u, ref, snr_db=30.0, seed=seed).intensity
            measured = 10 * np.log10(np.mean(clean**2) / np.mean((noisy - clean) ** 2))
            assert abs(measured - 30.0) <= 1.0

    def test_quantization(self):
        g = paper_grid(64)
        u = make_phantom(default_scene(g))
        h = simulate_hologram(u, paper_reference(g), bits=12).intensity
        assert h.max() == 4095 and h.min() >= 0
        np.testing.assert_array_equal(h, np.round(h))

    def test_seeded(self):
        g = paper_grid(64)
        u = make_phantom(default_scene(g))
        a = simulate_hologram(u, paper_reference(g), snr_db=20, seed=3).intensity
        b = simulate_hologram(u, paper_reference(g), snr_db=20, seed=3).intensity
        assert a.tobytes() == b.tobytes()

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**32 - 1))
    def test_property_cross_term_linear(self, a, b, seed):
        g = small_grid(16, dx=0.25)
        rng = np.random.default_rng(seed)
        u1 = FieldVolume(g, 4.0, crandn(rng, (3, 16, 16)))
        u2 = u1.with_values(crandn(rng, (3, 16, 16)))
        ref = Reference(2 / (16 * 0.25), 1 / (16 * 0.25), 1.0)

        def cross(u):
            return simulate_hologram(u, ref).intensity - 1.0 - np.abs(forward_A(u).values) ** 2

        combo = u1.with_values(a * u1.values + b * u2.values)
        expected = a * cross(u1) + b * cross(u2)
        scale = np.abs(cross(u1)).max() + np.abs(cross(u2)).max()
        assert np.abs(cross(combo) - expected).max() <= 1e-11 * scale * (1 + abs(a) + abs(b)) ** 2
