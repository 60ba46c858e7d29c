"""Grid transforms, cutoffs, projections, and the multiplier checks."""

import numpy as np
import pytest

from parspec.errors import NyquistViolation, ZeroModeSingularity
from parspec.freq_split import (
    CutoffSpec,
    Field,
    Grid,
    bernstein_check,
    fractional_laplacian,
    gradient,
    inverse_xi_square_sum,
    load_field,
    poincare_check,
    project_high,
    project_low,
    random_smooth_field,
    save_field,
    single_mode,
)

GRID = Grid(3, 40 * np.pi, 64)
CUT = CutoffSpec()


def smooth(seed=0, components=1, grid=GRID):
    return random_smooth_field(grid, np.random.default_rng(seed), components=components)


class TestTransforms:
    def test_plancherel_roundtrip(self):
        f = smooth(1, components=2)
        back = Field.from_spectral(GRID, f.spectral)
        rel = np.abs(back.physical - f.physical).max() / np.abs(f.physical).max()
        assert rel < 1e-12
        phys_l2 = np.sqrt(np.sum(f.physical**2) * GRID.cell_volume)
        spec_l2 = np.sqrt(np.sum(np.abs(f.spectral) ** 2) / GRID.volume)
        assert phys_l2 == pytest.approx(spec_l2, rel=1e-10)

    def test_forward_is_integral_convention(self):
        # the zero coefficient is the plain integral of the field
        f = smooth(2)
        integral = float(np.sum(f.physical) * GRID.cell_volume)
        assert complex(f.zero_mode()[0]) == pytest.approx(integral, abs=1e-9 * abs(integral) + 1e-12)

    def test_single_mode_coefficient(self):
        sm = single_mode(GRID, (3, 0, 0))
        xi = 3 * GRID.freq_spacing[0]
        x = GRID.axes()[0]
        np.testing.assert_allclose(sm.physical[0, :, 0, 0], np.cos(xi * x), atol=1e-12)


class TestProjections:
    def test_partition_of_unity(self):
        f = smooth(3)
        total = project_low(f, CUT) + project_high(f, CUT)
        assert np.abs(total.physical - f.physical).max() <= 1e-12 * np.abs(f.physical).max()

    def test_low_field_unchanged(self):
        # supported inside the inner cube: chi1 is identically one there
        sm = single_mode(GRID, (1, 1, 0))  # ||xi||_inf = 0.05 < r1'/2
        out = project_low(sm, CUT)
        assert np.abs(out.physical - sm.physical).max() < 1e-12 * np.abs(sm.physical).max()
        assert out.support_tag == "low"
        # and P1 P1 f = P1 f on such fields
        again = project_low(out, CUT)
        assert np.abs(again.physical - out.physical).max() < 1e-12

    def test_pure_high_mode_killed(self):
        sm = single_mode(GRID, (12, 0, 0))  # ||xi||_inf = 0.6 > r_infty'/2
        out = project_low(sm, CUT)
        assert np.abs(out.spectral).max() <= 1e-14 * np.abs(sm.spectral).max()
        assert project_high(sm, CUT).check_support(CUT)

    def test_tags_and_support(self):
        f = smooth(4)
        lo, hi = project_low(f, CUT), project_high(f, CUT)
        assert lo.check_support(CUT) and hi.check_support(CUT)

    def test_gradient_commutes_with_projections(self):
        f = smooth(5)
        a = gradient(project_low(f, CUT), )
        b = project_low(gradient(f), CUT)
        assert np.abs(a.physical - b.physical).max() <= 1e-12 * max(1.0, np.abs(b.physical).max())

    def test_nyquist_gate(self):
        small = Grid(3, 40 * np.pi, 8)  # nyquist 0.2 < r_infty = 1
        with pytest.raises(NyquistViolation):
            project_low(smooth(0, grid=small), CutoffSpec())

    def test_cutoff_profile_shape(self):
        gauge = np.linspace(0, 0.4, 200)
        chi = CUT.chi1_profile(gauge)
        assert np.all((0.0 <= chi) & (chi <= 1.0))
        assert np.all(chi[gauge <= 0.125] == 1.0)
        assert np.all(chi[gauge >= 0.25] == 0.0)


class TestFractionalLaplacian:
    def test_zero_order_is_identity(self):
        f = smooth(6)
        out = fractional_laplacian(f, 0.0)
        np.testing.assert_array_equal(out.spectral, f.spectral)

    def test_single_mode_multiplier(self):
        sm = single_mode(GRID, (2, 0, 0))
        xi2 = (2 * GRID.freq_spacing[0]) ** 2
        out = fractional_laplacian(sm, 1.0)
        np.testing.assert_allclose(out.physical, xi2 * sm.physical, atol=1e-12)

    def test_composition(self):
        f = smooth(7)
        a = fractional_laplacian(fractional_laplacian(f, 0.35), 0.65)
        b = fractional_laplacian(f, 1.0)
        assert np.abs(a.spectral - b.spectral).max() <= 1e-10 * np.abs(b.spectral).max()

    def test_negative_order_needs_zero_mean(self):
        data = np.ones((1,) + GRID.points_per_dim)
        with pytest.raises(ZeroModeSingularity):
            fractional_laplacian(Field.from_physical(GRID, data), -0.5)


class TestBernstein:
    def test_constant_field_zero_numerator(self):
        const = Field.from_physical(GRID, np.ones((1,) + GRID.points_per_dim))
        out = fractional_laplacian(project_low(const, CUT), 0.5)
        assert out.l2() <= 1e-12 * const.l2()

    def test_exact_multiplier_bound_k1_p2(self):
        rep = bernstein_check(CUT, GRID, k=1.0, p=2.0, trials=6, seed=0)
        assert rep["empirical_sup"] <= rep["grid_multiplier_bound"] * (1 + 1e-9)
        assert rep["grid_multiplier_bound"] <= CUT.r_infty * np.sqrt(GRID.n) + 0.1

    def test_p4_k2_refinement_stability(self):
        rep = bernstein_check(CUT, Grid(3, 20 * np.pi, 32), k=2.0, p=4.0, trials=6, seed=1)
        assert np.isfinite(rep["empirical_sup"]) and rep["empirical_sup"] > 0
        assert rep["refinement_rel_change"] < 0.10


class TestPoincare:
    def test_bound_and_sharpness(self):
        rep = poincare_check(CUT, GRID, trials=10, seed=0)
        assert rep["max_ratio"] <= rep["bound"] * (1 + 1e-12)
        # witness mode sits exactly at |xi| = r1 on this grid
        assert rep["witness_mag"] == pytest.approx(CUT.r1, abs=1e-12)
        assert rep["witness_ratio"] == pytest.approx(1.0 / CUT.r1, rel=1e-12)

    def test_single_mode_ratios(self):
        # |xi| = 2 r1 gives ratio exactly 1/(2 r1)
        sm = single_mode(GRID, (20, 0, 0))
        mag = 20 * GRID.freq_spacing[0]
        assert mag == pytest.approx(2 * CUT.r1)
        ratio = sm.l2() / gradient(sm).l2()
        assert ratio == pytest.approx(1.0 / (2 * CUT.r1), rel=1e-12)


def test_inverse_xi_square_refinement():
    coarse = inverse_xi_square_sum(CUT, Grid(3, 40 * np.pi, 32))
    fine = inverse_xi_square_sum(CUT, Grid(3, 80 * np.pi, 64))
    finer = inverse_xi_square_sum(CUT, Grid(3, 160 * np.pi, 128))
    assert abs(fine - coarse) / coarse < 0.05
    assert abs(finer - fine) / fine < 0.05


def test_field_io_roundtrip(tmp_path):
    f = project_low(smooth(8, components=2), CUT)
    path = tmp_path / "field.bin"
    save_field(f, path)
    back = load_field(path)
    assert back.support_tag == "low"
    assert back.grid == f.grid
    np.testing.assert_array_equal(back.physical, f.physical)


def test_anisotropic_grid():
    g = Grid(3, (64.0, 4.0, 4.0), (256, 16, 16))
    f = random_smooth_field(g, np.random.default_rng(0), ref_points=16)
    back = Field.from_spectral(g, f.spectral)
    assert np.abs(back.physical - f.physical).max() < 1e-12
