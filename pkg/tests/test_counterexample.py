"""Bump-train counterexample suite (small configurations)."""

import numpy as np
import pytest

from parspec.counterexample import (
    CounterexampleSpec,
    WeightedProfileSpec,
    build_fn,
    cross_term_report,
    default_train_grid,
    dominant_shell,
    fn_besov_growth,
    make_weighted_profile,
    weighted_profile_in_besov,
)
from parspec.errors import BoxTooSmall
from parspec.freq_split import Field, Grid
from parspec.function_norms import (
    LorentzExp,
    besov_norm_dyadic,
    lorentz_norm,
    weak_norm_via_distribution,
)

SPEC16 = CounterexampleSpec(16)
GRID16 = default_train_grid(SPEC16)


class TestBuild:
    def test_single_translate_is_one_bump(self):
        one = build_fn(CounterexampleSpec(1), GRID16)
        vals = one.physical[0]
        assert np.count_nonzero(vals) > 0
        # mean zero to grid precision (odd in x1 around the center)
        assert abs(np.sum(vals) * GRID16.cell_volume) < 1e-12

    def test_sup_norm_dominated_by_first_amplitude(self):
        one = build_fn(CounterexampleSpec(1), GRID16)
        many = build_fn(SPEC16, GRID16)
        assert np.abs(many.physical).max() == pytest.approx(np.abs(one.physical).max(), rel=1e-12)

    def test_distribution_function_counting_bound(self):
        spec = CounterexampleSpec(8)
        f = build_fn(spec, GRID16)
        one = build_fn(CounterexampleSpec(1), GRID16)
        psi_max = np.abs(one.physical).max()
        supp_measure = np.count_nonzero(one.physical) * GRID16.cell_volume
        amps = spec.amplitudes()
        mag = np.abs(f.physical[0])
        for lam in (0.2 * psi_max, 0.5 * psi_max, 0.9 * psi_max):
            d = np.count_nonzero(mag > lam) * GRID16.cell_volume
            count = int(np.sum(amps * psi_max > lam))
            assert d <= supp_measure * count + 1e-12

    def test_disjoint_support_l2_identity(self):
        spec = CounterexampleSpec(12)
        f = build_fn(spec, GRID16)
        one = build_fn(CounterexampleSpec(1), GRID16)
        total = np.sum(f.physical**2) * GRID16.cell_volume
        single = np.sum(one.physical**2) * GRID16.cell_volume
        want = float(np.sum(spec.amplitudes() ** 2)) * single
        assert total == pytest.approx(want, rel=1e-12)

    def test_box_too_small(self):
        with pytest.raises(BoxTooSmall):
            build_fn(CounterexampleSpec(100), GRID16)


class TestWeakNorm:
    def test_amplitude_homogeneity(self):
        f = build_fn(SPEC16, GRID16)
        doubled = Field.from_physical(GRID16, 2.0 * f.physical)
        a = lorentz_norm(f, LorentzExp(3, np.inf))
        b = lorentz_norm(doubled, LorentzExp(3, np.inf))
        assert b == pytest.approx(2.0 * a, rel=1e-12)

    def test_two_weak_routes_agree(self):
        f = build_fn(SPEC16, GRID16)
        a = lorentz_norm(f, LorentzExp(3, np.inf))
        b = weak_norm_via_distribution(f, 3)
        assert abs(a - b) <= 1e-9 * a

    def test_single_equals_family_start(self):
        one = CounterexampleSpec(1)
        assert lorentz_norm(build_fn(one, GRID16), LorentzExp(3, np.inf)) > 0


class TestBesovGrowth:
    def test_growth_and_monotonicity(self):
        counts, norms, fit = fn_besov_growth([2, 4, 8, 16], SPEC16, grid=GRID16)
        assert all(b > a for a, b in zip(norms, norms[1:]))
        assert 0.1 < fit.exponent < 0.3

    def test_monotonicity_with_cross_budget(self):
        _, norms, _ = fn_besov_growth([8, 16], SPEC16, grid=GRID16)
        rep = cross_term_report(SPEC16, GRID16)
        budget = np.sqrt(rep["cross_budget"])
        assert norms[1] >= norms[0] - budget

    def test_cross_terms_bounded_by_separation_law(self):
        rep = cross_term_report(SPEC16, GRID16)
        assert np.isfinite(rep["measured_constant"])
        assert rep["budget_fraction"] < 0.01
        assert rep["lower_bound_factor"] > 0.99

    def test_dominant_shell_near_bump_scale(self):
        j0 = dominant_shell(GRID16, SPEC16)
        # the bump derivative peaks around |xi| ~ 2, i.e. shell 1 or 2
        assert j0 in (0, 1, 2)

    def test_block_lower_bound_constant(self):
        # 2^(j0/2) |block(f_N)| >= c sqrt(sum a_k^2) with c independent of N
        rep = cross_term_report(SPEC16, GRID16)
        g_norm = np.sqrt(rep["block_norm_sq_single"])
        j0 = rep["j0"]
        for count in (4, 16):
            spec = CounterexampleSpec(count)
            f = build_fn(spec, GRID16)
            from parspec.function_norms import besov_block_norms

            block = besov_block_norms(f)[j0]
            main = np.sqrt(np.sum(spec.amplitudes() ** 2)) * g_norm
            assert block >= 0.95 * main


class TestWeightedProfile:
    GRID = Grid(3, 30.0, 64)

    def test_zero_profile(self):
        rep = weighted_profile_in_besov(WeightedProfileSpec(0.0), self.GRID)
        assert rep["halfnorm"] == 0.0

    def test_scaling_in_m1(self):
        full = weighted_profile_in_besov(WeightedProfileSpec(1.0), self.GRID)
        half = weighted_profile_in_besov(WeightedProfileSpec(0.5), self.GRID)
        assert half["halfnorm"] == pytest.approx(0.5 * full["halfnorm"], rel=1e-12)

    def test_weighted_bounds_hold(self):
        spec = WeightedProfileSpec(1.0)
        rep = weighted_profile_in_besov(spec, self.GRID)
        assert rep["m1"] <= 1.0 + 1e-12
        assert np.isfinite(rep["m2"]) and rep["m2"] > 0
        assert rep["halfnorm"] > 0
        assert rep["branch_small_shifts"] <= rep["halfnorm"]

    def test_finite_and_refinement_stable(self):
        vals = []
        for pts in (32, 64):
            rep = weighted_profile_in_besov(WeightedProfileSpec(1.0), Grid(3, 30.0, pts))
            vals.append(rep["halfnorm"])
        assert abs(vals[1] - vals[0]) / vals[0] < 0.10

    def test_besov_dyadic_agrees_roughly(self):
        v = make_weighted_profile(WeightedProfileSpec(1.0), self.GRID)
        fd = weighted_profile_in_besov(WeightedProfileSpec(1.0), self.GRID)["halfnorm"]
        dy = besov_norm_dyadic(v, 0.5)
        assert 0.1 < fd / dy < 10.0
