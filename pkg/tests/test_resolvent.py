"""Resolvent formulas, bound scans, and the perturbed Neumann series."""

import numpy as np
import pytest

from parspec.errors import DegenerateFrequency, OnSpectrum
from parspec.freq_split import CutoffSpec, Grid, project_low, random_smooth_field
from parspec.profiles import LowBandCnsOperator, make_cns_profile
from parspec.resolvent_lab import (
    R1_MINUS,
    R1_PLUS,
    R2,
    ResolventSetSpec,
    check_sectorial_bound,
    cns_resolvent_apply,
    default_r_infty_cns,
    default_r_infty_dwe,
    dwe_resolvent_apply,
    perturbed_forward_apply,
    perturbed_resolvent,
    refine_log_grid,
    scan_cns_bounds,
    scan_dwe_bounds,
)
from parspec.symbols import DweParams, ModelParams, cns_acoustic_pair, cns_symbol, dwe_pair

P = ModelParams(n=3, alpha=1.0, beta=4.0, gamma=1.0)
D = DweParams(n=5, mu=5.0, mu_prime=1.0)


def random_admissible(rng):
    r = rng.uniform(0.02, 0.9 * P.crossover)
    xi = rng.normal(size=3)
    xi *= r / np.linalg.norm(xi)
    lam = complex(rng.normal(), rng.normal())
    return lam, xi


class TestCnsResolvent:
    def test_zero_forcing(self):
        out = cns_resolvent_apply(P, 1.0 + 1.0j, [0.1, 0, 0], np.zeros(4))
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_density_forcing_velocity_formula(self):
        # forcing (f1, 0): velocity equals -i gamma xi f1 / ((lam-l+)(lam-l-))
        xi = np.array([0.12, -0.05, 0.02])
        r = np.linalg.norm(xi)
        lam = 0.3 + 0.7j
        f1 = 1.7 - 0.4j
        out = cns_resolvent_apply(P, lam, xi, [f1, 0, 0, 0])
        lam_p, lam_m = cns_acoustic_pair(P, r)
        expected_v = -1j * P.gamma * xi * f1 / ((lam - lam_p) * (lam - lam_m))
        np.testing.assert_allclose(out[1:], expected_v, rtol=1e-12)

    def test_against_dense_solve(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            lam, xi = random_admissible(rng)
            f = rng.normal(size=4) + 1j * rng.normal(size=4)
            try:
                u = cns_resolvent_apply(P, lam, xi, f)
            except OnSpectrum:
                continue
            dense = np.linalg.solve(lam * np.eye(4) + cns_symbol(P, xi), f)
            assert np.abs(u - dense).max() <= 1e-10 * np.abs(dense).max()

    def test_residual(self):
        rng = np.random.default_rng(11)
        lam, xi = random_admissible(rng)
        f = rng.normal(size=4) + 1j * rng.normal(size=4)
        u = cns_resolvent_apply(P, lam, xi, f)
        res = (lam * np.eye(4) + cns_symbol(P, xi)) @ u - f
        assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(f)

    def test_errors(self):
        with pytest.raises(DegenerateFrequency):
            cns_resolvent_apply(P, 1.0, [0.0, 0.0, 0.0], np.zeros(4))
        lam_p, _ = cns_acoustic_pair(P, 0.1)
        with pytest.raises(OnSpectrum):
            cns_resolvent_apply(P, complex(lam_p), [0.1, 0, 0], np.ones(4))

    def test_resolvent_identity(self):
        xi = [0.15, 0.02, -0.07]
        lam, mu = 0.4 + 0.9j, -0.02 + 0.31j
        f = np.array([1.0, -0.5, 0.25, 0.7], dtype=complex)
        lhs = cns_resolvent_apply(P, lam, xi, f) - cns_resolvent_apply(P, mu, xi, f)
        rhs = (mu - lam) * cns_resolvent_apply(P, lam, xi, cns_resolvent_apply(P, mu, xi, f))
        assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(rhs).max())


class TestDweResolvent:
    def test_first_component_forcing(self):
        out = dwe_resolvent_apply(D, 0.5 + 0.1j, [0.2, 0, 0, 0, 0], [2.0, 0.0])
        np.testing.assert_allclose(out, [0.0, -2.0], atol=1e-14)

    def test_zero_forcing(self):
        out = dwe_resolvent_apply(D, 0.5, [0.2, 0, 0, 0, 0], [0.0, 0.0])
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_against_dense_solve(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            r = rng.uniform(0.01, 0.9 * D.crossover)
            xi = np.zeros(5)
            xi[0] = r
            lam = complex(rng.normal(), rng.normal())
            f = rng.normal(size=2) + 1j * rng.normal(size=2)
            try:
                u = dwe_resolvent_apply(D, lam, xi, f)
            except OnSpectrum:
                continue
            lam_p, lam_m = dwe_pair(D, r)
            reduced = np.array([[lam, -1.0], [(lam - lam_p) * (lam - lam_m), 0.0]])
            dense = np.linalg.solve(reduced, f)
            assert np.abs(u - dense).max() <= 1e-10 * max(np.abs(dense).max(), 1e-30)


class TestScans:
    R_INF = default_r_infty_cns(P)
    XI = np.geomspace(1e-4, R_INF, 24)

    def test_single_point_ratio_finite(self):
        lam = -0.01 + 1.1j
        u = cns_resolvent_apply(P, lam, [0.1, 0, 0], [1.0, 0, 0, 0])
        ratio = abs(lam) * 0.1 * (abs(u[0]) + np.linalg.norm(u[1:]))
        assert np.isfinite(ratio)

    @pytest.mark.parametrize("family", [R1_PLUS, R1_MINUS, R2])
    def test_cns_constants_finite_per_family(self, family):
        report = scan_cns_bounds(P, ResolventSetSpec(family), self.XI, self.R_INF)
        assert report.conforming
        for bound_id in ("low", "high"):
            entry = report.bounds[bound_id]
            assert np.isfinite(entry["constant"])
            # both proof cases appear and are individually finite
            assert entry["per_case"]["a"] > 0 and entry["per_case"]["b"] > 0

    def test_c0_stability_over_admissible_union(self):
        # the bound covers R1+ u R1- u R2; the union constant is c0-stable
        reports = {
            fam: scan_cns_bounds(P, ResolventSetSpec(fam), self.XI, self.R_INF)
            for fam in (R1_PLUS, R1_MINUS, R2)
        }
        for bound_id in ("low", "high"):
            r2_const = reports[R2].constant(bound_id)
            union = []
            for c0_key in ("0.1", "1.0", "10.0"):
                curve = max(
                    reports[fam].bounds[bound_id]["per_c0"][c0_key]
                    for fam in (R1_PLUS, R1_MINUS)
                )
                union.append(max(curve, r2_const))
            assert max(union) / min(union) < 2.0

    def test_refinement_stability(self):
        spec = ResolventSetSpec(R1_PLUS)
        coarse = scan_cns_bounds(P, spec, self.XI, self.R_INF)
        fine = scan_cns_bounds(P, spec.refined(), refine_log_grid(self.XI), self.R_INF)
        for bound_id in ("low", "high"):
            a, b = coarse.constant(bound_id), fine.constant(bound_id)
            assert b >= a - 1e-12  # nested grids only add candidates
            assert abs(b - a) / a < 0.10

    def test_dwe_bounds(self):
        r_inf = default_r_infty_dwe(D)
        xi = np.geomspace(1e-4, r_inf, 24)
        report = scan_dwe_bounds(D, ResolventSetSpec(R1_MINUS), xi, r_inf)
        for bound_id, entry in report.bounds.items():
            assert np.isfinite(entry["constant"])
        assert report.bounds["v_f11"]["constant"] == pytest.approx(1.0)

    def test_nonconforming_flagged(self):
        weak = ModelParams(n=3, alpha=0.5, beta=0.0, gamma=1.0)
        with pytest.warns(UserWarning):
            report = scan_cns_bounds(
                weak, ResolventSetSpec(R1_PLUS), np.geomspace(1e-3, 0.2, 8), 0.2
            )
        assert not report.conforming

    def test_spectrum_clearance_recorded(self):
        report = scan_cns_bounds(P, ResolventSetSpec(R1_PLUS), self.XI, self.R_INF)
        assert report.min_spectrum_distance > 1e-8

    def test_csv_rows(self, tmp_path):
        report = scan_cns_bounds(P, ResolventSetSpec(R2), self.XI[:4], self.R_INF)
        out = tmp_path / "rows.csv"
        report.write_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("bound_id,family,c0,a,xi_mag,ratio")
        assert len(lines) == 1 + len(report.rows)


def test_sectorial_bound():
    rep = check_sectorial_bound(delta=np.pi / 4)
    # closed form on the extreme ray (x = |lambda|): sqrt(4 / (2 - sqrt 2))
    exact = np.sqrt(4.0 / (2.0 - np.sqrt(2.0)))
    assert rep["constant"] <= exact + 1e-6
    assert rep["constant"] == pytest.approx(exact, rel=1e-3)


class TestPerturbedResolvent:
    GRID = Grid(3, 20 * np.pi, 32)
    CUT = CutoffSpec()

    def _source(self, seed=5):
        f = random_smooth_field(self.GRID, np.random.default_rng(seed), components=4,
                                corr_length=2.0)
        return project_low(f, self.CUT)

    def test_zero_epsilon_single_term(self):
        profile = make_cns_profile(P, self.GRID, 0.0)
        src = self._source()
        out, info = perturbed_resolvent(P, profile, -0.04 + 0.5j, src, return_info=True)
        assert info["terms"] == 2  # free term plus one vanishing correction
        assert all(r == 0.0 for r in info["contraction_ratios"])
        # equals the free resolvent: forward application with eps=0 returns src
        res = perturbed_forward_apply(P, profile, -0.04 + 0.5j, out)
        assert (res - src).l2() <= 1e-10 * src.l2()

    def test_forward_residual(self):
        profile = make_cns_profile(P, self.GRID, 0.01)
        src = self._source(6)
        lam = -0.04 + 0.5j
        op = LowBandCnsOperator(P, profile, self.CUT, self.GRID)
        out = perturbed_resolvent(P, profile, lam, src, operator=op)
        res = perturbed_forward_apply(P, profile, lam, out, operator=op)
        assert (res - src).l2() <= 1e-9 * src.l2()

    def test_contraction_ratio_halves_with_epsilon(self):
        src = self._source(7)
        lam = -0.01 + 0.8j
        ratios = {}
        for eps in (0.01, 0.005):
            profile = make_cns_profile(P, self.GRID, eps)
            _, info = perturbed_resolvent(P, profile, lam, src, return_info=True)
            ratios[eps] = info["contraction_ratios"][0]
        assert ratios[0.005] == pytest.approx(0.5 * ratios[0.01], rel=0.25)

    def test_requires_low_support(self):
        profile = make_cns_profile(P, self.GRID, 0.01)
        f = random_smooth_field(self.GRID, np.random.default_rng(8), components=4)
        with pytest.raises(ValueError):
            perturbed_resolvent(P, profile, 1.0, f)
