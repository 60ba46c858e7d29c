"""Evolution engine: exact flows, perturbed stepping, energies."""

import numpy as np
import pytest

from parspec.contour import ContourSpec, semigroup_via_contour
from parspec.errors import CFLViolation, MuConditionWarning
from parspec.evolution import (
    CnsModeFlow,
    DweModeFlow,
    energy_functional,
    evolve_cns_linear,
    evolve_cns_perturbed,
    evolve_dwe,
    gaussian_bump_data,
    high_frequency_data,
    incompressible_mode_data,
)
from parspec.freq_split import CutoffSpec, Field, Grid, project_low, random_smooth_field
from parspec.profiles import LowBandCnsOperator, make_cns_profile, make_dwe_profile
from parspec.symbols import DweParams, ModelParams, cns_symbol, dwe_symbol, matexp

P = ModelParams(n=3, alpha=1.0, beta=4.0, gamma=1.0)
D = DweParams(n=3, mu=5.0, mu_prime=1.0)
GRID = Grid(3, 20 * np.pi, 32)
CUT = CutoffSpec()


class TestModeFlows:
    def test_cns_flow_matches_matexp(self):
        flow = CnsModeFlow(P, GRID)
        rng = np.random.default_rng(0)
        coeffs = rng.normal(size=(4,) + GRID.points_per_dim) + 0j
        t = 1.7
        out = flow.apply(coeffs, t)
        idx = GRID.index_axes()
        for k in [(1, 0, 0), (3, 2, 1), (9, 0, 4), (0, 0, 1), (15, 15, 15)]:
            xi = np.array([idx[j][k[j]] * GRID.freq_spacing[j] for j in range(3)])
            e = matexp(-t * cns_symbol(P, xi))
            np.testing.assert_allclose(out[(slice(None),) + k], e @ coeffs[(slice(None),) + k],
                                       atol=1e-10)

    def test_cns_flow_zero_mode_identity(self):
        flow = CnsModeFlow(P, GRID)
        coeffs = np.ones((4,) + GRID.points_per_dim, dtype=complex)
        out = flow.apply(coeffs, 5.0)
        np.testing.assert_allclose(out[(slice(None),) + (0, 0, 0)], np.ones(4))

    def test_dwe_flow_matches_matexp(self):
        flow = DweModeFlow(D, GRID)
        rng = np.random.default_rng(1)
        u = rng.normal(size=GRID.points_per_dim) + 0j
        v = rng.normal(size=GRID.points_per_dim) + 0j
        t = 2.2
        un, vn = flow.apply(u, v, t)
        idx = GRID.index_axes()
        for k in [(2, 0, 0), (5, 1, 0), (0, 0, 0), (12, 3, 7)]:
            xi = np.array([idx[j][k[j]] * GRID.freq_spacing[j] for j in range(3)])
            e = matexp(-t * dwe_symbol(DweParams(n=3, mu=D.mu, mu_prime=D.mu_prime), xi))
            got = np.array([un[k], vn[k]])
            np.testing.assert_allclose(got, e @ np.array([u[k], v[k]]), atol=1e-10)


class TestCnsLinear:
    def test_zero_data_zero_trajectory(self):
        zero = Field.from_physical(GRID, np.zeros((4,) + GRID.points_per_dim))
        traj = evolve_cns_linear(P, zero, [1.0, 2.0, 3.0], CUT, record_physical=False)
        assert np.all(traj.norms["l2"] == 0.0)

    def test_incompressible_mode_exact_decay(self):
        u0 = incompressible_mode_data(GRID, (2, 0, 0))
        xi2 = (2 * GRID.freq_spacing[0]) ** 2
        times = [0.5, 1.0, 2.0, 4.0]
        traj = evolve_cns_linear(P, u0, times, CUT, record_physical=False)
        base = traj.norms["l2"][0] * np.exp(-P.alpha * xi2 * (traj.times - traj.times[0]))
        np.testing.assert_allclose(traj.norms["l2"], base, rtol=1e-12)

    def test_low_data_stays_low(self):
        # per-mode evolution preserves the spectral support cube exactly
        f = project_low(random_smooth_field(GRID, np.random.default_rng(2), components=4), CUT)
        flow = CnsModeFlow(P, GRID)
        evolved = Field.from_spectral(GRID, flow.apply(f.spectral, 3.0), support_tag="low")
        assert evolved.check_support(CUT)
        outside = CUT.chi1(GRID) == 0.0
        assert np.abs(evolved.spectral[:, outside]).max() == 0.0

    def test_weighted_sup_diagnostic(self):
        u0 = gaussian_bump_data(GRID, 4, width=1.4)
        traj = evolve_cns_linear(P, u0, np.linspace(1, 20, 9), CUT, record_physical=False)
        z = traj.weighted_sup("l2", 0.75)
        assert z >= traj.norms["l2"][0] * 2**0.75 * 0.99


class TestCnsPerturbed:
    def test_epsilon_zero_matches_linear(self):
        u0 = gaussian_bump_data(GRID, 4, width=1.4)
        times = [0.0, 1.0, 2.0, 4.0]
        lin = evolve_cns_linear(P, u0, times, CUT, record_physical=False)
        low = evolve_cns_perturbed(P, None, project_low(u0, CUT), times, CUT, dt=0.05)
        np.testing.assert_allclose(low.norms["l2"], lin.norms["l2_low"], rtol=1e-10)

    def test_dt_halving_richardson(self):
        profile = make_cns_profile(P, GRID, 0.01)
        u0 = project_low(gaussian_bump_data(GRID, 4, width=1.4), CUT)
        op = LowBandCnsOperator(P, profile, CUT, GRID)
        times = [5.0]
        a = evolve_cns_perturbed(P, profile, u0, times, CUT, dt=0.1, operator=op)
        b = evolve_cns_perturbed(P, profile, u0, times, CUT, dt=0.05, operator=op)
        rel = abs(a.norms["l2"][-1] - b.norms["l2"][-1]) / b.norms["l2"][-1]
        assert rel < 1e-3

    def test_cfl_gate(self):
        profile = make_cns_profile(P, GRID, 0.01)
        u0 = project_low(gaussian_bump_data(GRID, 4), CUT)
        with pytest.raises(CFLViolation):
            evolve_cns_perturbed(P, profile, u0, [1.0], CUT, dt=50.0)

    def test_neumann_consistency_with_contour(self):
        # two independent computational paths for the perturbed low system
        eps, t = 0.01, 1.0
        profile = make_cns_profile(P, GRID, eps)
        op = LowBandCnsOperator(P, profile, CUT, GRID)
        u0 = project_low(
            random_smooth_field(GRID, np.random.default_rng(3), components=4, corr_length=2.0),
            CUT,
        )
        traj = evolve_cns_perturbed(P, profile, u0, [t], CUT, dt=0.005, operator=op)
        spec = ContourSpec(t=t, nodes_per_branch=300, arc_nodes=65)
        via_contour = semigroup_via_contour(
            "cns", P, u0, t, spec, perturbation=profile, check_convergence=False,
            richardson=1, cutoff=CUT, operator=op,
        )
        coeffs = via_contour.spectral.copy()
        coeffs[(slice(None), 0, 0, 0)] = 0.0  # trajectory norms exclude the zero mode
        l2_contour = np.sqrt(np.sum(np.abs(coeffs) ** 2) / GRID.volume)
        assert abs(l2_contour - traj.norms["l2"][-1]) / traj.norms["l2"][-1] < 1e-3


class TestDwe:
    def test_zero_data(self):
        zero = Field.from_physical(GRID, np.zeros((1,) + GRID.points_per_dim))
        traj = evolve_dwe(D, None, zero, zero, [1.0, 2.0], dt=0.1, cutoff=CUT)
        assert np.all(traj.norms["l2"] == 0.0)

    def test_single_mode_closed_form(self):
        from parspec.freq_split import single_mode
        from parspec.symbols import dwe_pair

        u0 = single_mode(GRID, (3, 0, 0))
        v0 = Field.from_physical(GRID, np.zeros((1,) + GRID.points_per_dim))
        r = 3 * GRID.freq_spacing[0]
        times = [0.5, 1.0, 2.0, 4.0, 8.0]
        traj = evolve_dwe(D, None, u0, v0, times, dt=0.05, cutoff=CUT)
        lam_p, lam_m = dwe_pair(D, r)
        amp0 = u0.l2()
        for i, t in enumerate(traj.times):
            # u(0)=1, u'(0)=0 scalar solution of u'' + mu r^2 u' + mu' r^2 u = 0
            c_p = -lam_m / (lam_p - lam_m)
            c_m = lam_p / (lam_p - lam_m)
            scalar = c_p * np.exp(lam_p * t) + c_m * np.exp(lam_m * t)
            assert traj.norms["l2"][i] == pytest.approx(abs(scalar) * amp0, abs=1e-8 * amp0)

    def test_second_order_consistency(self):
        # central-difference integrator on one mode agrees to O(dt^2)
        from parspec.symbols import dwe_pair

        r = 3 * GRID.freq_spacing[0]
        mu, mup = D.mu, D.mu_prime

        def central(dt, t_end):
            steps = int(round(t_end / dt))
            u_prev = 1.0
            acc0 = -mup * r**2 * 1.0
            u_cur = 1.0 + 0.5 * dt**2 * acc0
            for _ in range(steps - 1):
                lhs = 1.0 + 0.5 * mu * r**2 * dt
                rhs = (
                    2.0 * u_cur
                    - u_prev * (1.0 - 0.5 * mu * r**2 * dt)
                    - dt**2 * mup * r**2 * u_cur
                )
                u_prev, u_cur = u_cur, rhs / lhs
            return u_cur

        lam_p, lam_m = dwe_pair(D, r)
        exact = (-lam_m * np.exp(lam_p * 2.0) + lam_p * np.exp(lam_m * 2.0)) / (lam_p - lam_m)
        e1 = abs(central(0.02, 2.0) - exact.real)
        e2 = abs(central(0.01, 2.0) - exact.real)
        assert e1 / e2 == pytest.approx(4.0, rel=0.25)

    def test_mu_condition_warning(self):
        weak = DweParams(n=3, mu=1.0, mu_prime=1.0)
        zero = Field.from_physical(GRID, np.zeros((1,) + GRID.points_per_dim))
        with pytest.warns(MuConditionWarning):
            evolve_dwe(weak, None, zero, zero, [1.0], dt=0.5, cutoff=CUT)

    def test_perturbed_runs_and_stays_close(self):
        profile = make_dwe_profile(GRID, 0.01)
        u0 = gaussian_bump_data(GRID, 1, width=1.4)
        v0 = Field.from_physical(GRID, np.zeros((1,) + GRID.points_per_dim))
        times = np.linspace(1.0, 10.0, 6)
        base = evolve_dwe(D, None, u0, v0, times, dt=0.05, cutoff=CUT)
        pert = evolve_dwe(D, profile, u0, v0, times, dt=0.05, cutoff=CUT)
        rel = np.abs(pert.norms["l2"] - base.norms["l2"]) / base.norms["l2"]
        assert rel.max() < 0.05


class TestEnergy:
    def test_cns_high_energy_monotone(self):
        u0 = high_frequency_data(GRID, CUT, components=4, seed=5)
        traj = evolve_cns_linear(P, u0, np.linspace(0.1, 4.0, 14), CUT, record_physical=False)
        rep = energy_functional(traj, "cns_high")
        assert rep["monotone"], rep["violations"]
        lo, hi = rep["equivalence_ratio_range"]
        assert 0 < lo <= hi < np.inf
        assert hi / lo < 10.0

    def test_dwe_high_energy_monotone(self):
        u0 = high_frequency_data(GRID, CUT, components=1, seed=6)
        v0 = high_frequency_data(GRID, CUT, components=1, seed=7)
        traj = evolve_dwe(D, None, u0, v0, np.linspace(0.2, 6.0, 12), dt=0.02, cutoff=CUT)
        rep = energy_functional(traj, "dwe_high")
        assert rep["monotone"], rep["violations"]

    def test_zero_field_zero_energy(self):
        zero = Field.from_physical(GRID, np.zeros((4,) + GRID.points_per_dim))
        traj = evolve_cns_linear(P, zero, [1.0, 2.0], CUT, record_physical=False)
        assert np.all(traj.norms["energy_high"] == 0.0)


class TestProfiles:
    def test_cns_profile_smallness_contract(self):
        eps = 0.02
        prof = make_cns_profile(P, GRID, eps)
        for key in ("weighted_phi", "weighted_grad_phi", "sobolev_grad",
                    "lorentz_n", "lorentz_grad_n2"):
            assert prof.achieved[key] <= 2 * eps + 1e-12

    def test_dwe_profile_smallness_contract(self):
        eps = 0.03
        prof = make_dwe_profile(GRID, eps)
        assert prof.achieved["combined"] == pytest.approx(eps)

    def test_solenoidal_velocity(self):
        prof = make_cns_profile(P, GRID, 0.05)
        w = prof.fields["w_omega"]
        ax = GRID._bcast(GRID.xi_axes_deriv())
        div = sum(1j * ax[j] * w.spectral[j] for j in range(3))
        assert np.abs(div).max() <= 1e-10 * max(np.abs(w.spectral).max(), 1e-300)
