"""Command-line front end orchestrating the verification campaigns.

Every run is fully determined by its config file and seed; reports
embed the resolved config plus a content hash, so reruns are byte
identical and verifiable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import counterexample as cx
from . import evolution as evo
from .config import RunConfig, load_config
from .contour import ContourSpec, contour_margin, contour_to_rows, decay_fit, exp_rate_fit
from .errors import ConfigError, ParspecError
from .freq_split import (
    CutoffSpec,
    Field,
    Grid,
    bernstein_check,
    inverse_xi_square_sum,
    poincare_check,
    random_smooth_field,
    set_fft_workers,
)
from .function_norms import (
    LorentzExp,
    holder_lorentz_check,
    homogeneous_sobolev_norm,
    lorentz_norm,
    sobolev_embedding_check,
    trilinear_fgh_check,
    weak_norm_via_distribution,
)
from .profiles import make_cns_profile, make_dwe_profile
from .reports import read_trajectory_csv, write_csv_report, write_json_report
from .resolvent_lab import (
    R1_MINUS,
    R1_PLUS,
    R2,
    ResolventSetSpec,
    default_r_infty_cns,
    default_r_infty_dwe,
    scan_cns_bounds,
    scan_dwe_bounds,
)
from .symbols import (
    DweParams,
    FreqVector,
    ModelParams,
    cns_eigensystem,
    dwe_eigensystem,
    propagator,
)

COMMANDS = (
    "spectrum",
    "resolvent-scan",
    "evolve",
    "decay-fit",
    "norms",
    "counterexample",
    "contour-check",
)


def _model_params(config: RunConfig):
    m = config.table("model")
    system = m.get("system", "cns")
    n = int(m.get("n", 3))
    if system == "cns":
        return "cns", ModelParams(
            n=n,
            alpha=float(m.get("alpha", 1.0)),
            beta=float(m.get("beta", 4.0)),
            gamma=float(m.get("gamma", 1.0)),
        )
    if system == "dwe":
        return "dwe", DweParams(
            n=n, mu=float(m.get("mu", 5.0)), mu_prime=float(m.get("mu_prime", 1.0))
        )
    raise ConfigError(f"unknown model.system {system!r}")


def _grid(config: RunConfig) -> Grid:
    g = config.table("grid")
    return Grid(
        int(g.get("n", 3)),
        g.get("box_length", 40.0 * math.pi),
        g.get("points_per_dim", 64),
    )


def _cutoff(config: RunConfig) -> CutoffSpec:
    c = config.table("cutoff")
    return CutoffSpec(
        r1_prime=float(c.get("r1_prime", 0.25)),
        r_infty_prime=float(c.get("r_infty_prime", 0.5)),
        mollifier_width=c.get("mollifier_width"),
    )


def _contour_spec(config: RunConfig, t: float) -> ContourSpec:
    c = config.table("contour")
    return ContourSpec(
        t=t,
        r_max=c.get("r_max"),
        nodes_per_branch=int(c.get("nodes_per_branch", 1600)),
        arc_nodes=int(c.get("arc_nodes", 257)),
        quadrature=c.get("quadrature", "trapezoid"),
    )


def cmd_spectrum(config: RunConfig, out: Path, rng, quiet: bool):
    system, params = _model_params(config)
    s = config.table("spectrum")
    lo = float(s.get("xi_min", 1e-3))
    hi = float(s.get("xi_max", 0.95 * params.crossover))
    count = int(s.get("count", 100))
    scale = s.get("scale", "log")
    xis = np.geomspace(lo, hi, count) if scale == "log" else np.linspace(lo, hi, count)

    half_trace = 0.5 * (
        params.alpha + params.beta if system == "cns" else params.mu
    )
    rows = []
    for r in xis:
        xi = FreqVector([r] + [0.0] * (params.n - 1))
        if system == "cns":
            spec, _ = cns_eigensystem(params, xi)
        else:
            spec = dwe_eigensystem(params, xi)
        residual = (
            spec.lambda_plus.real + half_trace * r**2
            if spec.regime == "oscillatory"
            else float("nan")
        )
        row = [
            float(r),
            spec.lambda_plus.real,
            spec.lambda_plus.imag,
            spec.lambda_minus.real,
            spec.lambda_minus.imag,
            residual,
            spec.regime,
        ]
        if system == "cns":
            row[1:1] = [spec.lambda1.real, spec.lambda1.imag]
        rows.append(row)

    header = ["xi_mag"]
    if system == "cns":
        header += ["lambda1_re", "lambda1_im"]
    header += [
        "lambda_plus_re",
        "lambda_plus_im",
        "lambda_minus_re",
        "lambda_minus_im",
        "parabola_residual",
        "regime",
    ]
    files = []
    files.append(_emit_csv(out / "spectrum.csv", header, rows, config, quiet))
    mid = FreqVector([xis[count // 2]] + [0.0] * (params.n - 1))
    if system == "cns":
        spec_mid, proj_mid = cns_eigensystem(params, mid)
        sample = {"spectrum": spec_mid.to_jsonable(), "projections": proj_mid.to_jsonable()}
    else:
        sample = {"spectrum": dwe_eigensystem(params, mid).to_jsonable()}
    payload = {
        "system": system,
        "xi_count": count,
        "crossover": params.crossover,
        "sample_at_mid_xi": sample,
    }
    files.append(_emit_json(out / "spectrum.json", payload, config, quiet))
    return files


def cmd_resolvent_scan(config: RunConfig, out: Path, rng, quiet: bool):
    system, params = _model_params(config)
    sc = config.table("scan")
    r_infty = sc.get("r_infty")
    if r_infty is None:
        r_infty = default_r_infty_cns(params) if system == "cns" else default_r_infty_dwe(params)
    xi = np.geomspace(float(sc.get("xi_min", 1e-4)), r_infty, int(sc.get("xi_count", 32)))
    families = sc.get("families", [R1_PLUS, R1_MINUS, R2])
    c0 = float(sc.get("c0", 1.0))
    a_grid = np.geomspace(1e-4, 10.0, int(sc.get("a_count", 48)))
    do_refine = bool(sc.get("refine", False))

    scan = scan_cns_bounds if system == "cns" else scan_dwe_bounds
    files = []
    summary = {"system": system, "r_infty": float(r_infty), "families": {}}
    for family in families:
        spec = ResolventSetSpec(family, c0=c0, a_grid=None if family == R2 else a_grid)
        report = scan(params, spec, xi, r_infty)
        entry = report.to_jsonable()
        if do_refine:
            from .resolvent_lab import refine_log_grid

            fine = scan(params, spec.refined(), refine_log_grid(xi), r_infty)
            entry["refined"] = fine.to_jsonable()
            entry["refinement_rel_change"] = {
                bid: abs(fine.constant(bid) - report.constant(bid))
                / max(report.constant(bid), 1e-300)
                for bid in report.bounds
            }
        summary["families"][family] = entry
        name = out / f"scan_{family}.csv"
        header = ["bound_id", "family", "c0", "a", "xi_mag", "ratio", "lambda_re", "lambda_im", "case"]
        files.append(_emit_csv(name, header, report.rows, config, quiet))
    files.append(_emit_json(out / "scan_report.json", summary, config, quiet))
    return files


def _initial_data(config: RunConfig, grid: Grid, components: int, rng):
    e = config.table("evolve")
    kind = e.get("data", "l1_bump")
    if kind == "l1_bump":
        return evo.gaussian_bump_data(grid, components, width=float(e.get("width", 1.4)))
    if kind == "lp_bump":
        return evo.gaussian_bump_data(
            grid, components, width=float(e.get("width", 1.4)),
            normalize_p=float(e.get("normalize_p", 1.5)),
        )
    if kind == "high":
        return evo.high_frequency_data(
            grid, _cutoff(config), components, seed=int(e.get("data_seed", 7))
        )
    if kind == "incompressible":
        return evo.incompressible_mode_data(grid, e.get("mode_index", [2, 0, 0]))
    raise ConfigError(f"unknown evolve.data {kind!r}")


def cmd_evolve(config: RunConfig, out: Path, rng, quiet: bool):
    system, params = _model_params(config)
    grid = _grid(config)
    cutoff = _cutoff(config)
    e = config.table("evolve")
    mode = e.get("mode", "linear")
    samples = int(e.get("samples", 25))
    t_lo, t_hi = float(e.get("t_min", 1.0)), float(e.get("t_max", 100.0))
    t_grid = np.unique(np.geomspace(t_lo, t_hi, samples))
    dt = float(e.get("dt", 0.01))

    if system == "cns":
        u0 = _initial_data(config, grid, params.n + 1, rng)
        if mode == "linear":
            traj = evo.evolve_cns_linear(
                params, u0, t_grid, cutoff,
                energy_s=int(e.get("energy_s", 3)),
                record_physical=bool(e.get("record_physical", True)),
            )
        elif mode == "perturbed":
            eps = float(e.get("epsilon", config.get("profile", "epsilon", 0.01)))
            profile = make_cns_profile(
                params, grid, eps, s=int(config.get("profile", "sobolev_order", 3))
            )
            from .freq_split import project_low

            traj = evo.evolve_cns_perturbed(
                params, profile, project_low(u0, cutoff), t_grid, cutoff, dt=dt,
                record_physical=bool(e.get("record_physical", False)),
            )
        else:
            raise ConfigError(f"unknown evolve.mode {mode!r}")
    else:
        u0 = _initial_data(config, grid, 1, rng)
        v0 = Field.from_physical(grid, np.zeros((1,) + grid.points_per_dim))
        profile = None
        if mode == "perturbed":
            eps = float(e.get("epsilon", config.get("profile", "epsilon", 0.01)))
            profile = make_dwe_profile(grid, eps, p0=float(config.get("profile", "p0", 2.5)))
        traj = evo.evolve_dwe(params, profile, u0, v0, t_grid, dt=dt, cutoff=cutoff)

    files = []
    rows = list(traj.csv_rows())
    files.append(_emit_csv(out / "trajectory.csv", rows[0], rows[1:], config, quiet))
    files.append(_emit_json(out / "trajectory.json", traj.to_jsonable(), config, quiet))
    return files


def cmd_decay_fit(config: RunConfig, out: Path, rng, quiet: bool):
    f = config.table("fit")
    source = f.get("input")
    if source is None:
        raise ConfigError("decay-fit needs [fit] input = <trajectory.csv>")
    times, norms = read_trajectory_csv(source)
    window = f.get("window")
    window = tuple(float(w) for w in window) if window else None
    keys = f.get("norms", ["l2", "h1dot"])
    kind = f.get("kind", "power")
    fits = {}
    for key in keys:
        if key not in norms:
            raise ConfigError(f"norm {key!r} not present in {source}")
        series = np.column_stack([times, norms[key]])
        fit = decay_fit(series, window) if kind == "power" else exp_rate_fit(series, window)
        fits[key] = fit.to_jsonable()
    payload = {"input": str(source), "kind": kind, "fits": fits}
    return [_emit_json(out / "fits.json", payload, config, quiet)]


def cmd_norms(config: RunConfig, out: Path, rng, quiet: bool):
    grid = _grid(config)
    cutoff = _cutoff(config)
    trials = int(config.get("norms", "trials", 8))
    f = random_smooth_field(grid, rng, components=1, corr_length=1.0)

    from .function_norms import besov_halfnorm_fd

    l2 = f.l2()
    rows = [
        ["lorentz_2_2", lorentz_norm(f, LorentzExp(2, 2))],
        ["l2", l2],
        ["weak_l3_rearr", lorentz_norm(f, LorentzExp(3, np.inf))],
        ["weak_l3_dist", weak_norm_via_distribution(f, 3)],
        ["sobolev_1", homogeneous_sobolev_norm(f, 1.0)],
        ["besov_half_fd", besov_halfnorm_fd(f, 0.5)],
    ]
    r = grid.torus_radius()
    g = Field.from_physical(grid, np.minimum(1.0 / np.maximum(r, 1e-9), 10.0)[np.newaxis])
    h = Field.from_physical(grid, np.exp(-(r**2))[np.newaxis])
    doubled = Grid(
        grid.n,
        tuple(2 * l for l in grid.box_length),
        tuple(2 * p for p in grid.points_per_dim),
    )
    checks = {
        "poincare": poincare_check(cutoff, grid, trials=trials, seed=config.seed),
        "bernstein_k1_p2": bernstein_check(cutoff, grid, k=1.0, p=2.0, trials=trials,
                                           seed=config.seed),
        "holder": holder_lorentz_check(
            g, h, ((1.5, np.inf), (3.0, np.inf), (3.0, np.inf))
        ),
        "sobolev_embedding": sobolev_embedding_check(h, 1.5, 3.0),
        "trilinear": trilinear_fgh_check(g, h, h, 1.0, 1.0, variant="n/2-weak"),
        "inverse_xi_square": {
            "value": inverse_xi_square_sum(cutoff, grid),
            "refined": inverse_xi_square_sum(cutoff, doubled),
        },
    }
    files = [
        _emit_csv(out / "norm_values.csv", ["norm_id", "value"], rows, config, quiet),
        _emit_json(out / "norm_checks.json", checks, config, quiet),
    ]
    return files


def cmd_counterexample(config: RunConfig, out: Path, rng, quiet: bool):
    c = config.table("counterexample")
    counts = [int(v) for v in c.get("counts", [8, 32, 128, 512])]
    sep = float(c.get("separation", 16.0))
    template = cx.CounterexampleSpec(max(counts), separation=sep,
                                     bump_radius=float(c.get("bump_radius", 1.0)))
    grid = cx.default_train_grid(template, dx=float(c.get("dx", 0.25)))
    lorentz_vals = []
    for n_count in counts:
        spec = cx.CounterexampleSpec(n_count, separation=sep,
                                     bump_radius=template.bump_radius)
        lorentz_vals.append(lorentz_norm(cx.build_fn(spec, grid), LorentzExp(3, np.inf)))
    counts2, besov_vals, fit = cx.fn_besov_growth(counts, template, grid=grid)
    rows = [[int(n), float(l), float(b)] for n, l, b in zip(counts, lorentz_vals, besov_vals)]

    x = np.log(np.asarray(counts, dtype=float))
    y = np.log(np.asarray(besov_vals))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / float(np.sum((x - x.mean()) ** 2)))

    cross = cx.cross_term_report(template, grid)
    wspec = cx.WeightedProfileSpec(float(c.get("weighted_m1", 1.0)))
    wgrid = Grid(3, float(c.get("weighted_box", 40.0)), int(c.get("weighted_grid_points", 64)))
    weighted = cx.weighted_profile_in_besov(wspec, wgrid)

    spread = (max(lorentz_vals) - min(lorentz_vals)) / min(lorentz_vals)
    verdict = {
        "weak_norm_values": lorentz_vals,
        "weak_norm_spread": spread,
        "weak_norm_bounded": spread < 0.2,
        "growth_exponent": float(slope),
        "growth_confidence_interval": [float(slope - 2 * stderr), float(slope + 2 * stderr)],
        "growth_fit": fit.to_jsonable(),
        "cross_term": cross,
        "weighted_profile": weighted,
    }
    files = [
        _emit_csv(out / "counterexample.csv", ["N", "lorentz3", "besov_half"], rows,
                  config, quiet),
        _emit_json(out / "counterexample.json", verdict, config, quiet),
    ]
    return files


def cmd_contour_check(config: RunConfig, out: Path, rng, quiet: bool):
    system, params = _model_params(config)
    c = config.table("contour")
    times = [float(t) for t in c.get("times", [0.1, 1.0, 10.0, 100.0])]
    r_lim = default_r_infty_cns(params) if system == "cns" else default_r_infty_dwe(params)
    xi_mags = [float(v) for v in c.get("xi_mags", np.geomspace(0.01, r_lim, 5))]
    rows = []
    margins = {}
    worst = 0.0
    for t in times:
        spec = _contour_spec(config, t)
        margins[repr(t)] = contour_margin(system, params, spec, xi_mags)
        if bool(c.get("compare_propagator", True)):
            from .contour import semigroup_via_contour

            for mag in xi_mags:
                xi = FreqVector([mag] + [0.0] * (params.n - 1))
                val = semigroup_via_contour(system, params, xi, t, spec,
                                            check_convergence=False,
                                            richardson=int(c.get("richardson", 2)))
                ref = propagator(system, params, xi, t)
                err = float(np.abs(val - ref).max() / max(np.abs(ref).max(), 1e-300))
                rows.append([t, mag, err])
                worst = max(worst, err)
    node_rows = contour_to_rows(_contour_spec(config, times[0]))
    files = [
        _emit_csv(out / "contour_nodes.csv",
                  ["lambda_re", "lambda_im", "weight_re", "weight_im"],
                  node_rows, config, quiet),
        _emit_csv(out / "contour_errors.csv", ["t", "xi_mag", "rel_error"], rows,
                  config, quiet),
        _emit_json(out / "contour_report.json",
                   {"margins": margins, "worst_rel_error": worst}, config, quiet),
    ]
    return files


_DISPATCH = {
    "spectrum": cmd_spectrum,
    "resolvent-scan": cmd_resolvent_scan,
    "evolve": cmd_evolve,
    "decay-fit": cmd_decay_fit,
    "norms": cmd_norms,
    "counterexample": cmd_counterexample,
    "contour-check": cmd_contour_check,
}


def _emit_csv(path, header, rows, config, quiet):
    write_csv_report(path, header, rows, config.to_jsonable())
    if not quiet:
        print(f"wrote {path}")
    return str(path)


def _emit_json(path, payload, config, quiet):
    write_json_report(path, payload, config.to_jsonable())
    if not quiet:
        print(f"wrote {path}")
    return str(path)


def _fail(code: int, exc: Exception) -> int:
    print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="parspec",
        description="spectral verification campaigns for two dissipative model systems",
    )
    parser.add_argument("command", nargs="?", choices=COMMANDS,
                        help="campaign to run (defaults to [run] command in the config)")
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="PRNG seed override")
    parser.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except FileNotFoundError as exc:
        return _fail(2, exc)
    except ConfigError as exc:
        return _fail(2, exc)

    command = args.command or config.get("run", "command")
    if command not in _DISPATCH:
        return _fail(2, ConfigError(f"no command given and [run] command is {command!r}"))

    if args.seed is not None:
        config.tables.setdefault("run", {})["seed"] = int(args.seed)
    threads = args.threads
    if threads is None:
        env = os.environ.get("PARSPEC_THREADS")
        threads = int(env) if env else config.get("run", "threads")
    if threads:
        set_fft_workers(int(threads))

    out = Path(args.out or config.get("run", "out_dir", "parspec-out"))
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)

    try:
        _DISPATCH[command](config, out, rng, args.quiet)
    except ConfigError as exc:
        return _fail(2, exc)
    except (ParspecError, ValueError) as exc:
        return _fail(3, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
