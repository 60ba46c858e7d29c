"""Explicit per-frequency resolvents, bound scans, and the Neumann series.

The scans measure the constants in the frequency-pointwise resolvent
estimates over the two admissible parameter families: the left-half-
plane parabolas ``lambda = -a^2 +- (a + c0) i`` and the open right half
plane.  Constants are reported, never asserted against theory values;
stability under the ``c0`` sweep and under grid refinement is what the
acceptance suite checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DegenerateFrequency, MaxTermsExceeded, NoContraction, OnSpectrum
from .freq_split import CutoffSpec, Field, Grid
from .profiles import LowBandCnsOperator, SyntheticProfile
from .symbols import (
    DEGENERACY_TOL,
    DweParams,
    FreqVector,
    ModelParams,
    cns_acoustic_pair,
    dwe_pair,
)

ON_SPECTRUM_TOL = 1e-12
SPECTRUM_CLEARANCE = 1e-8

R1_PLUS = "R1_plus"
R1_MINUS = "R1_minus"
R2 = "R2"

C0_SWEEP = (0.1, 1.0, 10.0)


def _as_xi(xi) -> FreqVector:
    return xi if isinstance(xi, FreqVector) else FreqVector(xi)


def cns_resolvent_apply(params: ModelParams, lam: complex, xi, f_hat) -> np.ndarray:
    """Solve ``(lambda I + A_hat(xi)) u = f`` by the closed formula.

    The velocity is split into the transverse part (scalar resolvent of
    the shear eigenvalue) and the acoustic 2x2 block shared with the
    density.
    """
    xi = _as_xi(xi)
    f_hat = np.asarray(f_hat, dtype=complex)
    n = params.n
    if f_hat.shape != (n + 1,):
        raise ValueError(f"f_hat must have length {n + 1}")
    r = xi.magnitude
    if r <= DEGENERACY_TOL or abs(r - params.crossover) <= DEGENERACY_TOL:
        raise DegenerateFrequency(f"|xi|={r!r} too close to 0 or the crossover")
    lam = complex(lam)
    r2 = r * r
    lam1 = -params.alpha * r2
    lam_p, lam_m = cns_acoustic_pair(params, r)
    scale = max(1.0, abs(lam))
    if min(abs(lam - lam1), abs(lam - lam_p), abs(lam - lam_m)) <= ON_SPECTRUM_TOL * scale:
        raise OnSpectrum(f"lambda={lam!r} within tolerance of an eigenvalue")

    g = params.gamma
    q = lam * (lam + (params.alpha + params.beta) * r2) + g * g * r2
    f1, f2 = f_hat[0], f_hat[1:]
    dot = np.dot(xi.xi, f2)
    phi = ((lam + (params.alpha + params.beta) * r2) * f1 - 1j * g * dot) / q
    w = (f2 - xi.xi * (dot / r2)) / (lam + params.alpha * r2)
    w = w - 1j * g * xi.xi * f1 / q + lam * xi.xi * dot / (q * r2)
    return np.concatenate([[phi], w])


def dwe_resolvent_apply(params: DweParams, lam: complex, xi, f_hat) -> np.ndarray:
    """Displayed damped-wave solution formula at one frequency.

    ``u = f12 / ((lambda-lambda_+)(lambda-lambda_-))`` and
    ``v = -f11 + lambda u``; it solves the reduced system in which the
    second equation is already written for u alone.
    """
    xi = _as_xi(xi)
    f_hat = np.asarray(f_hat, dtype=complex)
    if f_hat.shape != (2,):
        raise ValueError("f_hat must have length 2")
    r = xi.magnitude
    if r <= DEGENERACY_TOL or abs(r - params.crossover) <= DEGENERACY_TOL:
        raise DegenerateFrequency(f"|xi|={r!r} too close to 0 or the crossover")
    lam = complex(lam)
    lam_p, lam_m = dwe_pair(params, r)
    scale = max(1.0, abs(lam))
    if min(abs(lam - lam_p), abs(lam - lam_m)) <= ON_SPECTRUM_TOL * scale:
        raise OnSpectrum(f"lambda={lam!r} within tolerance of an eigenvalue")
    q = (lam - lam_p) * (lam - lam_m)
    u = f_hat[1] / q
    v = -f_hat[0] + lam * f_hat[1] / q
    return np.array([u, v])


# ---------------------------------------------------------------------------
# Scan specifications and reports.


def default_a_grid(lo: float = 1e-4, hi: float = 10.0, count: int = 48) -> np.ndarray:
    """Log-spaced curve parameters; the hard regime is a -> 0."""
    return np.geomspace(lo, hi, count)


def default_lambda_grid(count_mod: int = 24, count_arg: int = 9) -> np.ndarray:
    """Right-half-plane grid: log-spaced moduli, fanned arguments."""
    mods = np.geomspace(1e-4, 10.0, count_mod)
    args = np.linspace(-0.49 * np.pi, 0.49 * np.pi, count_arg)
    return (mods[:, None] * np.exp(1j * args[None, :])).ravel()


def refine_log_grid(values: np.ndarray) -> np.ndarray:
    """Insert geometric midpoints (nested refinement of a positive grid)."""
    values = np.sort(np.asarray(values, dtype=float))
    mids = np.sqrt(values[:-1] * values[1:])
    return np.sort(np.concatenate([values, mids]))


def refine_lambda_grid(values: np.ndarray) -> np.ndarray:
    """Nested refinement of a complex grid along geometric modulus midpoints."""
    values = np.asarray(values, dtype=complex)
    order = np.argsort(np.abs(values))
    v = values[order]
    mids = []
    for a, b in zip(v[:-1], v[1:]):
        if abs(a) > 0 and abs(b) > 0:
            mids.append(math.sqrt(abs(a) * abs(b)) * np.exp(1j * np.angle(a)))
    return np.concatenate([values, np.asarray(mids, dtype=complex)])


@dataclass(frozen=True)
class ResolventSetSpec:
    """One admissible parameter family for a bound scan."""

    family: str
    c0: float = 1.0
    a_grid: Optional[np.ndarray] = None
    lambda_grid: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in (R1_PLUS, R1_MINUS, R2):
            raise ValueError(f"unknown family {self.family!r}")
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")

    def lambdas(self, c0: Optional[float] = None) -> np.ndarray:
        if self.family == R2:
            grid = self.lambda_grid if self.lambda_grid is not None else default_lambda_grid()
            grid = np.asarray(grid, dtype=complex)
            if np.any(grid.real <= 0):
                raise ValueError("R2 grid must have positive real parts")
            return grid
        a = np.asarray(self.a_grid if self.a_grid is not None else default_a_grid(), dtype=float)
        if np.any(a <= 0):
            raise ValueError("curve parameters must be positive")
        sign = 1.0 if self.family == R1_PLUS else -1.0
        return -(a**2) + sign * (a + (self.c0 if c0 is None else c0)) * 1j

    def refined(self) -> "ResolventSetSpec":
        if self.family == R2:
            grid = self.lambda_grid if self.lambda_grid is not None else default_lambda_grid()
            return ResolventSetSpec(self.family, self.c0, None, refine_lambda_grid(grid))
        a = self.a_grid if self.a_grid is not None else default_a_grid()
        return ResolventSetSpec(self.family, self.c0, refine_log_grid(a), None)

    def to_jsonable(self) -> dict:
        out = {"family": self.family, "c0": self.c0}
        if self.family == R2:
            grid = self.lambda_grid if self.lambda_grid is not None else default_lambda_grid()
            out["lambda_grid_size"] = int(np.asarray(grid).size)
        else:
            a = self.a_grid if self.a_grid is not None else default_a_grid()
            out["a_grid_size"] = int(np.asarray(a).size)
        return out


@dataclass
class BoundScanReport:
    """Estimated constants for each scanned bound, plus raw scan rows."""

    system: str
    family: str
    params: dict
    r_infty: float
    conforming: bool
    c0_values: List[Optional[float]]
    bounds: Dict[str, dict]
    rows: List[tuple] = dc_field(default_factory=list)
    min_spectrum_distance: float = math.inf

    def constant(self, bound_id: str) -> float:
        return self.bounds[bound_id]["constant"]

    def to_jsonable(self) -> dict:
        return {
            "system": self.system,
            "family": self.family,
            "params": self.params,
            "r_infty": self.r_infty,
            "conforming": self.conforming,
            "c0_values": self.c0_values,
            "min_spectrum_distance": self.min_spectrum_distance,
            "bounds": self.bounds,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bound_id,family,c0,a,xi_mag,ratio,lambda_re,lambda_im,case\n")
            for row in self.rows:
                fh.write(",".join("" if v is None else repr(v) for v in row) + "\n")


def _spectrum_distance_cns(params: ModelParams, lam: np.ndarray, xi: np.ndarray) -> np.ndarray:
    lam_p, lam_m = cns_acoustic_pair(params, xi)
    lam1 = -params.alpha * xi**2
    l = lam[:, None]
    return np.minimum(np.abs(l - lam1[None, :]),
                      np.minimum(np.abs(l - lam_p[None, :]), np.abs(l - lam_m[None, :])))


def _spectrum_distance_dwe(params: DweParams, lam: np.ndarray, xi: np.ndarray) -> np.ndarray:
    lam_p, lam_m = dwe_pair(params, xi)
    l = lam[:, None]
    return np.minimum(np.abs(l - lam_p[None, :]), np.abs(l - lam_m[None, :]))


def _case_labels(lam_abs: np.ndarray, xi: np.ndarray, gamma_like: float) -> np.ndarray:
    """Proof case split: 'a' when |lambda| is far from gamma|xi|, else 'b'."""
    lo = gamma_like * xi[None, :] / math.sqrt(2.0)
    hi = math.sqrt(2.0) * gamma_like * xi[None, :]
    between = (lam_abs[:, None] >= lo) & (lam_abs[:, None] <= hi)
    return np.where(between, "b", "a")


def _collect(bounds: dict, bound_id: str, ratios: np.ndarray, lam: np.ndarray,
             xi: np.ndarray, cases: np.ndarray, c0: Optional[float]) -> None:
    """Fold one (lambda x xi) ratio table into the running report."""
    entry = bounds.setdefault(
        bound_id,
        {"constant": 0.0, "argmax": None, "per_c0": {}, "per_case": {"a": 0.0, "b": 0.0}},
    )
    flat = int(np.argmax(ratios))
    i, j = np.unravel_index(flat, ratios.shape)
    top = float(ratios[i, j])
    key = "none" if c0 is None else repr(float(c0))
    entry["per_c0"][key] = max(entry["per_c0"].get(key, 0.0), top)
    for label in ("a", "b"):
        mask = cases == label
        if mask.any():
            entry["per_case"][label] = max(entry["per_case"][label], float(ratios[mask].max()))
    if top > entry["constant"]:
        entry["constant"] = top
        entry["argmax"] = {
            "lambda": [float(lam[i].real), float(lam[i].imag)],
            "xi_mag": float(xi[j]),
            "c0": c0,
        }


def scan_cns_bounds(
    params: ModelParams,
    set_spec: ResolventSetSpec,
    xi_magnitudes: Sequence[float],
    r_infty: float,
    c0_sweep: Sequence[float] = C0_SWEEP,
) -> BoundScanReport:
    """Estimate the constants of the two compressible resolvent bounds.

    ``low``: ``|phi| + |w| <= C/(|lambda||xi|)`` and ``high``:
    ``|xi|^2 (|phi| + |w|) <= C``, per unit canonical forcing direction.
    The supremum is taken over the family grid, the frequency grid, the
    c0 sweep (curve families only) and the n+1 forcing directions.
    """
    xi = np.asarray(xi_magnitudes, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi magnitudes must be positive")
    if np.any(xi > r_infty) or r_infty >= params.crossover:
        raise ValueError("need xi <= r_infty < crossover")
    conforming = params.strong_viscosity
    if not conforming:
        warnings.warn(
            "coefficients outside the strong-viscosity regime; report flagged non-conforming",
            UserWarning,
        )

    n = params.n
    a, b, g = params.alpha, params.beta, params.gamma
    c0_list: List[Optional[float]] = (
        [None] if set_spec.family == R2 else sorted(set(float(c) for c in c0_sweep) | {set_spec.c0})
    )
    report = BoundScanReport(
        system="cns",
        family=set_spec.family,
        params={"n": n, "alpha": a, "beta": b, "gamma": g},
        r_infty=r_infty,
        conforming=conforming,
        c0_values=c0_list,
        bounds={},
    )

    xi2 = xi**2
    for c0 in c0_list:
        lam = set_spec.lambdas(c0)
        dist = _spectrum_distance_cns(params, lam, xi)
        report.min_spectrum_distance = min(report.min_spectrum_distance, float(dist.min()))
        if dist.min() <= SPECTRUM_CLEARANCE:
            raise ValueError("scan grid touches the spectral curve")
        l = lam[:, None]
        q = l * (l + (a + b) * xi2[None, :]) + g * g * xi2[None, :]
        shear = l + a * xi2[None, :]
        cases = _case_labels(np.abs(lam), xi, g)

        # forcing (1, 0...): phi = (lambda + (a+b)|xi|^2)/q, w = -i g xi/q
        amt_f1 = (np.abs(l + (a + b) * xi2[None, :]) + g * xi[None, :]) / np.abs(q)
        # forcing (0, e_long): phi = -i g |xi|/q, w_long = 1/shear + ... combined:
        # transverse part vanishes for longitudinal forcing; w = lambda xi &c.
        amt_f2l = (g * xi[None, :] + np.abs(l)) / np.abs(q)
        # forcing (0, e_perp): pure shear resolvent (n >= 2 only)
        amt_f2t = 1.0 / np.abs(shear)

        directions = [("f11", amt_f1), ("f12_long", amt_f2l)]
        if n >= 2:
            directions.append(("f12_perp", amt_f2t))
        for bound_id, weight in (("low", np.abs(l) * xi[None, :]), ("high", xi2[None, :])):
            best = None
            for _, amt in directions:
                r = weight * amt
                best = r if best is None else np.maximum(best, r)
            _collect(report.bounds, bound_id, best, lam, xi, cases, c0)
            for i in range(lam.size):
                for j in range(xi.size):
                    report.rows.append(
                        (
                            bound_id,
                            set_spec.family,
                            c0,
                            None if set_spec.family == R2 else float(np.sqrt(-lam[i].real)),
                            float(xi[j]),
                            float(best[i, j]),
                            float(lam[i].real),
                            float(lam[i].imag),
                            str(cases[i, j]),
                        )
                    )
    return report


def scan_dwe_bounds(
    params: DweParams,
    set_spec: ResolventSetSpec,
    xi_magnitudes: Sequence[float],
    r_infty: float,
    c0_sweep: Sequence[float] = C0_SWEEP,
) -> BoundScanReport:
    """Estimate the constants of the four damped-wave resolvent bounds.

    ``u_low``: |lambda||xi|^2|u| / |f12|; ``u_high``: |xi|^3|u| / |f12|;
    ``v_f11``: |v| / |f11| (identically one); ``v_f12``:
    |lambda||v| / |f12|; ``v_high``: |xi|^2|v| per unit direction.
    """
    xi = np.asarray(xi_magnitudes, dtype=float)
    if np.any(xi <= 0):
        raise ValueError("xi magnitudes must be positive")
    if np.any(xi > r_infty) or r_infty >= params.crossover:
        raise ValueError("need xi <= r_infty < crossover")
    conforming = params.strong_damping
    if not conforming:
        warnings.warn(
            "coefficients outside the strong-damping regime; report flagged non-conforming",
            UserWarning,
        )
    c0_list: List[Optional[float]] = (
        [None] if set_spec.family == R2 else sorted(set(float(c) for c in c0_sweep) | {set_spec.c0})
    )
    report = BoundScanReport(
        system="dwe",
        family=set_spec.family,
        params={"n": params.n, "mu": params.mu, "mu_prime": params.mu_prime},
        r_infty=r_infty,
        conforming=conforming,
        c0_values=c0_list,
        bounds={},
    )
    xi2 = xi**2
    for c0 in c0_list:
        lam = set_spec.lambdas(c0)
        dist = _spectrum_distance_dwe(params, lam, xi)
        report.min_spectrum_distance = min(report.min_spectrum_distance, float(dist.min()))
        if dist.min() <= SPECTRUM_CLEARANCE:
            raise ValueError("scan grid touches the spectral curve")
        l = lam[:, None]
        q = l * (l + params.mu * xi2[None, :]) + params.mu_prime * xi2[None, :]
        absu = 1.0 / np.abs(q)  # |u| per unit f12
        absv = np.abs(l) / np.abs(q)  # |v| per unit f12
        cases = _case_labels(np.abs(lam), xi, math.sqrt(params.mu_prime))
        ratio_sets = {
            "u_low": np.abs(l) * xi2[None, :] * absu,
            "u_high": xi[None, :] ** 3 * absu,
            "v_f11": np.ones_like(absu),
            "v_f12": np.abs(l) * absv,
            "v_high": np.maximum(xi2[None, :] * absv, xi2[None, :] * np.ones_like(absu)),
        }
        for bound_id, ratios in ratio_sets.items():
            _collect(report.bounds, bound_id, ratios, lam, xi, cases, c0)
            for i in range(lam.size):
                for j in range(xi.size):
                    report.rows.append(
                        (
                            bound_id,
                            set_spec.family,
                            c0,
                            None if set_spec.family == R2 else float(np.sqrt(-lam[i].real)),
                            float(xi[j]),
                            float(ratios[i, j]),
                            float(lam[i].real),
                            float(lam[i].imag),
                            str(cases[i, j]),
                        )
                    )
    return report


def default_r_infty_cns(params: ModelParams) -> float:
    """Scan radius: proof constraint 1/(2 sqrt(2) gamma), capped below crossover."""
    return min(1.0 / (2.0 * math.sqrt(2.0) * params.gamma), 0.9 * params.crossover)


def default_r_infty_dwe(params: DweParams) -> float:
    return min(1.0 / (2.0 * math.sqrt(2.0) * math.sqrt(params.mu_prime)), 0.9 * params.crossover)


def check_sectorial_bound(delta: float = math.pi / 4, samples: int = 400) -> dict:
    """Measure C in ``1/|lambda + x| <= C/(|lambda| + x)`` on the sector.

    The sector is ``|arg lambda| <= pi - delta``; ``x`` stands for
    ``|xi|^2 >= 0``.  Returns the observed supremum (worst case on the
    extreme rays).
    """
    mods = np.geomspace(1e-6, 1e6, samples)
    args = np.linspace(-(math.pi - delta), math.pi - delta, 33)
    lam = (mods[:, None] * np.exp(1j * args[None, :])).ravel()
    x = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, samples)])
    ratio = (np.abs(lam)[:, None] + x[None, :]) / np.abs(lam[:, None] + x[None, :])
    return {"check": "sectorial", "delta": delta, "constant": float(ratio.max())}


# ---------------------------------------------------------------------------
# Neumann series for the perturbed low-frequency resolvent.


def _free_resolvent_window(params: ModelParams, lam: complex, grid: Grid,
                           coeffs: np.ndarray) -> np.ndarray:
    """Apply ``(lambda + A_hat)^{-1}`` modewise on a window grid."""
    n = grid.n
    ax = grid._bcast(grid.xi_axes_deriv())
    mag2 = sum(x**2 for x in ax) + 0.0 * grid.xi_mag_sq()
    a, b, g = params.alpha, params.beta, params.gamma
    q = lam * (lam + (a + b) * mag2) + g * g * mag2
    shear = lam + a * mag2
    scale = max(1.0, abs(lam))
    if min(float(np.abs(q).min()), float(np.abs(shear).min())) <= ON_SPECTRUM_TOL * scale:
        raise OnSpectrum(f"lambda={lam!r} on the grid spectrum")
    f1, f2 = coeffs[0], coeffs[1:]
    dot = sum(ax[j] * f2[j] for j in range(n))
    safe_mag2 = np.where(mag2 > 0.0, mag2, 1.0)
    phi = ((lam + (a + b) * mag2) * f1 - 1j * g * dot) / q
    out = np.empty_like(coeffs)
    out[0] = phi
    for j in range(n):
        wj = (f2[j] - ax[j] * dot / safe_mag2) / shear
        wj = wj - 1j * g * ax[j] * f1 / q + lam * ax[j] * dot / (q * safe_mag2)
        out[1 + j] = wj
    zero = (0,) * n
    for c in range(coeffs.shape[0]):
        out[(c,) + zero] = coeffs[(c,) + zero] / lam
    return out


def perturbed_resolvent(
    params: ModelParams,
    profile: SyntheticProfile,
    lam: complex,
    source: Field,
    tol: float = 1e-10,
    max_terms: int = 200,
    cutoff: Optional[CutoffSpec] = None,
    operator: Optional[LowBandCnsOperator] = None,
    return_info: bool = False,
):
    """Truncated Neumann series for the perturbed low-band resolvent.

    Iterates ``term <- -(lambda + A)^{-1} B term`` starting from the free
    resolvent of the source, stopping once the latest term is below
    ``tol`` relative to the running sum.  The observed per-term
    contraction ratios are the empirical smallness factor.
    """
    cutoff = cutoff or CutoffSpec()
    if source.support_tag != "low":
        raise ValueError("source must be a low-projected field")
    op = operator or LowBandCnsOperator(params, profile, cutoff, source.grid)
    grid = op.window
    term = _free_resolvent_window(params, lam, grid, op.restrict_state(source))
    total = term.copy()
    ratios: List[float] = []
    consecutive = 0
    for _ in range(max_terms):
        nxt = -_free_resolvent_window(params, lam, grid, op.apply(term))
        num = float(np.sqrt(np.sum(np.abs(nxt) ** 2)))
        den = float(np.sqrt(np.sum(np.abs(term) ** 2)))
        ratio = num / den if den > 0 else 0.0
        ratios.append(ratio)
        if ratio > 0.95:
            consecutive += 1
            if consecutive >= 3:
                raise NoContraction(
                    f"term ratio {ratio:.3f} above 0.95 for 3 consecutive terms"
                )
        else:
            consecutive = 0
        total += nxt
        term = nxt
        sum_norm = float(np.sqrt(np.sum(np.abs(total) ** 2)))
        if num <= tol * max(sum_norm, 1e-300):
            break
    else:
        raise MaxTermsExceeded(f"no convergence within {max_terms} terms")
    out = op.prolong_state(total, source.grid)
    if return_info:
        return out, {"terms": len(ratios) + 1, "contraction_ratios": ratios}
    return out


def perturbed_forward_apply(
    params: ModelParams,
    profile: SyntheticProfile,
    lam: complex,
    state: Field,
    cutoff: Optional[CutoffSpec] = None,
    operator: Optional[LowBandCnsOperator] = None,
) -> Field:
    """Apply ``lambda + A + B`` on the low band (residual-check oracle)."""
    cutoff = cutoff or CutoffSpec()
    op = operator or LowBandCnsOperator(params, profile, cutoff, state.grid)
    grid = op.window
    coeffs = op.restrict_state(state)
    n = grid.n
    ax = grid._bcast(grid.xi_axes_deriv())
    mag2 = sum(x**2 for x in ax) + 0.0 * grid.xi_mag_sq()
    a, b, g = params.alpha, params.beta, params.gamma
    out = lam * coeffs
    f1, f2 = coeffs[0], coeffs[1:]
    dot = sum(ax[j] * f2[j] for j in range(n))
    out[0] += 1j * g * dot
    for j in range(n):
        out[1 + j] += 1j * g * ax[j] * f1 + a * mag2 * f2[j] + b * ax[j] * dot
    out += op.apply(coeffs)
    return op.prolong_state(out, state.grid)
