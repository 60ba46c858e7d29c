"""Cauchy-formula semigroup quadrature along the time-dependent parabola.

The contour is the union of two parabola branches
``lambda = -r^2 +- (r + 1/t) i`` and the right-half-plane arc of radius
``1/t``, traversed upward so the spectrum (which sits to the left) is
enclosed.  On the branches ``|exp(lambda t)| = exp(-r^2 t)``, so the
truncation radius is chosen to push the endpoint damping to the 1e-16
level (``r_max^2 t >= 36``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import QuadratureNotConverged, TruncationTooSmall, WindowTooNarrow
from .freq_split import Field
from .resolvent_lab import perturbed_resolvent
from .symbols import (
    DweParams,
    FreqVector,
    ModelParams,
    cns_acoustic_pair,
    cns_symbol,
    dwe_pair,
    dwe_symbol,
)

#: Required endpoint damping exponent: exp(-36) ~ 2.3e-16.
DAMPING_EXPONENT = 36.0


@dataclass(frozen=True)
class ContourSpec:
    """Discretization of the parabolic contour for one time scale.

    ``t`` sets the arc radius ``1/t``.  Branch nodes are geometrically
    spaced from ``depth * r_max`` up to ``r_max`` (plus the junction at
    r = 0): passing ``nodes_per_branch`` fixes the count and derives the
    ratio; otherwise the default ratio 1.1 fixes the count.
    """

    t: float
    r_max: Optional[float] = None
    nodes_per_branch: Optional[int] = None
    quadrature: str = "trapezoid"
    arc_nodes: int = 33
    geometric_ratio: float = 1.1
    depth: float = 1e-5

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.quadrature not in ("trapezoid", "midpoint"):
            raise ValueError("quadrature must be 'trapezoid' or 'midpoint'")
        if self.arc_nodes < 3:
            raise ValueError("need at least 3 arc nodes")
        if not 0 < self.depth < 1:
            raise ValueError("depth must lie in (0, 1)")

    @property
    def effective_r_max(self) -> float:
        return self.r_max if self.r_max is not None else 6.0 / math.sqrt(self.t)

    @property
    def effective_branch_nodes(self) -> int:
        if self.nodes_per_branch is not None:
            return self.nodes_per_branch
        return int(math.ceil(math.log(1.0 / self.depth) / math.log(self.geometric_ratio))) + 1

    def branch_radii(self) -> np.ndarray:
        """Exactly ``nodes_per_branch`` radii: the arc junction r = 0 plus
        a geometric ladder up to r_max."""
        m = self.effective_branch_nodes
        if m < 3:
            raise ValueError("need at least 3 branch nodes")
        rmax = self.effective_r_max
        k = np.arange(m - 1)
        return np.concatenate([[0.0], rmax * self.depth ** ((m - 2 - k) / (m - 2))])

    def with_doubled_nodes(self) -> "ContourSpec":
        return ContourSpec(
            t=self.t,
            r_max=self.r_max,
            nodes_per_branch=2 * self.effective_branch_nodes,
            quadrature=self.quadrature,
            arc_nodes=2 * self.arc_nodes - 1,
            geometric_ratio=self.geometric_ratio,
            depth=self.depth,
        )

    def to_jsonable(self) -> dict:
        return {
            "t": self.t,
            "r_max": self.effective_r_max,
            "nodes_per_branch": self.effective_branch_nodes,
            "quadrature": self.quadrature,
            "arc_nodes": self.arc_nodes,
            "depth": self.depth,
        }


def _rule(points: np.ndarray, quadrature: str) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for integrating over a 1-d point sequence."""
    if quadrature == "midpoint":
        mids = 0.5 * (points[:-1] + points[1:])
        return mids, np.diff(points)
    weights = np.zeros_like(points)
    weights[1:-1] = 0.5 * (points[2:] - points[:-2])
    weights[0] = 0.5 * (points[1] - points[0])
    weights[-1] = 0.5 * (points[-1] - points[-2])
    return points, weights


def contour_nodes(spec: ContourSpec, t_phys: Optional[float] = None):
    """Quadrature nodes (lambda, dlambda-weight) traversing the contour once.

    Ordered: lower branch inward, arc upward through the right half
    plane, upper branch outward.  Raises TruncationTooSmall unless the
    endpoint damping reaches ``exp(-36)`` at the evaluation time.
    """
    t_eval = spec.t if t_phys is None else t_phys
    rmax = spec.effective_r_max
    if rmax**2 * t_eval < DAMPING_EXPONENT * (1.0 - 1e-9):
        raise TruncationTooSmall(
            f"r_max={rmax:.4g} gives endpoint damping exp({-rmax**2 * t_eval:.3g}); "
            f"need exponent <= -{DAMPING_EXPONENT}"
        )
    radii = spec.branch_radii()
    r_nodes, r_weights = _rule(radii, spec.quadrature)
    inv_t = 1.0 / spec.t

    lam_lo = -(r_nodes**2) - (r_nodes + inv_t) * 1j
    w_lo = r_weights * (2.0 * r_nodes + 1j)  # reversed traversal of dlambda/dr = -2r - i

    theta = np.linspace(-0.5 * math.pi, 0.5 * math.pi, spec.arc_nodes)
    th_nodes, th_weights = _rule(theta, spec.quadrature)
    lam_arc = inv_t * np.exp(1j * th_nodes)
    w_arc = th_weights * 1j * inv_t * np.exp(1j * th_nodes)

    lam_up = -(r_nodes**2) + (r_nodes + inv_t) * 1j
    w_up = r_weights * (-2.0 * r_nodes + 1j)

    lam = np.concatenate([lam_lo[::-1], lam_arc, lam_up])
    weights = np.concatenate([w_lo[::-1], w_arc, w_up])
    return lam, weights


def _resolvent_stack(system: str, params, xi: FreqVector, lam: np.ndarray) -> np.ndarray:
    """Batched dense resolvents ``(lambda_i + A(xi))^{-1}``."""
    symbol = cns_symbol(params, xi) if system == "cns" else dwe_symbol(params, xi)
    m = symbol.shape[0]
    lhs = lam[:, None, None] * np.eye(m) + symbol[None, :, :]
    rhs = np.broadcast_to(np.eye(m, dtype=complex), (lam.size, m, m))
    return np.linalg.solve(lhs, rhs)


def _contour_sum_matrix(system, params, xi, t, spec) -> np.ndarray:
    lam, w = contour_nodes(spec, t_phys=t)
    res = _resolvent_stack(system, params, xi, lam)
    factors = w * np.exp(lam * t)
    return np.tensordot(factors, res, axes=(0, 0)) / (2j * math.pi)


def _romberg(values):
    """Extrapolate a ladder of second-order node-doubling results."""
    table = list(values)
    factor = 4.0
    while len(table) > 1:
        table = [(factor * b - a) / (factor - 1.0) for a, b in zip(table[:-1], table[1:])]
        factor *= 4.0
    return table[0]


def semigroup_via_contour(
    system: str,
    params,
    xi_or_field,
    t: float,
    spec: Optional[ContourSpec] = None,
    perturbation=None,
    tol: float = 1e-6,
    check_convergence: bool = True,
    richardson: int = 2,
    cutoff=None,
    operator=None,
):
    """Cauchy-formula semigroup at time ``t`` through contour quadrature.

    Unperturbed mode takes a frequency and returns the per-frequency
    matrix, cross-checkable against the spectral propagator.  With a
    ``perturbation`` profile the third argument is the low-projected
    Field to propagate and each node applies the Neumann-series
    resolvent.

    The base rule is evaluated on a node-doubling ladder of depth
    ``richardson`` and extrapolated; when ``check_convergence`` is set,
    base-rule disagreement between the first two rungs beyond ``tol``
    raises QuadratureNotConverged.
    """
    spec = spec or ContourSpec(t=t, nodes_per_branch=1600, arc_nodes=257)
    levels = max(int(richardson), 1 if check_convergence else 0)

    if perturbation is None:
        xi = xi_or_field if isinstance(xi_or_field, FreqVector) else FreqVector(xi_or_field)

        def run(contour: ContourSpec) -> np.ndarray:
            return _contour_sum_matrix(system, params, xi, t, contour)

    else:
        if system != "cns":
            raise ValueError("perturbed contour propagation is wired for the compressible system")
        field: Field = xi_or_field

        def run(contour: ContourSpec) -> np.ndarray:
            lam, w = contour_nodes(contour, t_phys=t)
            total = None
            for li, wi in zip(lam, w):
                res = perturbed_resolvent(
                    params, perturbation, complex(li), field, cutoff=cutoff, operator=operator
                )
                piece = (wi * np.exp(complex(li) * t)) * res.spectral
                total = piece if total is None else total + piece
            return total / (2j * math.pi)

    ladder = [run(spec)]
    contour = spec
    for _ in range(levels):
        contour = contour.with_doubled_nodes()
        ladder.append(run(contour))
    if check_convergence and len(ladder) >= 2:
        scale = max(float(np.abs(ladder[1]).max()), 1e-300)
        if float(np.abs(ladder[1] - ladder[0]).max()) / scale > tol:
            raise QuadratureNotConverged(
                f"node doubling moved the result by more than {tol:.1e}"
            )
    out = _romberg(ladder) if richardson > 0 else ladder[-1]
    if perturbation is None:
        return out
    # physical states stay real: the contour sum has vanishing imaginary part
    return Field.from_spectral(field.grid, out, support_tag="low")


def contour_margin(system: str, params, spec: ContourSpec, xi_magnitudes) -> dict:
    """Minimum distance between contour nodes and the eigenvalue curve."""
    lam, _ = contour_nodes(spec)
    xi = np.asarray(xi_magnitudes, dtype=float)
    if system == "cns":
        lam_p, lam_m = cns_acoustic_pair(params, xi)
    else:
        lam_p, lam_m = dwe_pair(params, xi)
    pts = np.concatenate([lam_p, lam_m])
    dist = np.abs(lam[:, None] - pts[None, :])
    flat = int(np.argmin(dist))
    i, j = np.unravel_index(flat, dist.shape)
    return {
        "min_distance": float(dist.min()),
        "argmin_lambda": [float(lam[i].real), float(lam[i].imag)],
        "argmin_eigenvalue": [float(pts[j].real), float(pts[j].imag)],
    }


def contour_to_rows(spec: ContourSpec):
    """CSV-ready (re, im, weight_re, weight_im) rows for plotting."""
    lam, w = contour_nodes(spec)
    return [(float(l.real), float(l.imag), float(c.real), float(c.imag)) for l, c in zip(lam, w)]


# ---------------------------------------------------------------------------
# Decay-rate fits (artifact plumbing shared by the evolution diagnostics).


@dataclass(frozen=True)
class DecayFit:
    """Least-squares power-law fit of a positive time series.

    ``exponent`` is the slope of ``log value`` against ``log(1+t)``;
    ``curvature`` is the quadratic coefficient of the same data, used
    with ``r_squared`` to flag series that are not power laws.
    """

    exponent: float
    intercept: float
    r_squared: float
    curvature: float
    n_samples: int
    window: Tuple[float, float]

    @property
    def power_law(self) -> bool:
        return self.r_squared >= 0.98 and abs(self.curvature) <= 0.05

    def to_jsonable(self) -> dict:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "curvature": self.curvature,
            "n_samples": self.n_samples,
            "window": list(self.window),
            "power_law": self.power_law,
        }


def _fit_window(series, window):
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    t, v = arr[:, 0], arr[:, 1]
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    keep = v > 0
    t, v = t[keep], v[keep]
    if t.size < 8:
        raise WindowTooNarrow(f"need >= 8 positive samples in the window, got {t.size}")
    lo, hi = (float(t.min()), float(t.max())) if window is None else (window[0], window[1])
    return t, v, (lo, hi)


def _lsq_line(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def decay_fit(series, window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """Fit ``value ~ C (1+t)^exponent`` on the (positive) window samples."""
    t, v, win = _fit_window(series, window)
    x, y = np.log1p(t), np.log(v)
    slope, intercept, r2 = _lsq_line(x, y)
    quad = np.polyfit(x, y, 2)[0] if t.size >= 3 else 0.0
    return DecayFit(
        exponent=slope,
        intercept=intercept,
        r_squared=r2,
        curvature=float(quad),
        n_samples=int(t.size),
        window=win,
    )


def exp_rate_fit(series, window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """Fit ``value ~ C exp(-rate t)``; the exponent field carries -rate."""
    t, v, win = _fit_window(series, window)
    x, y = t, np.log(v)
    slope, intercept, r2 = _lsq_line(x, y)
    quad = np.polyfit(x, y, 2)[0] if t.size >= 3 else 0.0
    return DecayFit(
        exponent=slope,
        intercept=intercept,
        r_squared=r2,
        curvature=float(quad),
        n_samples=int(t.size),
        window=win,
    )
