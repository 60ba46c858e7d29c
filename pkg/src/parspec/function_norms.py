"""Rearrangement-based and spectral function norms, plus inequality checks.

Everything is computed on the discrete measure of a periodic grid: the
non-increasing rearrangement of a field is the descending sort of its
cell samples weighted by the uniform cell volume, which makes the
Lorentz quadrature exact for the piecewise-constant rearrangement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ZeroModeSingularity
from .freq_split import Field, Grid, fractional_laplacian, lp_norm, _smooth_step


@dataclass(frozen=True)
class LorentzExp:
    """Admissible Lorentz exponent pair (p, q)."""

    p: float
    q: float

    def __post_init__(self):
        if not 1 <= self.p < np.inf:
            raise ValueError("p must lie in [1, inf)")
        if not (1 <= self.q <= np.inf):
            raise ValueError("q must lie in [1, inf]")


@dataclass(frozen=True)
class NormReport:
    norm_id: str
    value: float
    grid: dict
    refinement_stable: Optional[bool] = None

    def to_jsonable(self) -> dict:
        return {
            "norm_id": self.norm_id,
            "value": self.value,
            "grid": self.grid,
            "refinement_stable": self.refinement_stable,
        }


def _magnitude(field: Field) -> np.ndarray:
    """Pointwise Euclidean magnitude over components, flattened."""
    return np.sqrt(np.sum(field.physical**2, axis=0)).ravel()


class RearrangementTable:
    """Descending sample magnitudes with cumulative measure.

    ``values[k]`` is the (k+1)-th largest sample and the rearrangement
    equals ``values[k]`` on the measure interval
    ``(k*cell, (k+1)*cell]``.
    """

    def __init__(self, field: Field):
        self.cell = field.grid.cell_volume
        self.values = np.sort(_magnitude(field))[::-1]

    def distribution(self, level: float) -> float:
        """Measure of ``{|f| > level}`` on the discrete measure."""
        return self.cell * float(np.count_nonzero(self.values > level))

    def rearrangement(self, s) -> np.ndarray:
        """Evaluate f*(s) = inf{level : d_f(level) <= s}."""
        s = np.asarray(s, dtype=float)
        idx = np.minimum(np.floor(s / self.cell).astype(int), len(self.values) - 1)
        out = self.values[np.maximum(idx, 0)]
        return np.where(s >= self.cell * len(self.values), 0.0, out)


def lorentz_norm(field: Field, exps: LorentzExp) -> float:
    """Lorentz norm from the exact stepwise rearrangement integral.

    ``q = inf`` gives ``sup s^(1/p) f*(s)``; for finite q the integral
    over each constancy interval of f* is evaluated in closed form.
    """
    table = RearrangementTable(field)
    vals = table.values[table.values > 0.0]
    if vals.size == 0:
        return 0.0
    p, q = exps.p, exps.q
    bounds = table.cell * np.arange(1, vals.size + 1, dtype=float)
    if np.isinf(q):
        return float(np.max(bounds ** (1.0 / p) * vals))
    prev = np.concatenate(([0.0], bounds[:-1]))
    pieces = vals**q * (p / q) * (bounds ** (q / p) - prev ** (q / p))
    return float(np.sum(pieces) ** (1.0 / q))


def weak_norm_via_distribution(field: Field, p: float) -> float:
    """``sup level * d_f(level)^(1/p)`` over the sample-value levels.

    Independent route to the same weak norm as ``lorentz_norm`` with
    ``q = inf``; the supremum over levels is attained just below each
    distinct sample value.
    """
    table = RearrangementTable(field)
    vals = table.values[table.values > 0.0]
    if vals.size == 0:
        return 0.0
    uniq = np.unique(vals)
    best = 0.0
    for level in uniq:
        measure = table.cell * float(np.count_nonzero(vals >= level))
        best = max(best, level * measure ** (1.0 / p))
    return float(best)


def weighted_linf_norm(field: Field, s: float) -> float:
    """``max (1 + |x|)^s |f|`` with the min-image torus distance."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    weight = (1.0 + field.grid.torus_radius()) ** s
    mag = np.sqrt(np.sum(field.physical**2, axis=0))
    return float((weight * mag).max())


def homogeneous_sobolev_norm(field: Field, s: float) -> float:
    """Spectral homogeneous Sobolev norm with |u_hat|^2 weights.

    Normalized so that s = 0 reproduces the L^2 norm and s = 1 the L^2
    norm of the gradient.
    """
    coeffs = field.spectral
    mag2 = field.grid.xi_mag_sq()
    zero = (0,) * field.grid.n
    if s < 0:
        tol = 1e-12 * max(1.0, float(np.abs(coeffs).max()))
        if np.any(np.abs(coeffs[(slice(None),) + zero]) > tol):
            raise ZeroModeSingularity("negative-order norm needs a mean-free field")
    if s == 0:
        weight = np.ones_like(mag2)
    else:
        with np.errstate(divide="ignore"):
            weight = np.where(mag2 > 0.0, mag2**s, 0.0)
    total = np.sum(weight * np.abs(coeffs) ** 2)
    return float(np.sqrt(total / field.grid.volume))


# ---------------------------------------------------------------------------
# Homogeneous Besov B^s_{2,inf}: dyadic blocks and finite differences.


def _dyadic_chi(r: np.ndarray) -> np.ndarray:
    """Radial low bump: 1 on |xi| <= 3/4, 0 on |xi| >= 4/3."""
    return 1.0 - _smooth_step((r - 0.75) / (4.0 / 3.0 - 0.75))


def dyadic_shell(r: np.ndarray, j: int) -> np.ndarray:
    """Annular bump phi_hat(2^-j xi), supported in 3/4 <= 2^-j |xi| <= 8/3."""
    scaled = np.asarray(r) * 2.0 ** (-j)
    return _dyadic_chi(0.5 * scaled) - _dyadic_chi(scaled)


def resolved_shells(grid: Grid) -> range:
    """Dyadic indices whose shell overlaps the resolved frequencies."""
    xi_min = min(grid.freq_spacing)
    xi_max = float(np.sqrt(grid.xi_mag_sq().max()))
    j_lo = int(np.floor(np.log2(xi_min / (8.0 / 3.0))))
    j_hi = int(np.ceil(np.log2(xi_max / 0.75)))
    return range(j_lo, j_hi + 1)


def besov_block_norms(field: Field) -> dict:
    """L^2 norms of the Littlewood-Paley blocks, keyed by shell index.

    Evaluated on the annulus support of each shell only, so the cost is
    about two passes over the spectrum regardless of the shell count.
    """
    mag = field.grid.xi_mag().ravel()
    amp2 = np.sum(np.abs(field.spectral.reshape(field.components, -1)) ** 2, axis=0)
    vol = field.grid.volume
    out = {}
    for j in resolved_shells(field.grid):
        lo, hi = 0.75 * 2.0**j, (8.0 / 3.0) * 2.0**j
        mask = (mag > lo) & (mag < hi)
        if not mask.any():
            continue
        shell = dyadic_shell(mag[mask], j)
        val = float(np.sqrt(np.sum(shell**2 * amp2[mask]) / vol))
        if val > 0.0:
            out[j] = val
    return out


def besov_norm_dyadic(field: Field, s: float) -> float:
    """``sup_j 2^(js) |block_j|_L2`` over the resolved shells."""
    blocks = besov_block_norms(field)
    if not blocks:
        return 0.0
    return max(2.0 ** (j * s) * v for j, v in blocks.items())


def _shift_vectors(grid: Grid, max_shifts: int = 64):
    """Lattice shifts: axis and diagonal directions, dyadic cell counts."""
    n = grid.n
    dirs = [tuple(1 if j == a else 0 for j in range(n)) for a in range(n)]
    if n >= 2:
        dirs.append((1,) * n)
        if n == 3:
            dirs.extend([(1, 1, 0), (1, 0, 1), (0, 1, 1)])
    shifts = []
    for d in dirs:
        m = 1
        while all(m * abs(c) <= p // 4 for c, p in zip(d, grid.points_per_dim)):
            shifts.append(tuple(m * c for c in d))
            m *= 2
    return shifts[:max_shifts]


def besov_halfnorm_fd(field: Field, s: float, max_shifts: int = 64) -> float:
    """Finite-difference Besov seminorm ``sup_h |h|^-s |f(.+h) - f|_L2``.

    The supremum runs over sampled lattice shifts (a lower bound of the
    continuum supremum); valid for 0 < s < 1.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("finite-difference characterization needs 0 < s < 1")
    phys = field.physical
    dx = field.grid.spacing
    best = 0.0
    for shift in _shift_vectors(field.grid, max_shifts):
        rolled = np.roll(phys, tuple(-c for c in shift), axis=tuple(range(1, field.grid.n + 1)))
        diff = np.sqrt(np.sum((rolled - phys) ** 2) * field.grid.cell_volume)
        h = np.sqrt(sum((c * d) ** 2 for c, d in zip(shift, dx)))
        best = max(best, diff / h**s)
    return float(best)


# ---------------------------------------------------------------------------
# Inequality witnesses.  These report empirical constants; nothing here
# asserts a theoretical value.


def holder_lorentz_check(f: Field, g: Field, exps: tuple) -> dict:
    """Ratio ``|fg|_(p,q) / (|f|_(p1,q1) |g|_(p2,q2))`` on one pair.

    ``exps`` is ((p, q), (p1, q1), (p2, q2)) with the usual exponent
    arithmetic 1/p = 1/p1 + 1/p2, 1/q = 1/q1 + 1/q2.
    """
    (p, q), (p1, q1), (p2, q2) = exps
    prod = Field.from_physical(f.grid, f.physical * g.physical)
    num = lorentz_norm(prod, LorentzExp(p, q))
    den = lorentz_norm(f, LorentzExp(p1, q1)) * lorentz_norm(g, LorentzExp(p2, q2))
    return {
        "check": "holder_lorentz",
        "exponents": [[p, q], [p1, q1], [p2, q2]],
        "lhs": num,
        "rhs_product": den,
        "empirical_constant": num / den if den > 0 else 0.0,
    }


def sobolev_embedding_check(field: Field, p: float, q: float) -> dict:
    """Ratio ``|u|_Lq / |(-Delta)^delta u|_Lp`` with the scaling exponent.

    ``delta = (n/2)(1/p - 1/q)``; the field is taken mean-free since the
    homogeneous estimate sees no constants.
    """
    if not 1 < p < q < np.inf:
        raise ValueError("need 1 < p < q < inf")
    n = field.grid.n
    delta = 0.5 * n * (1.0 / p - 1.0 / q)
    coeffs = field.spectral.copy()
    coeffs[(slice(None),) + (0,) * n] = 0.0
    clean = Field.from_spectral(field.grid, coeffs)
    num = lp_norm(clean, q)
    den = lp_norm(fractional_laplacian(clean, delta), p)
    return {
        "check": "sobolev_embedding",
        "p": p,
        "q": q,
        "delta": delta,
        "lhs": num,
        "rhs": den,
        "empirical_constant": num / den if den > 0 else 0.0,
    }


def trilinear_fgh_check(f: Field, g: Field, h: Field, s1: float, s2: float,
                        variant: str = "n/2-weak") -> dict:
    """Ratio for ``|int f g h| <= C |f|_weak |g|_Hdot^s1 |h|_Hdot^s2``.

    ``variant`` picks the weak factor: ``"n/2-weak"`` uses the
    L^(n/2,inf) norm of f (exponent sum s1 + s2 = n - 1), ``"n-weak"``
    the L^(n,inf) norm (sum n - 2).  The exponent arithmetic is reported
    but not enforced, so off-scaling probes can be run as negative
    controls.
    """
    n = f.grid.n
    if variant == "n/2-weak":
        weak_p, expected_sum = 0.5 * n, n - 1.0
    elif variant == "n-weak":
        weak_p, expected_sum = float(n), n - 2.0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    integral = float(
        np.sum(f.physical[0] * g.physical[0] * h.physical[0]) * f.grid.cell_volume
    )
    weak = lorentz_norm(f, LorentzExp(weak_p, np.inf))
    gn = homogeneous_sobolev_norm(g, s1)
    hn = homogeneous_sobolev_norm(h, s2)
    den = weak * gn * hn
    return {
        "check": "trilinear_fgh",
        "variant": variant,
        "s1": s1,
        "s2": s2,
        "exponent_sum": s1 + s2,
        "expected_sum": expected_sum,
        "on_scaling": abs(s1 + s2 - expected_sum) < 1e-12,
        "lhs": abs(integral),
        "rhs_product": den,
        "empirical_constant": abs(integral) / den if den > 0 else 0.0,
    }
