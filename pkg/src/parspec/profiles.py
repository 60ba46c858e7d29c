"""Synthetic slowly decaying perturbation profiles and their operators.

The stationary-state surrogate decays like ``eps/(1+|x|)`` with gradient
``~ eps/(1+|x|)^2``, smoothly truncated before the torus boundary so the
periodized field stays C-infinity.  Amplitudes are rescaled so that the
measured smallness constraints come out at exactly ``eps`` (within the
``<= 2 eps`` contract).

Two first-order perturbation operators are provided:

* the compressible bilinear form coupling the state to the stationary
  surrogate (density/velocity products up to second derivatives), with
  the pressure nonlinearity closed by a quadratic pressure law so that
  the remainder factor ``h(phi) = -1/(1+phi)`` is exact and the second
  pressure factor is the constant ``gamma/2``;
* the damped-wave coefficient form ``u div b1 + b2 . grad u + b3 Lap u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict

import numpy as np

from .freq_split import CutoffSpec, Field, Grid, _smooth_step
from .function_norms import LorentzExp, lorentz_norm, weighted_linf_norm
from .symbols import ModelParams

CNS_KIND = "cns_stationary"
DWE_KIND = "dwe_coefficients"

#: The rational factor -1/(1+phi) needs 1 + phi > 1/2, guaranteed for
#: eps below this bound.
MAX_EPSILON = 0.1


@dataclass(frozen=True)
class SyntheticProfile:
    """Generated profile fields plus the measured smallness report."""

    kind: str
    epsilon: float
    grid: Grid
    fields: Dict[str, Field]
    achieved: Dict[str, float] = dc_field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "grid": self.grid.to_jsonable(),
            "achieved": self.achieved,
        }


def _envelope(grid: Grid) -> np.ndarray:
    """Smoothly truncated 1/(1+|x|) bump on the torus."""
    r = grid.torus_radius()
    half = 0.5 * min(grid.box_length)
    taper = 1.0 - _smooth_step((r - 0.7 * half) / (0.2 * half))
    return taper / (1.0 + r)


def _spectral_derivative(grid: Grid, coeffs: np.ndarray, axis: int) -> np.ndarray:
    ax = grid._bcast(grid.xi_axes_deriv())[axis]
    return 1j * ax * coeffs


def _solenoidal(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Project stacked vector coefficients onto divergence-free fields."""
    ax = grid._bcast(grid.xi_axes_deriv())
    mag2 = sum(a**2 for a in ax) + 0.0 * grid.xi_mag_sq()
    div = sum(ax[j] * coeffs[j] for j in range(grid.n))
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(mag2 > 0.0, div / np.where(mag2 > 0.0, mag2, 1.0), 0.0)
    return np.stack([coeffs[j] - ax[j] * scale for j in range(grid.n)])


def _grad_field(f: Field) -> Field:
    grid = f.grid
    coeffs = f.spectral
    out = np.stack(
        [_spectral_derivative(grid, coeffs[c], j) for c in range(f.components) for j in range(grid.n)]
    )
    return Field.from_spectral(grid, out)


def _sobolev_grad_norm(f: Field, s: int) -> float:
    """H^s norm of grad f, i.e. sqrt(sum_{j<=s} |(-Lap)^(j/2) grad f|^2)."""
    mag2 = f.grid.xi_mag_sq()
    weight = mag2 * sum(mag2**j for j in range(s + 1))
    total = np.sum(weight * np.abs(f.spectral) ** 2)
    return float(np.sqrt(total / f.grid.volume))


def make_cns_profile(params: ModelParams, grid: Grid, epsilon: float, s: int = 3) -> SyntheticProfile:
    """Stationary-state surrogate (phi, w) meeting the smallness contract.

    The velocity part is the solenoidal projection of the envelope times
    a fixed direction pattern.  All constraint norms are measured on the
    grid and the amplitude is set so the largest equals ``epsilon``.
    """
    if not 0 <= epsilon <= MAX_EPSILON:
        raise ValueError(f"epsilon must lie in [0, {MAX_EPSILON}]")
    env = _envelope(grid)
    phi = Field.from_physical(grid, env)
    raw = np.zeros((grid.n,) + grid.points_per_dim)
    raw[0] = env
    if grid.n > 1:
        raw[1] = 0.5 * env
    w = Field.from_spectral(grid, _solenoidal(grid, grid.forward(raw)))

    stacked = Field.from_physical(grid, np.concatenate([phi.physical, w.physical]))
    unit = {
        "weighted_phi": weighted_linf_norm(phi, 1.0),
        "weighted_grad_phi": weighted_linf_norm(_grad_field(phi), 2.0),
        "sobolev_grad": _sobolev_grad_norm(stacked, s),
        "lorentz_n": lorentz_norm(stacked, LorentzExp(grid.n, np.inf)),
        "lorentz_grad_n2": lorentz_norm(_grad_field(stacked), LorentzExp(0.5 * grid.n, np.inf)),
    }
    binding = max(unit["weighted_phi"], unit["weighted_grad_phi"], unit["sobolev_grad"])
    scale = epsilon / binding
    fields = {
        "phi_omega": scale * phi,
        "w_omega": scale * w,
    }
    achieved = {k: scale * v for k, v in unit.items()}
    return SyntheticProfile(CNS_KIND, epsilon, grid, fields, achieved)


def make_dwe_profile(grid: Grid, epsilon: float, p0: float = 2.5) -> SyntheticProfile:
    """Damped-wave coefficients (b1, b2, b3) meeting the combined bound.

    The reported ``combined`` value is the full constraint sum
    ``sum_j (L^{n,inf} + grad L^{n/2,inf}) + L^{p0} block + W^{1,inf}``,
    rescaled to equal ``epsilon`` exactly.
    """
    if not 0 <= epsilon <= MAX_EPSILON:
        raise ValueError(f"epsilon must lie in [0, {MAX_EPSILON}]")
    env = _envelope(grid)
    vec = np.zeros((grid.n,) + grid.points_per_dim)
    vec[0] = env
    if grid.n > 1:
        vec[-1] = -0.5 * env
    b1 = Field.from_physical(grid, vec)
    b2 = Field.from_physical(grid, vec[::-1].copy())
    b3 = Field.from_physical(grid, env)

    def lp(f: Field, p: float) -> float:
        mag = np.sqrt(np.sum(f.physical**2, axis=0))
        return float((np.sum(mag**p) * grid.cell_volume) ** (1.0 / p))

    n = grid.n
    weak = sum(
        lorentz_norm(b, LorentzExp(n, np.inf)) + lorentz_norm(_grad_field(b), LorentzExp(0.5 * n, np.inf))
        for b in (b1, b2, b3)
    )
    lp_block = lp(_grad_field(b1), p0) + lp(b2, p0) + lp(b3, p0) + lp(_grad_field(b3), p0)
    w1inf = float(np.abs(b3.physical).max() + np.sqrt(np.sum(_grad_field(b3).physical**2, axis=0)).max())
    combined_unit = weak + lp_block + w1inf
    scale = epsilon / combined_unit
    fields = {"b1": scale * b1, "b2": scale * b2, "b3": scale * b3}
    achieved = {
        "combined": epsilon,
        "weak_block": scale * weak,
        "lp_block": scale * lp_block,
        "w1inf_block": scale * w1inf,
        "p0": p0,
    }
    return SyntheticProfile(DWE_KIND, epsilon, grid, fields, achieved)


# ---------------------------------------------------------------------------
# Compressible bilinear perturbation.


class _CnsProfileData:
    """Physical-space profile quantities entering the bilinear form."""

    def __init__(self, params: ModelParams, grid: Grid, phi_w: Field, w_w: Field):
        self.grid = grid
        n = grid.n
        phw = phi_w.physical[0]
        if np.min(1.0 + phw) <= 0.5:
            raise ValueError("profile too large: need 1 + phi > 1/2")
        wc = w_w.spectral
        pc = phi_w.spectral

        def phys(c):
            return grid.backward(c).real

        self.phi = phw
        self.w = w_w.physical
        self.grad_phi = np.stack([phys(_spectral_derivative(grid, pc[0], j)) for j in range(n)])
        self.div_w = phys(sum(_spectral_derivative(grid, wc[j], j) for j in range(n)))
        self.dw = np.stack(
            [np.stack([phys(_spectral_derivative(grid, wc[i], j)) for j in range(n)]) for i in range(n)]
        )  # dw[i, j] = d_j w_i
        mag2 = grid.xi_mag_sq()
        self.lap_w = np.stack([phys(-mag2 * wc[j]) for j in range(n)])
        divc = sum(_spectral_derivative(grid, wc[j], j) for j in range(n))
        self.grad_div_w = np.stack([phys(_spectral_derivative(grid, divc, j)) for j in range(n)])
        self.h1 = -1.0 / (1.0 + phw)
        self.p1 = 0.5 * params.gamma  # quadratic pressure law: p'' = gamma^2 everywhere
        a, b, g = params.alpha, params.beta, params.gamma
        # coefficient of the state density in the velocity row
        self.vel_from_phi = (
            -(a / g**2) * self.h1 * self.lap_w
            - (b / g**2) * self.h1 * self.grad_div_w
            + (self.h1 + 2.0 * self.p1) * self.grad_phi
        )
        self.grad_phi_coeff = (self.h1 + 2.0 * self.p1) * self.phi  # multiplies grad(state phi)
        self.second_order_coeff = self.h1 * self.phi  # multiplies Lap w and grad div w


def cns_bilinear_physical(params: ModelParams, data: _CnsProfileData, phi, w, grad_phi,
                          div_w, dw, lap_w, grad_div_w) -> np.ndarray:
    """Evaluate the bilinear form pointwise from physical-space inputs.

    ``dw[i, j] = d_j w_i``.  Returns the stacked (density, velocity)
    right-hand side including the leading gamma factor.
    """
    n = data.grid.n
    g = params.gamma
    a, b = params.alpha, params.beta
    top = (
        np.einsum("k...,k...->...", w, data.grad_phi)
        + phi * data.div_w
        + data.phi * div_w
        + np.einsum("k...,k...->...", data.w, grad_phi)
    )
    vel = np.einsum("k...,jk...->j...", w, data.dw)  # (w . grad) w_omega
    vel = vel + phi * data.vel_from_phi
    vel = vel + np.einsum("k...,jk...->j...", data.w, np.swapaxes(dw, 0, 1))  # (w_omega . grad) w
    vel = vel + data.grad_phi_coeff * grad_phi
    vel = vel - (a / g**2) * data.second_order_coeff * lap_w
    vel = vel - (b / g**2) * data.second_order_coeff * grad_div_w
    return g * np.concatenate([top[np.newaxis], vel])


def apply_cns_perturbation(params: ModelParams, profile: SyntheticProfile, state: Field) -> Field:
    """Bilinear perturbation applied to an (n+1)-component state field."""
    if profile.kind != CNS_KIND:
        raise ValueError("profile is not a stationary-state surrogate")
    grid = state.grid
    if grid != profile.grid:
        raise ValueError("state and profile grids differ")
    data = _cns_profile_data(params, profile)
    n = grid.n
    coeffs = state.spectral
    pc, wc = coeffs[0], coeffs[1:]

    def phys(c):
        return grid.backward(c).real

    phi = phys(pc)
    w = np.stack([phys(wc[j]) for j in range(n)])
    grad_phi = np.stack([phys(_spectral_derivative(grid, pc, j)) for j in range(n)])
    div_c = sum(_spectral_derivative(grid, wc[j], j) for j in range(n))
    div_w = phys(div_c)
    dw = np.stack(
        [np.stack([phys(_spectral_derivative(grid, wc[i], j)) for j in range(n)]) for i in range(n)]
    )
    mag2 = grid.xi_mag_sq()
    lap_w = np.stack([phys(-mag2 * wc[j]) for j in range(n)])
    grad_div_w = np.stack([phys(_spectral_derivative(grid, div_c, j)) for j in range(n)])
    out = cns_bilinear_physical(params, data, phi, w, grad_phi, div_w, dw, lap_w, grad_div_w)
    return Field.from_physical(grid, out)


_PROFILE_CACHE: dict = {}


def _cns_profile_data(params: ModelParams, profile: SyntheticProfile) -> _CnsProfileData:
    key = (id(profile), params)
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = _CnsProfileData(
            params, profile.grid, profile.fields["phi_omega"], profile.fields["w_omega"]
        )
    return _PROFILE_CACHE[key]


# ---------------------------------------------------------------------------
# Exact low-band version of the projected perturbation.


class LowBandCnsOperator:
    """``P_1 B[...]`` restricted to the low frequency band, evaluated exactly.

    Because the product of a band-limited state (indices ``|k| <= K``)
    with the profile only reaches band outputs through profile modes
    ``|q| <= 2K``, the operator is computed on a small workspace grid
    with ``N_w > 4K`` points per axis: pseudo-spectral products there are
    alias-free for the band-to-band coupling and therefore agree with
    the same operator evaluated on any finer grid.
    """

    def __init__(self, params: ModelParams, profile: SyntheticProfile, cutoff: CutoffSpec,
                 source_grid: Grid):
        if profile.kind != CNS_KIND:
            raise ValueError("profile is not a stationary-state surrogate")
        self.params = params
        self.cutoff = cutoff
        self.source_grid = source_grid
        chi = cutoff.chi1(source_grid)
        idx = source_grid.index_axes()
        k_max = 0
        for axis in range(source_grid.n):
            sl = np.moveaxis(chi > 0, axis, 0).reshape(len(idx[axis]), -1).any(axis=1)
            k_max = max(k_max, int(np.max(np.abs(idx[axis][sl]))))
        self.band_radius = k_max
        if min(source_grid.points_per_dim) <= 4 * k_max:
            raise ValueError("source grid too coarse for an alias-free band operator")
        n_w = 8
        while n_w <= 4 * k_max:
            n_w *= 2
        self.window = Grid(source_grid.n, source_grid.box_length, n_w)
        self.chi_window = cutoff.chi1(self.window)

        prof_fields = {
            name: Field.from_spectral(self.window, self._restrict(f.spectral))
            for name, f in profile.fields.items()
        }
        self.data = _CnsProfileData(
            params, self.window, prof_fields["phi_omega"], prof_fields["w_omega"]
        )

    def _restrict(self, coeffs: np.ndarray) -> np.ndarray:
        """Copy shared low modes from the source grid into the window."""
        src_idx = self.source_grid.index_axes()
        caps = [
            min(w // 2, s // 2)
            for w, s in zip(self.window.points_per_dim, self.source_grid.points_per_dim)
        ]
        keep = [np.where(np.abs(k) < cap)[0] for k, cap in zip(src_idx, caps)]
        kept_idx = [src_idx[j][keep[j]] for j in range(self.source_grid.n)]
        out = np.zeros((coeffs.shape[0],) + self.window.points_per_dim, dtype=complex)
        src_sel = np.ix_(np.arange(coeffs.shape[0]), *keep)
        dst_sel = np.ix_(
            np.arange(coeffs.shape[0]),
            *[np.mod(k, p) for k, p in zip(kept_idx, self.window.points_per_dim)],
        )
        out[dst_sel] = coeffs[src_sel]
        return out

    def restrict_state(self, field: Field) -> np.ndarray:
        """Band coefficients of a source-grid field on the window grid.

        The field must already be low-projected; coefficients outside
        the cutoff support are dropped.
        """
        return self._restrict(field.spectral) * (self.chi_window > 0.0)

    def prolong_state(self, coeffs: np.ndarray, grid: Grid) -> Field:
        """Embed window band coefficients back into a full grid field."""
        win_idx = self.window.index_axes()
        dst = np.zeros((coeffs.shape[0],) + grid.points_per_dim, dtype=complex)
        src_sel = np.ix_(np.arange(coeffs.shape[0]), *[np.arange(p) for p in self.window.points_per_dim])
        dst_sel = np.ix_(
            np.arange(coeffs.shape[0]), *[np.mod(k, p) for k, p in zip(win_idx, grid.points_per_dim)]
        )
        dst[dst_sel] = coeffs[src_sel]
        return Field.from_spectral(grid, dst, support_tag="low")

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Projected bilinear form on window-spectral band coefficients."""
        grid = self.window
        n = grid.n
        pc, wc = coeffs[0], coeffs[1:]

        def phys(c):
            return grid.backward(c).real

        phi = phys(pc)
        w = np.stack([phys(wc[j]) for j in range(n)])
        grad_phi = np.stack([phys(_spectral_derivative(grid, pc, j)) for j in range(n)])
        div_c = sum(_spectral_derivative(grid, wc[j], j) for j in range(n))
        div_w = phys(div_c)
        dw = np.stack(
            [np.stack([phys(_spectral_derivative(grid, wc[i], j)) for j in range(n)]) for i in range(n)]
        )
        mag2 = grid.xi_mag_sq()
        lap_w = np.stack([phys(-mag2 * wc[j]) for j in range(n)])
        grad_div_w = np.stack([phys(_spectral_derivative(grid, div_c, j)) for j in range(n)])
        out = cns_bilinear_physical(
            self.params, self.data, phi, w, grad_phi, div_w, dw, lap_w, grad_div_w
        )
        return grid.forward(out) * self.chi_window


# ---------------------------------------------------------------------------
# Damped-wave coefficient perturbation.


class DweOperatorData:
    """Physical coefficient arrays for ``u div b1 + b2 . grad u + b3 Lap u``."""

    def __init__(self, profile: SyntheticProfile):
        if profile.kind != DWE_KIND:
            raise ValueError("profile is not a damped-wave coefficient set")
        grid = profile.grid
        b1 = profile.fields["b1"].spectral
        self.div_b1 = grid.backward(
            sum(_spectral_derivative(grid, b1[j], j) for j in range(grid.n))
        ).real
        self.b2 = profile.fields["b2"].physical
        self.b3 = profile.fields["b3"].physical[0]
        self.grid = grid


def apply_dwe_perturbation(profile: SyntheticProfile, u: Field) -> Field:
    """Coefficient form applied to a scalar field."""
    data = _dwe_data(profile)
    grid = u.grid
    if grid != profile.grid:
        raise ValueError("state and profile grids differ")
    uc = u.spectral[0]
    grad_u = np.stack(
        [grid.backward(_spectral_derivative(grid, uc, j)).real for j in range(grid.n)]
    )
    lap_u = grid.backward(-grid.xi_mag_sq() * uc).real
    out = (
        u.physical[0] * data.div_b1
        + np.einsum("k...,k...->...", data.b2, grad_u)
        + data.b3 * lap_u
    )
    return Field.from_physical(grid, out[np.newaxis])


def _dwe_data(profile: SyntheticProfile) -> DweOperatorData:
    key = ("dwe", id(profile))
    if key not in _PROFILE_CACHE:
        _PROFILE_CACHE[key] = DweOperatorData(profile)
    return _PROFILE_CACHE[key]
