"""Per-frequency symbol matrices, eigen-decompositions and propagators.

Two model systems share the same machinery:

* ``"cns"`` -- the linearized compressible Navier-Stokes system written in
  the variables (density, velocity).  Its Fourier symbol is an
  (n+1) x (n+1) matrix whose acoustic block produces the eigenvalue pair
  ``lambda_pm = -(alpha+beta)/2 |xi|^2 +- sqrt(...)`` and whose
  incompressible block decays with rate ``alpha |xi|^2``.
* ``"dwe"`` -- the strongly damped wave equation in first-order form
  (u, du/dt), a 2 x 2 symbol with eigenvalue pair
  ``lambda_pm = -(mu/2)|xi|^2 +- sqrt(mu^2|xi|^4 - 4 mu' |xi|^2)/2``.

All functions are pure; nothing here owns mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFrequency

#: |xi| (or |lambda_+ - lambda_-|) closer than this to a degenerate point
#: routes callers to the matrix-exponential oracle.
DEGENERACY_TOL = 1e-9

OSCILLATORY = "oscillatory"
CRITICAL = "critical"
REAL_SPLIT = "real-split"


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the linearized compressible system.

    ``alpha`` and ``beta`` are the shear/bulk viscosity combinations and
    ``gamma`` the sound speed; the eigenvalue crossover sits at
    ``|xi| = 2 gamma / (alpha + beta)``.
    """

    n: int
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def strong_viscosity(self) -> bool:
        """Regime needed by the resolvent-bound scans."""
        return self.alpha + self.beta >= 5.0 * self.gamma**2 and self.gamma >= 1.0

    @property
    def crossover(self) -> float:
        """|xi| at which the acoustic pair collides into a double root."""
        return 2.0 * self.gamma / (self.alpha + self.beta)


@dataclass(frozen=True)
class DweParams:
    """Coefficients (mu, mu') of the strongly damped wave equation."""

    n: int
    mu: float
    mu_prime: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")
        if self.mu <= 0 or self.mu_prime <= 0:
            raise ValueError("mu and mu_prime must be positive")

    @property
    def strong_damping(self) -> bool:
        return self.mu >= 5.0 * self.mu_prime and self.mu_prime >= 1.0

    @property
    def crossover(self) -> float:
        return 2.0 * math.sqrt(self.mu_prime) / self.mu


class FreqVector:
    """A single Fourier frequency ``xi in R^n`` with cached magnitude."""

    __slots__ = ("xi", "magnitude")

    def __init__(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.ndim != 1:
            raise ValueError("xi must be a 1-d vector")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "magnitude", float(np.linalg.norm(xi)))

    def __setattr__(self, name, value):
        raise AttributeError("FreqVector is immutable")

    def __repr__(self):
        return f"FreqVector({self.xi.tolist()})"


def _as_freq(xi) -> FreqVector:
    return xi if isinstance(xi, FreqVector) else FreqVector(xi)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of the negative symbol at one frequency.

    ``lambda1`` is the incompressible eigenvalue of the CNS symbol
    (absent for DWE).  ``discriminant`` is the radicand of the acoustic
    pair before the square root.
    """

    lambda_plus: complex
    lambda_minus: complex
    discriminant: complex
    regime: str
    lambda1: Optional[complex] = None

    def to_jsonable(self) -> dict:
        out = {
            "lambda_plus": [self.lambda_plus.real, self.lambda_plus.imag],
            "lambda_minus": [self.lambda_minus.real, self.lambda_minus.imag],
            "discriminant": [complex(self.discriminant).real, complex(self.discriminant).imag],
            "regime": self.regime,
        }
        if self.lambda1 is not None:
            out["lambda1"] = [self.lambda1.real, self.lambda1.imag]
        return out


@dataclass(frozen=True)
class Projections:
    """Eigenprojections of the CNS symbol at one frequency."""

    pi1: np.ndarray
    pi_plus: np.ndarray
    pi_minus: np.ndarray

    def to_jsonable(self) -> dict:
        def enc(m):
            return {"real": m.real.tolist(), "imag": m.imag.tolist()}

        return {"pi1": enc(self.pi1), "pi_plus": enc(self.pi_plus), "pi_minus": enc(self.pi_minus)}


def _pair_from_trace_det(trace: float, disc: float):
    """Roots of z^2 - trace*z + det given trace and discriminant trace^2-4det.

    The oscillatory branch is assembled from explicit real and imaginary
    parts so that Re lambda_pm equals trace/2 exactly (principal square
    root of a negative real number is purely imaginary).
    """
    if disc < 0.0:
        im = 0.5 * math.sqrt(-disc)
        lam_p = complex(0.5 * trace, im)
        lam_m = complex(0.5 * trace, -im)
    else:
        rt = 0.5 * math.sqrt(disc)
        lam_p = complex(0.5 * trace + rt, 0.0)
        lam_m = complex(0.5 * trace - rt, 0.0)
    return lam_p, lam_m


def cns_acoustic_pair(params: ModelParams, r):
    """Vectorized acoustic eigenvalues lambda_pm at magnitudes ``r``."""
    r = np.asarray(r, dtype=float)
    s = (params.alpha + params.beta) * r**2
    disc = s**2 - 4.0 * params.gamma**2 * r**2
    root = np.where(disc < 0, 1j * np.sqrt(np.maximum(-disc, 0.0)), np.sqrt(np.maximum(disc, 0.0)))
    lam_p = -0.5 * s + 0.5 * root
    lam_m = -0.5 * s - 0.5 * root
    return lam_p, lam_m


def dwe_pair(params: DweParams, r):
    """Vectorized DWE eigenvalues lambda_pm at magnitudes ``r``."""
    r = np.asarray(r, dtype=float)
    s = params.mu * r**2
    disc = s**2 - 4.0 * params.mu_prime * r**2
    root = np.where(disc < 0, 1j * np.sqrt(np.maximum(-disc, 0.0)), np.sqrt(np.maximum(disc, 0.0)))
    lam_p = -0.5 * s + 0.5 * root
    lam_m = -0.5 * s - 0.5 * root
    return lam_p, lam_m


def cns_symbol(params: ModelParams, xi) -> np.ndarray:
    """Fourier symbol of the CNS generator at one frequency.

    Block layout: zero scalar corner, ``i gamma xi^T`` top right,
    ``i gamma xi`` bottom left, ``alpha |xi|^2 I + beta xi xi^T`` bottom
    right.
    """
    xi = _as_freq(xi)
    n = params.n
    if xi.xi.shape != (n,):
        raise ValueError(f"xi must have length {n}")
    a = np.zeros((n + 1, n + 1), dtype=complex)
    v = xi.xi
    a[0, 1:] = 1j * params.gamma * v
    a[1:, 0] = 1j * params.gamma * v
    a[1:, 1:] = params.alpha * xi.magnitude**2 * np.eye(n) + params.beta * np.outer(v, v)
    return a


def dwe_symbol(params: DweParams, xi) -> np.ndarray:
    """Fourier symbol of the first-order damped-wave generator.

    The entries are fixed by the requirement that the eigenvalues of the
    negative symbol solve ``lambda^2 + mu |xi|^2 lambda + mu' |xi|^2 = 0``:
    row one encodes ``d/dt u = v`` (entry of magnitude one, top right) and
    row two carries ``mu' |xi|^2`` and ``mu |xi|^2``.
    """
    xi = _as_freq(xi)
    r2 = xi.magnitude**2
    return np.array([[0.0, -1.0], [params.mu_prime * r2, params.mu * r2]], dtype=complex)


def _regime(r: float, crossover: float) -> str:
    if abs(r - crossover) <= DEGENERACY_TOL:
        return CRITICAL
    return OSCILLATORY if r < crossover else REAL_SPLIT


def cns_eigensystem(params: ModelParams, xi):
    """Spectrum and eigenprojections of the negative CNS symbol.

    Raises
    ------
    DegenerateFrequency
        If ``|xi|`` is within tolerance of 0 or of the crossover, where
        the projection formulas divide by ``lambda_+ - lambda_-``.
    """
    xi = _as_freq(xi)
    r = xi.magnitude
    if r <= DEGENERACY_TOL or abs(r - params.crossover) <= DEGENERACY_TOL:
        raise DegenerateFrequency(
            f"|xi|={r!r} within {DEGENERACY_TOL} of a degenerate magnitude; "
            "use the matrix-exponential oracle instead"
        )
    n = params.n
    s = (params.alpha + params.beta) * r**2
    disc = s**2 - 4.0 * params.gamma**2 * r**2
    lam_p, lam_m = _pair_from_trace_det(-s, disc)
    lam1 = complex(-params.alpha * r**2, 0.0)
    spec = Spectrum(
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        discriminant=complex(disc),
        regime=_regime(r, params.crossover),
        lambda1=lam1,
    )

    v = xi.xi
    hat = np.outer(v, v) / r**2
    pi1 = np.zeros((n + 1, n + 1), dtype=complex)
    pi1[1:, 1:] = np.eye(n) - hat

    gap = lam_p - lam_m
    block = np.zeros((n + 1, n + 1), dtype=complex)
    block[0, 1:] = -1j * params.gamma * v
    block[1:, 0] = -1j * params.gamma * v
    pi_p = block.copy()
    pi_p[0, 0] = -lam_m
    pi_p[1:, 1:] = lam_p * hat
    pi_p /= gap
    pi_m = block.copy()
    pi_m[0, 0] = -lam_p
    pi_m[1:, 1:] = lam_m * hat
    pi_m /= -gap
    return spec, Projections(pi1=pi1, pi_plus=pi_p, pi_minus=pi_m)


def dwe_eigensystem(params: DweParams, xi) -> Spectrum:
    """Spectrum of the negative damped-wave symbol (no lambda1)."""
    xi = _as_freq(xi)
    r = xi.magnitude
    if r <= DEGENERACY_TOL or abs(r - params.crossover) <= DEGENERACY_TOL:
        raise DegenerateFrequency(
            f"|xi|={r!r} within {DEGENERACY_TOL} of a degenerate magnitude"
        )
    s = params.mu * r**2
    disc = s**2 - 4.0 * params.mu_prime * r**2
    lam_p, lam_m = _pair_from_trace_det(-s, disc)
    return Spectrum(
        lambda_plus=lam_p,
        lambda_minus=lam_m,
        discriminant=complex(disc),
        regime=_regime(r, params.crossover),
    )


# ---------------------------------------------------------------------------
# Matrix-exponential oracle: fixed-order Pade with scaling and squaring.
# Kept independent of the spectral path so the two can cross-check.

_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 4.25  # one notch below the standard 5.37 for extra margin


def matexp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of ``a`` (stacked ``(..., m, m)`` supported).

    Order-13 diagonal Pade approximant with scaling and squaring; the
    scaling power is chosen from the largest 1-norm in the batch.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape[-1] != a.shape[-2]:
        raise ValueError("matexp expects square matrices")
    m = a.shape[-1]
    norm1 = np.abs(a).sum(axis=-2).max(axis=-1)
    top = float(np.max(norm1)) if norm1.size else 0.0
    s = max(0, int(math.ceil(math.log2(top / _PADE13_THETA))) if top > _PADE13_THETA else 0)
    a = a / (2.0**s)

    b = _PADE13_B
    ident = np.broadcast_to(np.eye(m, dtype=complex), a.shape).copy()
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    )
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def propagator(system: str, params, xi, t: float) -> np.ndarray:
    """Matrix ``exp(-t A(xi))`` for the requested model system.

    Uses the spectral resolution (eigenvalues times eigenprojections) on
    oscillatory nondegenerate frequencies and the scaling-and-squaring
    oracle everywhere else; the two agree to 1e-10 where both apply.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    xi = _as_freq(xi)
    if system == "cns":
        symbol = cns_symbol(params, xi)
        build = cns_eigensystem
    elif system == "dwe":
        symbol = dwe_symbol(params, xi)
        build = dwe_eigensystem
    else:
        raise ValueError(f"unknown system {system!r}")

    r = xi.magnitude
    degenerate = r <= DEGENERACY_TOL or abs(r - params.crossover) <= DEGENERACY_TOL
    if degenerate or _regime(r, params.crossover) != OSCILLATORY:
        return matexp(-t * symbol)

    if system == "cns":
        spec, proj = build(params, xi)
        return (
            np.exp(spec.lambda1 * t) * proj.pi1
            + np.exp(spec.lambda_plus * t) * proj.pi_plus
            + np.exp(spec.lambda_minus * t) * proj.pi_minus
        )
    spec = build(params, xi)
    gap = spec.lambda_plus - spec.lambda_minus
    ident = np.eye(2, dtype=complex)
    pi_p = (-symbol - spec.lambda_minus * ident) / gap
    pi_m = (-symbol - spec.lambda_plus * ident) / (-gap)
    return np.exp(spec.lambda_plus * t) * pi_p + np.exp(spec.lambda_minus * t) * pi_m
