"""Periodic heat kernels: continuous, spatially semi-discrete and fully
discrete, plus their closed-form square integrals.

Everything is assembled from real cosine/sine expansions; no complex state
is kept anywhere.  The continuous kernel is evaluated through two dual
series (a Gaussian image sum for small times, a spectral sum for large
times) that overlap far below machine precision at the crossover.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SpectralBasis",
    "spectral_basis",
    "AmplificationFactors",
    "KernelEvalOptions",
    "StabilityViolation",
    "heat_kernel",
    "heat_kernel_square_integral",
    "semi_green",
    "semi_green_square_integral",
    "semi_green_grid",
    "full_green",
    "full_green_square_integral",
    "full_green_grid",
]


class StabilityViolation(RuntimeError):
    """Raised when a fully discrete kernel is requested for mode factors
    that are not uniformly contractive (|R1*R2| >= 1 for some mode j>=1)."""

    def __init__(self, mode: int, value: float):
        self.mode = mode
        self.value = value
        super().__init__(
            f"amplification |R1*R2| = {value:.6g} >= 1 at mode j={mode}; "
            "the step-size regime is inadmissible")


@dataclass(frozen=True)
class KernelEvalOptions:
    """Truncation choices for the continuous kernel.

    Defaults keep both truncation tails far below 1e-16 at the crossover
    t* = 0.05: the image tail exp(-(M-1)^2/(4 t*)) / sqrt(4 pi t*) needs
    M >= 4 and the spectral tail exp(-4 pi^2 J^2 t*) needs J >= 5; the
    defaults are deliberately generous.
    """

    image_terms: int = 6
    spectral_terms: int = 64
    crossover_time: float = 0.05


_DEFAULT_OPTS = KernelEvalOptions()


class SpectralBasis:
    """Eigenstructure of the periodic n-point second-difference operator.

    Eigenvalues lam_j = -4 n^2 sin^2(j pi / n); complex modes e_j(x) =
    exp(2 pi i j x) are handled through their real and imaginary parts
    (cos/sin) and their piecewise-linear grid interpolants.
    """

    def __init__(self, n: int):
        if n < 3:
            raise ValueError(f"spectral basis needs n >= 3, got {n}")
        self.n = int(n)
        j = np.arange(self.n)
        self.eigenvalues = -4.0 * n * n * np.sin(j * np.pi / n) ** 2
        self.eigenvalues[0] = 0.0

    # -- trigonometric modes -------------------------------------------------

    def phi_c(self, j, x):
        return np.cos(2.0 * np.pi * np.multiply.outer(np.asarray(j), np.asarray(x)))

    def phi_s(self, j, x):
        return np.sin(2.0 * np.pi * np.multiply.outer(np.asarray(j), np.asarray(x)))

    def _interp_weights(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        k = np.floor(n * x).astype(int)
        snap = (k + 1) / n == x
        k = np.where(snap, k + 1, k)
        frac = np.where(snap, 0.0, n * x - k)
        return k % n, (k + 1) % n, frac

    def phi_c_interp(self, j, x):
        """Piecewise-linear interpolant of cos(2 pi j .) between grid points."""
        k0, k1, w = self._interp_weights(x)
        j = np.asarray(j)
        c0 = np.cos(2.0 * np.pi * np.multiply.outer(j, k0) / self.n)
        c1 = np.cos(2.0 * np.pi * np.multiply.outer(j, k1) / self.n)
        return c0 + w * (c1 - c0)

    def phi_s_interp(self, j, x):
        k0, k1, w = self._interp_weights(x)
        j = np.asarray(j)
        s0 = np.sin(2.0 * np.pi * np.multiply.outer(j, k0) / self.n)
        s1 = np.sin(2.0 * np.pi * np.multiply.outer(j, k1) / self.n)
        return s0 + w * (s1 - s0)

    def mode_abs2_interp(self, x):
        """|e^n_j(x)|^2 for all modes j=0..n-1; equals 1 at grid points."""
        j = np.arange(self.n)
        return self.phi_c_interp(j, x) ** 2 + self.phi_s_interp(j, x) ** 2

    def grid_cell(self, y):
        y = np.asarray(y, dtype=float)
        k = np.floor(self.n * y).astype(int)
        k = np.where((k + 1) / self.n == y, k + 1, k)
        return k % self.n

    # -- kernel assembly helpers --------------------------------------------

    def assemble(self, coeff: np.ndarray, x, y):
        """sum_j coeff[j] e^n_j(x) conj(e_j)(kappa_n(y)), real form.

        coeff must be symmetric in j <-> n-j (it always is here: it is a
        function of the eigenvalue).  Uses the paired cosine/sine expansion;
        for even n the unpaired mode n/2 contributes coeff * cos-term only.
        """
        n = self.n
        xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        half = (n - 1) // 2
        j = np.arange(1, half + 1)
        ky = self.grid_cell(yb) / n
        out = coeff[0] * np.ones_like(xb)
        if half >= 1:
            cx = self.phi_c_interp(j, xb)
            sx = self.phi_s_interp(j, xb)
            cy = self.phi_c(j, ky)
            sy = self.phi_s(j, ky)
            out = out + 2.0 * np.tensordot(coeff[1:half + 1], cx * cy + sx * sy, axes=(0, 0))
        if n % 2 == 0:
            m = n // 2
            out = out + coeff[m] * self.phi_c_interp(np.array([m]), xb)[0] \
                * self.phi_c(np.array([m]), ky)[0]
        return out

    def grid_values(self, coeff: np.ndarray) -> np.ndarray:
        """Kernel values at grid points as a function of q-l (translation
        invariant there): g[d] = sum_j coeff[j] exp(2 pi i j d / n), real."""
        d = np.arange(self.n)
        ang = 2.0 * np.pi * np.outer(np.arange(self.n), d) / self.n
        return np.cos(ang).T @ coeff


@lru_cache(maxsize=128)
def _cached_basis(n: int) -> SpectralBasis:
    return SpectralBasis(n)


def spectral_basis(n: int) -> SpectralBasis:
    return _cached_basis(int(n))


class AmplificationFactors:
    """Per-mode one-step factors of the theta scheme.

    r1_j = (1 - theta tau lam_j)^-1, r2_j = 1 + (1-theta) tau lam_j,
    r3_j = (r1 r2)^-1 - 1 = -lam_j tau / (1 + (1-theta) tau lam_j).
    """

    def __init__(self, basis: SpectralBasis, tau: float, theta: float):
        if not tau > 0.0:
            raise ValueError("tau must be positive")
        self.basis = basis
        self.tau = float(tau)
        self.theta = float(theta)
        lam = basis.eigenvalues
        self.r1 = 1.0 / (1.0 - theta * tau * lam)
        self.r2 = 1.0 + (1.0 - theta) * tau * lam
        self.r12 = self.r1 * self.r2
        with np.errstate(divide="ignore"):
            self.r3 = np.where(self.r12 != 0.0, 1.0 / self.r12 - 1.0, np.inf)

    @property
    def n(self) -> int:
        return self.basis.n

    def contraction_margin(self) -> tuple[float, int]:
        """(epsilon, binding mode): max_{1<=j<=n/2} |r1 r2| = 1 - epsilon."""
        half = self.n // 2
        mags = np.abs(self.r12[1:half + 1])
        j = int(np.argmax(mags)) + 1
        return 1.0 - float(mags[j - 1]), j

    def require_stable(self):
        eps, j = self.contraction_margin()
        if eps <= 0.0:
            raise StabilityViolation(j, 1.0 - eps)

    def step_power(self, t: float) -> int:
        from .model import _floor_steps
        if t < 0.0:
            raise ValueError("time must be nonnegative")
        return _floor_steps(t, self.tau)


# ---------------------------------------------------------------------------
# continuous kernel
# ---------------------------------------------------------------------------

def _heat_kernel_image(t, d, terms: int):
    m = np.arange(-terms, terms + 1)
    z = np.subtract.outer(np.asarray(d, dtype=float), m.astype(float))
    return np.exp(-z * z / (4.0 * t)).sum(axis=-1) / math.sqrt(4.0 * math.pi * t)


def _heat_kernel_spectral(t, d, terms: int):
    j = np.arange(1, terms + 1)
    cos = np.cos(2.0 * np.pi * np.multiply.outer(np.asarray(d, dtype=float), j))
    return 1.0 + 2.0 * (cos * np.exp(-4.0 * np.pi ** 2 * j ** 2 * t)).sum(axis=-1)


def heat_kernel(t: float, x, y, opts: KernelEvalOptions = _DEFAULT_OPTS):
    """Continuous periodic heat kernel G(t,x,y)."""
    if not t > 0.0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if t < opts.crossover_time:
        out = _heat_kernel_image(t, d, opts.image_terms)
    else:
        out = _heat_kernel_spectral(t, d, opts.spectral_terms)
    return float(out) if np.ndim(out) == 0 else out


def heat_kernel_square_integral(t: float, opts: KernelEvalOptions = _DEFAULT_OPTS) -> float:
    """int_0^1 G(t,x,y)^2 dy = G(2t,x,x), independent of x."""
    if not t > 0.0:
        raise ValueError(f"square integral needs t > 0, got {t}")
    t2 = 2.0 * t
    if t2 < opts.crossover_time:
        m = np.arange(-opts.image_terms, opts.image_terms + 1)
        return float(np.exp(-m * m / (4.0 * t2)).sum() / math.sqrt(4.0 * math.pi * t2))
    j = np.arange(1, opts.spectral_terms + 1)
    return float(1.0 + 2.0 * np.exp(-4.0 * np.pi ** 2 * j ** 2 * t2).sum())


# ---------------------------------------------------------------------------
# semi-discrete kernel
# ---------------------------------------------------------------------------

def semi_green(t: float, x, y, basis: SpectralBasis):
    """Spatially semi-discrete Green function: piecewise linear in x,
    piecewise constant in y on grid cells."""
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    coeff = np.exp(basis.eigenvalues * t)
    out = basis.assemble(coeff, x, y)
    return float(out) if np.ndim(out) == 0 else out


def semi_green_square_integral(t: float, x, basis: SpectralBasis):
    """int_0^1 (G^n(t,x,y))^2 dy = sum_j e^{2 lam_j t} |e^n_j(x)|^2."""
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    coeff = np.exp(2.0 * basis.eigenvalues * t)
    out = np.tensordot(coeff, basis.mode_abs2_interp(x), axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def semi_green_grid(t: float, basis: SpectralBasis) -> np.ndarray:
    """Grid-point values as a vector over d = (q-l) mod n."""
    return basis.grid_values(np.exp(basis.eigenvalues * t))


# ---------------------------------------------------------------------------
# fully discrete kernels
# ---------------------------------------------------------------------------

def _full_coeff(t: float, which: str, factors: AmplificationFactors) -> np.ndarray:
    factors.require_stable()
    power = factors.step_power(t)
    coeff = factors.r12 ** power
    if which == "G2":
        coeff = coeff * factors.r1
    elif which != "G1":
        raise ValueError(f"unknown fully discrete kernel {which!r}")
    return coeff


def full_green(t: float, x, y, which: str, factors: AmplificationFactors,
               basis: SpectralBasis | None = None):
    """Fully discrete Green function G1 (propagator) or G2 (noise kernel);
    piecewise constant in t on [i tau, (i+1) tau)."""
    basis = basis or factors.basis
    out = basis.assemble(_full_coeff(t, which, factors), x, y)
    return float(out) if np.ndim(out) == 0 else out


def full_green_square_integral(t: float, x, factors: AmplificationFactors,
                               basis: SpectralBasis | None = None):
    """int_0^1 (G2(t,x,y))^2 dy = sum_j (r1 r2)_j^{2[t/tau]} r1_j^2 |e^n_j(x)|^2."""
    basis = basis or factors.basis
    factors.require_stable()
    power = factors.step_power(t)
    coeff = factors.r12 ** (2 * power) * factors.r1 ** 2
    out = np.tensordot(coeff, basis.mode_abs2_interp(x), axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def full_green_grid(t: float, which: str, factors: AmplificationFactors) -> np.ndarray:
    """Grid-point values of G1/G2 as a vector over d = (q-l) mod n."""
    return factors.basis.grid_values(_full_coeff(t, which, factors))
