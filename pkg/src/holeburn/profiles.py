"""Normalized spectral line profiles and magnetic splitting arithmetic.

All frequencies are in MHz internally; the Zeeman splitting calculator is the
one place that reports GHz, since its outputs feed user-facing level-structure
arithmetic. Profiles are area-normalized densities (1/MHz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# Bohr magneton over Planck constant. 13.996 GHz/T == 13.996 MHz/mT.
MU_B_OVER_H_GHZ_PER_T = 13.996

LORENTZIAN = "lorentzian"
GAUSSIAN = "gaussian"
PSEUDO_VOIGT = "pseudo_voigt"
PROFILE_KINDS = (LORENTZIAN, GAUSSIAN, PSEUDO_VOIGT)

_SIGMA_PER_FWHM = 1.0 / np.sqrt(8.0 * np.log(2.0))


@dataclass(frozen=True)
class LineProfile:
    """Area-normalized line profile: Lorentzian, Gaussian, or a linear mix.

    ``mix`` is the Gaussian fraction of the pseudo-Voigt sum and is ignored
    for the pure kinds. ``fwhm_mhz`` must be positive.
    """

    kind: str
    fwhm_mhz: float
    mix: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ParameterError(f"unknown profile kind {self.kind!r}")
        if not (self.fwhm_mhz > 0.0):
            raise ParameterError(f"profile fwhm must be > 0, got {self.fwhm_mhz}")
        if self.kind == PSEUDO_VOIGT and not (0.0 <= self.mix <= 1.0):
            raise ParameterError(f"pseudo-Voigt mix must be in [0, 1], got {self.mix}")


def lorentzian_density(detuning_mhz, fwhm_mhz):
    """Unit-area Lorentzian, (G/2pi) / (f^2 + (G/2)^2)."""
    f = np.asarray(detuning_mhz, dtype=float)
    half = 0.5 * fwhm_mhz
    return (fwhm_mhz / (2.0 * np.pi)) / (f * f + half * half)


def gaussian_density(detuning_mhz, fwhm_mhz):
    """Unit-area Gaussian parameterized by FWHM (sigma = FWHM/sqrt(8 ln 2))."""
    f = np.asarray(detuning_mhz, dtype=float)
    sigma = fwhm_mhz * _SIGMA_PER_FWHM
    return np.exp(-0.5 * (f / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))


def profile_value(profile: LineProfile, detuning_mhz):
    """Evaluate the area-normalized density of ``profile`` at a detuning (MHz).

    Accepts scalars or arrays; returns 1/MHz. The pseudo-Voigt is the linear
    sum mix*Gaussian + (1-mix)*Lorentzian of two unit-area profiles sharing
    one FWHM, so its own area is 1 as well.
    """
    if profile.kind == LORENTZIAN:
        return lorentzian_density(detuning_mhz, profile.fwhm_mhz)
    if profile.kind == GAUSSIAN:
        return gaussian_density(detuning_mhz, profile.fwhm_mhz)
    return profile.mix * gaussian_density(detuning_mhz, profile.fwhm_mhz) + (
        1.0 - profile.mix
    ) * lorentzian_density(detuning_mhz, profile.fwhm_mhz)


def drive_lorentzian(detuning_mhz, fwhm_mhz):
    """Peak-normalized Lorentzian drive factor, equal to 1 at zero detuning.

    This is the dimensionless coupling applied to a laser's peak driving
    rate; it differs from :func:`lorentzian_density` only by the constant
    pi*fwhm/2, which is absorbed into the experimentally calibrated
    saturation power.
    """
    f = np.asarray(detuning_mhz, dtype=float)
    half = 0.5 * fwhm_mhz
    h2 = half * half
    return h2 / (f * f + h2)


@dataclass(frozen=True)
class ZeemanConfig:
    """Electron/hole g-factors and a static magnetic field (mT)."""

    g_e: float
    g_h: float
    field_mt: float
    mu_b_over_h_ghz_per_t: float = MU_B_OVER_H_GHZ_PER_T

    def __post_init__(self):
        if self.field_mt < 0.0:
            raise ParameterError(f"field must be >= 0, got {self.field_mt} mT")
        if self.g_e <= 0.0 or self.g_h <= 0.0:
            raise ParameterError("g-factors must be positive")


@dataclass(frozen=True)
class ZeemanSplittings:
    """Ground/excited splittings and the derived cross-transition detunings (GHz)."""

    delta_g_ghz: float
    delta_e_ghz: float
    delta_bc_ghz: float
    delta_ad_ghz: float


def zeeman_splittings(z: ZeemanConfig) -> ZeemanSplittings:
    """Level splittings for a ground/excited doublet pair in a field.

    delta_g = g_e * mu_B/h * B and delta_e = g_h * mu_B/h * B, both linear in
    B. The inner (BC) and outer (AD) pump-probe detunings follow as
    |delta_e - delta_g| and delta_e + delta_g.
    """
    mhz_per_mt = z.mu_b_over_h_ghz_per_t  # GHz/T == MHz/mT
    dg = z.g_e * mhz_per_mt * z.field_mt / 1e3
    de = z.g_h * mhz_per_mt * z.field_mt / 1e3
    return ZeemanSplittings(
        delta_g_ghz=dg,
        delta_e_ghz=de,
        delta_bc_ghz=abs(de - dg),
        delta_ad_ghz=de + dg,
    )
