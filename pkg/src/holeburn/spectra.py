"""Hole-burning spectrum synthesis: inhomogeneous integration and averaging."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, ParameterError
from .profiles import LineProfile, profile_value
from .rates import DriveField, LevelScheme, excited_steady_batch


@dataclass
class SpectrumScan:
    """A measured or simulated spectrum on a strictly increasing detuning grid."""

    detuning_mhz: np.ndarray
    signal: np.ndarray
    sigma: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.detuning_mhz = np.asarray(self.detuning_mhz, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
        if self.detuning_mhz.ndim != 1 or self.detuning_mhz.size < 2:
            raise ParameterError("scan grid must be a 1-D array with at least two points")
        if self.signal.shape != self.detuning_mhz.shape:
            raise ParameterError("signal and detuning grids differ in shape")
        if self.sigma is not None and self.sigma.shape != self.signal.shape:
            raise ParameterError("sigma and signal differ in shape")
        if not np.all(np.diff(self.detuning_mhz) > 0.0):
            raise ParameterError("detuning grid must be strictly increasing")
        if not np.isfinite(self.signal).all():
            raise ParameterError("signal contains non-finite values")

    def __len__(self):
        return self.detuning_mhz.size


@dataclass(frozen=True)
class InhomogeneousModel:
    """Static ensemble line: a pseudo-Voigt (or pure) profile about a centre."""

    profile: LineProfile
    centre_mhz: float = 0.0

    @property
    def fwhm_mhz(self):
        return self.profile.fwhm_mhz


@dataclass(frozen=True)
class IntegrationSettings:
    """Fixed-grid trapezoidal integration over the inhomogeneous line.

    The grid spans ``span_fwhm`` inhomogeneous widths either side of the line
    centre. With ``refine`` on, the point count is doubled until the spectrum
    changes by less than ``rel_tol`` (relative to its largest value) or
    ``max_doublings`` is exhausted, which raises IntegrationError. The
    integrand contains homogeneously narrow dips, so a dense uniform grid is
    used in preference to adaptive quadrature.
    """

    span_fwhm: float = 5.0
    points: int = 2001
    rel_tol: float = 1e-4
    max_doublings: int = 6
    refine: bool = True

    def __post_init__(self):
        if self.points < 3:
            raise ParameterError("integration needs at least 3 points")
        if self.span_fwhm <= 0.0 or self.rel_tol <= 0.0:
            raise ParameterError("integration span and tolerance must be positive")


DEFAULT_INTEGRATION = IntegrationSettings()


def _spectrum_with_span(scheme, pump, probe_power, probe_detunings, inhom, n_points, half_span):
    fi = np.linspace(inhom.centre_mhz - half_span, inhom.centre_mhz + half_span, n_points)
    weight = profile_value(inhom.profile, fi - inhom.centre_mhz)
    pops = excited_steady_batch(scheme, pump, probe_detunings, probe_power, fi)
    return np.trapezoid(pops * weight[None, :], fi, axis=1)


def hole_spectrum(
    scheme: LevelScheme,
    pump: DriveField,
    probe_power,
    probe_detunings,
    inhom: InhomogeneousModel,
    integration: IntegrationSettings = DEFAULT_INTEGRATION,
) -> SpectrumScan:
    """Pump-probe spectrum: steady excited population integrated over the line.

    For every probe detuning the excited-manifold steady-state population is
    integrated over the inhomogeneous ensemble, weighted by the line profile.
    The signal is in population units; experimental scale and offset are fit
    parameters, not engine outputs.
    """
    grid = np.asarray(probe_detunings, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.diff(grid) > 0.0):
        raise ParameterError("probe grid must be 1-D and strictly increasing")
    if probe_power < 0.0:
        raise ParameterError("probe power must be >= 0")

    half_span = inhom.fwhm_mhz * integration.span_fwhm
    n = integration.points
    signal = _spectrum_with_span(scheme, pump, probe_power, grid, inhom, n, half_span)
    if integration.refine:
        achieved = np.inf
        for _ in range(integration.max_doublings):
            n = 2 * n - 1
            refined = _spectrum_with_span(scheme, pump, probe_power, grid, inhom, n, half_span)
            achieved = float(np.max(np.abs(refined - signal)) / max(np.max(np.abs(refined)), 1e-300))
            signal = refined
            if achieved < integration.rel_tol:
                break
        else:
            raise IntegrationError(
                f"inhomogeneous integral not converged: reached {achieved:.2e} "
                f"(target {integration.rel_tol:.2e}) at {n} points",
                achieved=achieved,
            )
    meta = {
        "pump_detuning_MHz": pump.detuning_mhz,
        "pump_power": pump.power,
        "probe_power": float(probe_power),
        "inhom_fwhm_MHz": inhom.fwhm_mhz,
        "integration_points": n,
    }
    return SpectrumScan(grid, signal, meta=meta)


def average_scans(scans, weights) -> SpectrumScan:
    """Weighted mean of spectra sharing one grid; grids must match exactly."""
    if len(scans) != len(weights) or not scans:
        raise ParameterError("need equal non-zero numbers of scans and weights")
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0.0):
        raise ParameterError("weights must be positive")
    grid = scans[0].detuning_mhz
    for s in scans[1:]:
        if s.detuning_mhz.shape != grid.shape or not np.array_equal(s.detuning_mhz, grid):
            raise ParameterError("scan grids do not match")
    stacked = np.stack([s.signal for s in scans])
    signal = (w[:, None] * stacked).sum(axis=0) / w.sum()
    return SpectrumScan(grid.copy(), signal, meta=dict(scans[0].meta))


def orientation_average(
    weighted_schemes,
    pump: DriveField,
    probe_power,
    probe_detunings,
    inhom: InhomogeneousModel,
    integration: IntegrationSettings = DEFAULT_INTEGRATION,
) -> SpectrumScan:
    """Average hole spectra of several orientation subsets.

    ``weighted_schemes`` is a list of (LevelScheme, weight); the weights are
    the orientation-subset multiplicities.
    """
    scans = [
        hole_spectrum(s, pump, probe_power, probe_detunings, inhom, integration)
        for s, _ in weighted_schemes
    ]
    return average_scans(scans, [w for _, w in weighted_schemes])


def subtract_baseline(scan: SpectrumScan, baseline: SpectrumScan) -> SpectrumScan:
    """Pump-induced part of a scan: subtract a probe-only baseline scan."""
    if not np.array_equal(scan.detuning_mhz, baseline.detuning_mhz):
        raise ParameterError("baseline grid does not match the scan grid")
    return SpectrumScan(
        scan.detuning_mhz.copy(),
        scan.signal - baseline.signal,
        sigma=None if scan.sigma is None else scan.sigma.copy(),
        meta=dict(scan.meta),
    )
