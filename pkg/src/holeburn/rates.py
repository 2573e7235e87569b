"""Multi-level optical-pumping rate equations: schemes, steady state, dynamics.

Level ordering convention: ground levels first, then excited levels, each in
the order given by the scheme. Rates are populations per microsecond, laser
powers are in saturation units (power 1 drives at W_sat = 1/(2 tau_exc) on
resonance), and all frequencies are MHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StiffnessError
from .profiles import ZeemanConfig, drive_lorentzian, zeeman_splittings

PUMP = "pump"
PROBE = "probe"


@dataclass(frozen=True)
class DriveField:
    """One laser: detuning from the ensemble line centre and power in P_sat units."""

    detuning_mhz: float
    power: float
    role: str = PUMP

    def __post_init__(self):
        if self.power < 0.0:
            raise ParameterError(f"drive power must be >= 0, got {self.power}")
        if self.role not in (PUMP, PROBE):
            raise ParameterError(f"drive role must be 'pump' or 'probe', got {self.role!r}")


@dataclass(frozen=True)
class LevelScheme:
    """An N-level emitter with optically coupled ground/excited manifolds.

    ``transitions`` lists (ground index, excited index) pairs that are both
    optically driven and used as spontaneous-decay branches. Decay from each
    excited level splits over its connected ground levels in proportion to
    their degeneracies and sums to ``decay_rate_per_us``. Stimulated rates
    obey W_ij = (n_j / n_i) W_ji.
    """

    ground_offsets_mhz: tuple
    ground_degeneracies: tuple
    excited_offsets_mhz: tuple
    excited_degeneracies: tuple
    transitions: tuple
    decay_rate_per_us: float
    homogeneous_fwhm_mhz: float

    def __post_init__(self):
        if len(self.ground_offsets_mhz) != len(self.ground_degeneracies):
            raise ParameterError("ground offsets and degeneracies differ in length")
        if len(self.excited_offsets_mhz) != len(self.excited_degeneracies):
            raise ParameterError("excited offsets and degeneracies differ in length")
        for n in (*self.ground_degeneracies, *self.excited_degeneracies):
            if not (n > 0):
                raise ParameterError("degeneracies must be positive")
        for gi, ei in self.transitions:
            if not (0 <= gi < self.n_ground and 0 <= ei < self.n_excited):
                raise ParameterError(f"transition ({gi}, {ei}) does not connect a ground and an excited level")
        if not (self.decay_rate_per_us > 0.0):
            raise ParameterError("total decay rate must be > 0")
        if not (self.homogeneous_fwhm_mhz > 0.0):
            raise ParameterError("homogeneous fwhm must be > 0")

    @property
    def n_ground(self):
        return len(self.ground_offsets_mhz)

    @property
    def n_excited(self):
        return len(self.excited_offsets_mhz)

    @property
    def n_levels(self):
        return self.n_ground + self.n_excited

    @property
    def tau_exc_us(self):
        return 1.0 / self.decay_rate_per_us

    @property
    def w_sat_per_us(self):
        """Saturation rate, half the spontaneous rate."""
        return 0.5 * self.decay_rate_per_us

    def transition_offset_mhz(self, gi, ei):
        """Transition frequency relative to the sub-ensemble line centre."""
        return self.excited_offsets_mhz[ei] - self.ground_offsets_mhz[gi]

    def excited_indices(self):
        return range(self.n_ground, self.n_levels)

    def decay_branches(self):
        """(ground, excited, rate) spontaneous-decay triples."""
        out = []
        for ei in range(self.n_excited):
            grounds = [gi for gi, ej in self.transitions if ej == ei]
            ntot = sum(self.ground_degeneracies[gi] for gi in grounds)
            for gi in grounds:
                rate = self.decay_rate_per_us * self.ground_degeneracies[gi] / ntot
                out.append((gi, ei, rate))
        return out


@dataclass
class Populations:
    """Level occupations; closed system, so they sum to one."""

    values: np.ndarray
    equilibrium_fallback: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def validate(self, atol_negative=1e-10, atol_sum=1e-9):
        if np.any(self.values < -atol_negative):
            raise ParameterError(f"negative population: min {self.values.min():.3e}")
        total = float(self.values.sum())
        if abs(total - 1.0) > atol_sum:
            raise ParameterError(f"populations sum to {total}, not 1")
        return self


def build_three_level(degeneracies, zero_field_splitting_mhz, homogeneous_fwhm_mhz, tau_exc_us):
    """Two ground levels split about zero sharing one excited level.

    The first ground level sits at -splitting/2 (lower in energy, so its
    transition is the higher-frequency one) and the second at +splitting/2.
    No direct ground-ground relaxation is included; spin relaxation is far
    slower than the optical pumping cycle.
    """
    n1, n2, n3 = degeneracies
    if zero_field_splitting_mhz < 0.0:
        raise ParameterError("splitting must be >= 0")
    if not (tau_exc_us > 0.0):
        raise ParameterError("excited-state lifetime must be > 0")
    half = 0.5 * zero_field_splitting_mhz
    return LevelScheme(
        ground_offsets_mhz=(-half, +half),
        ground_degeneracies=(n1, n3),
        excited_offsets_mhz=(0.0,),
        excited_degeneracies=(n2,),
        transitions=((0, 0), (1, 0)),
        decay_rate_per_us=1.0 / tau_exc_us,
        homogeneous_fwhm_mhz=homogeneous_fwhm_mhz,
    )


def build_four_level(zeeman: ZeemanConfig, homogeneous_fwhm_mhz, tau_exc_us):
    """Ground and excited doublets with all four spin-selective transitions.

    Degeneracies are all equal, so every decay branch carries the same rate
    1/(2 tau_exc) and up/down stimulated rates coincide.
    """
    if not (tau_exc_us > 0.0):
        raise ParameterError("excited-state lifetime must be > 0")
    s = zeeman_splittings(zeeman)
    dg = s.delta_g_ghz * 1e3  # GHz -> MHz at this boundary
    de = s.delta_e_ghz * 1e3
    return LevelScheme(
        ground_offsets_mhz=(-0.5 * dg, +0.5 * dg),
        ground_degeneracies=(1, 1),
        excited_offsets_mhz=(-0.5 * de, +0.5 * de),
        excited_degeneracies=(1, 1),
        transitions=((0, 0), (0, 1), (1, 0), (1, 1)),
        decay_rate_per_us=1.0 / tau_exc_us,
        homogeneous_fwhm_mhz=homogeneous_fwhm_mhz,
    )


def upward_rates(scheme: LevelScheme, drives, f_inhom_mhz=0.0):
    """Peak-calibrated stimulated rates per transition, Lorentzian-weighted.

    For each transition the contribution of every drive is
    power * W_sat * L(f_drive - f_inhom - f_transition), with L the
    peak-normalized Lorentzian of the homogeneous linewidth. ``f_inhom_mhz``
    may be an array; the result then has one row per transition and trailing
    axes matching it.
    """
    fi = np.asarray(f_inhom_mhz, dtype=float)
    out = np.zeros((len(scheme.transitions),) + fi.shape)
    wsat = scheme.w_sat_per_us
    for k, (gi, ei) in enumerate(scheme.transitions):
        t = scheme.transition_offset_mhz(gi, ei)
        for d in drives:
            out[k] += d.power * wsat * drive_lorentzian(
                d.detuning_mhz - fi - t, scheme.homogeneous_fwhm_mhz
            )
    return out


def rate_matrix(scheme: LevelScheme, drives, f_inhom_mhz=0.0):
    """Rate matrix M with dN/dt = M N (columns sum to zero)."""
    n = scheme.n_levels
    ng = scheme.n_ground
    M = np.zeros((n, n))
    wup = upward_rates(scheme, drives, f_inhom_mhz)
    if wup.ndim != 1:
        raise ParameterError("rate_matrix expects a scalar inhomogeneous detuning")
    for k, (gi, ei) in enumerate(scheme.transitions):
        g, e = gi, ng + ei
        up = wup[k]
        down = up * scheme.ground_degeneracies[gi] / scheme.excited_degeneracies[ei]
        M[e, g] += up
        M[g, g] -= up
        M[g, e] += down
        M[e, e] -= down
    for gi, ei, rate in scheme.decay_branches():
        g, e = gi, ng + ei
        M[g, e] += rate
        M[e, e] -= rate
    return M


def thermal_ground_state(scheme: LevelScheme) -> Populations:
    """Degeneracy-weighted population over the ground manifold, excited empty."""
    n = np.zeros(scheme.n_levels)
    degs = np.asarray(scheme.ground_degeneracies, dtype=float)
    n[: scheme.n_ground] = degs / degs.sum()
    return Populations(n)


def steady_state(scheme: LevelScheme, drives, f_inhom_mhz=0.0) -> Populations:
    """Solve dN/dt = 0 with closure sum(N) = 1 by a linear solve.

    If the drives leave the system singular (e.g. all rates zero, so any
    ground distribution is stationary) the degeneracy-weighted thermal
    distribution is returned with ``equilibrium_fallback`` set.
    """
    if not drives:
        raise ParameterError("steady_state requires at least one drive")
    M = rate_matrix(scheme, drives, f_inhom_mhz)
    scale = np.abs(M).max()
    if scale == 0.0:
        return thermal_ground_state(scheme)
    A = M / scale
    A[-1, :] = 1.0
    b = np.zeros(scheme.n_levels)
    b[-1] = 1.0
    try:
        n = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return thermal_ground_state(scheme)
    residual = np.abs(M @ n).max() / scale
    if not np.isfinite(n).all() or residual > 1e-9:
        return thermal_ground_state(scheme)
    return Populations(n)


def _rk4_step_matrix(M, h):
    """One-step propagator of the classic fourth-order method for dN/dt = M N."""
    n = M.shape[0]
    hM = h * M
    phi = np.eye(n) + hM
    term = hM
    for k in (2.0, 3.0, 4.0):
        term = term @ hM / k
        phi = phi + term
    return phi


def time_evolve(
    scheme: LevelScheme,
    drives,
    init: Populations,
    t_us,
    max_rate_per_us=1e9,
    checkpoints=32,
) -> Populations:
    """Integrate the rate equations over ``t_us`` with fixed-step RK4.

    The step is capped at 0.01 / max(decay rate, peak drive rate). Because
    the drives are constant the one-step operator is a fixed matrix, applied
    via exact repeated squaring between conservation checkpoints; the result
    is identical to sequential stepping. Population is verified to stay
    normalized to 1e-8 at every checkpoint.
    """
    if t_us < 0.0:
        raise ParameterError("evolution time must be >= 0")
    n0 = np.asarray(init.values, dtype=float)
    if t_us == 0.0:
        return Populations(n0.copy())
    wup = upward_rates(scheme, drives)
    wmax = float(wup.max()) if wup.size else 0.0
    rmax = max(scheme.decay_rate_per_us, wmax)
    if rmax > max_rate_per_us:
        raise StiffnessError(
            f"rates up to {rmax:.3e}/us exceed the {max_rate_per_us:.1e}/us fixed-step limit"
        )
    h_cap = 0.01 / rmax
    n_steps = max(1, int(np.ceil(t_us / h_cap)))
    h = t_us / n_steps
    phi = _rk4_step_matrix(rate_matrix(scheme, drives), h)

    blocks = _split_steps(n_steps, checkpoints)
    n = n0
    for k in blocks:
        n = np.linalg.matrix_power(phi, k) @ n
        drift = abs(float(n.sum()) - 1.0)
        if drift > 1e-8:
            raise StiffnessError(f"population drifted by {drift:.2e} during evolution")
    return Populations(n)


def _split_steps(n_steps, checkpoints):
    """Partition n_steps into at most `checkpoints` contiguous blocks."""
    k = min(max(1, checkpoints), n_steps)
    base, extra = divmod(n_steps, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def excited_population(scheme: LevelScheme, pops: Populations):
    """Total occupation of the excited manifold (the optical signal)."""
    return float(np.sum(pops.values[scheme.n_ground :]))


def is_canonical_three_level(scheme: LevelScheme):
    return (
        scheme.n_ground == 2
        and scheme.n_excited == 1
        and set(scheme.transitions) == {(0, 0), (1, 0)}
    )


def is_canonical_four_level(scheme: LevelScheme):
    return (
        scheme.n_ground == 2
        and scheme.n_excited == 2
        and set(scheme.transitions) == {(0, 0), (0, 1), (1, 0), (1, 1)}
        and len(set(scheme.ground_degeneracies) | set(scheme.excited_degeneracies)) == 1
    )


def excited_steady_batch(scheme: LevelScheme, pump: DriveField, probe_detunings, probe_power, f_inhom):
    """Excited-manifold steady population on a (probe, inhom) grid.

    ``probe_detunings`` (P,) and ``f_inhom`` (K,) produce a (P, K) array of
    the total excited-state population. Canonical two-ground schemes use the
    closed-form solutions of the rate equations; anything else falls back to
    a batched linear solve. Both paths agree with :func:`steady_state`.
    """
    fp = np.asarray(probe_detunings, dtype=float)[:, None]
    fi = np.asarray(f_inhom, dtype=float)[None, :]
    wsat = scheme.w_sat_per_us
    fwhm = scheme.homogeneous_fwhm_mhz

    def wdrive(gi, ei):
        t = scheme.transition_offset_mhz(gi, ei)
        return pump.power * wsat * drive_lorentzian(pump.detuning_mhz - fi - t, fwhm) + (
            probe_power * wsat * drive_lorentzian(fp - fi - t, fwhm)
        )

    if is_canonical_three_level(scheme):
        n1, n3 = scheme.ground_degeneracies
        n2 = scheme.excited_degeneracies[0]
        w = scheme.decay_rate_per_us
        w1 = n1 / (n1 + n3) * w
        w3 = n3 / (n1 + n3) * w
        w12 = wdrive(0, 0)
        w32 = wdrive(1, 0)
        w21 = (n1 / n2) * w12
        w23 = (n3 / n2) * w32
        num = w12 * w32
        den = num + w12 * (w23 + w3) + w32 * (w21 + w1)
        return _safe_ratio(num, den)

    if is_canonical_four_level(scheme):
        wb = 0.5 * scheme.decay_rate_per_us
        w12 = wdrive(0, 0)
        w14 = wdrive(0, 1)
        w32 = wdrive(1, 0)
        w34 = wdrive(1, 1)
        num = (
            w12 * w14 * w32
            + w12 * w14 * w34
            + w12 * w32 * w34
            + w14 * w32 * w34
            + (w12 * w34 + w14 * w32 + w12 * w32 + w14 * w34) * wb
        )
        den = (
            2.0 * (w12 * w14 * w32 + w12 * w14 * w34 + w12 * w32 * w34 + w14 * w32 * w34)
            + (w12 * w14 + 3.0 * w12 * w32 + 2.0 * w12 * w34 + 2.0 * w14 * w32 + 3.0 * w14 * w34 + w32 * w34) * wb
            + (w12 + w14 + w32 + w34) * wb * wb
        )
        return _safe_ratio(num, den)

    return _excited_steady_solve(scheme, pump, fp, probe_power, fi)


def _safe_ratio(num, den):
    ok = den > 0.0
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def _excited_steady_solve(scheme, pump, fp, probe_power, fi, chunk=65536):
    """Generic batched steady-state solve over a broadcast (probe, inhom) grid."""
    shape = np.broadcast_shapes(fp.shape, fi.shape)
    fp_b = np.broadcast_to(fp, shape).ravel()
    fi_b = np.broadcast_to(fi, shape).ravel()
    n = scheme.n_levels
    ng = scheme.n_ground
    wsat = scheme.w_sat_per_us
    fwhm = scheme.homogeneous_fwhm_mhz
    out = np.empty(fp_b.size)
    b = np.zeros(n)
    b[-1] = 1.0
    for lo in range(0, fp_b.size, chunk):
        hi = min(lo + chunk, fp_b.size)
        m = hi - lo
        M = np.zeros((m, n, n))
        for gi, ei in scheme.transitions:
            t = scheme.transition_offset_mhz(gi, ei)
            up = pump.power * wsat * drive_lorentzian(pump.detuning_mhz - fi_b[lo:hi] - t, fwhm)
            up = up + probe_power * wsat * drive_lorentzian(fp_b[lo:hi] - fi_b[lo:hi] - t, fwhm)
            down = up * scheme.ground_degeneracies[gi] / scheme.excited_degeneracies[ei]
            g, e = gi, ng + ei
            M[:, e, g] += up
            M[:, g, g] -= up
            M[:, g, e] += down
            M[:, e, e] -= down
        for gi, ei, rate in scheme.decay_branches():
            g, e = gi, ng + ei
            M[:, g, e] += rate
            M[:, e, e] -= rate
        M[:, -1, :] = 1.0
        sol = np.linalg.solve(M, np.broadcast_to(b, (m, n)))
        out[lo:hi] = sol[:, ng:].sum(axis=1)
    return out.reshape(shape)
