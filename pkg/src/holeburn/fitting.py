"""Damped least-squares engine with shared/local parameters across datasets.

The minimizer is a damped Gauss-Newton (Levenberg-style multiplicative
damping on the normal equations) with a forward-difference Jacobian. It is
deterministic: fixed damping schedule (lambda starts at 1e-3, x10 on a
rejected step, /10 on an accepted one), fixed reduction order, no
randomness, so identical inputs give identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ParameterError, RankDeficiencyError

SHARED = "shared"
LOCAL = "local"
FIXED = "fixed"

_JAC_REL_STEP = 1e-6
_LAMBDA0 = 1e-3
_CHI2_RTOL = 1e-10
_STEP_TOL = 1e-12
_COND_LIMIT = 1e12


@dataclass
class Parameter:
    """One model parameter: value, box bounds, and its sharing role.

    ``role`` is 'shared' (one value across all datasets), 'local' (applies to
    ``dataset`` only), or 'fixed' (held at ``value``).
    """

    name: str
    value: float
    lo: float = -math.inf
    hi: float = math.inf
    role: str = SHARED
    dataset: int | None = None

    def __post_init__(self):
        if self.role not in (SHARED, LOCAL, FIXED):
            raise ParameterError(f"unknown parameter role {self.role!r}")
        if self.role == LOCAL and self.dataset is None:
            raise ParameterError(f"local parameter {self.name!r} needs a dataset index")
        if not (self.lo <= self.value <= self.hi):
            raise ParameterError(
                f"parameter {self.name!r} value {self.value} outside bounds [{self.lo}, {self.hi}]"
            )

    @property
    def key(self):
        return self.name if self.role != LOCAL else f"{self.name}[{self.dataset}]"


def local_parameters(name, value, n_datasets, lo=-math.inf, hi=math.inf):
    """One local Parameter per dataset, all starting from the same value."""
    return [Parameter(name, value, lo, hi, role=LOCAL, dataset=k) for k in range(n_datasets)]


@dataclass
class FitResult:
    """Fitted values with 1-sigma uncertainties and per-dataset residuals."""

    values: dict
    sigmas: dict | None
    chi2: float
    red_chi2: float
    n_data: int
    n_free: int
    converged: bool
    n_iter: int
    residuals: list = field(default_factory=list)
    covariance: np.ndarray | None = None
    free_names: tuple = ()
    message: str = ""


def _as_xy(data):
    """Accept a SpectrumScan-like object or an (x, y[, sigma]) tuple."""
    if hasattr(data, "detuning_mhz") and hasattr(data, "signal"):
        return (
            np.asarray(data.detuning_mhz, dtype=float),
            np.asarray(data.signal, dtype=float),
            None if data.sigma is None else np.asarray(data.sigma, dtype=float),
        )
    if len(data) == 2:
        x, y = data
        sigma = None
    else:
        x, y, sigma = data
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0.0):
            raise ParameterError("sigma values must be positive")
    if x.size == 0:
        raise ParameterError("dataset is empty")
    return x, y, sigma


class _Problem:
    """Flattens shared/local/fixed parameters onto a free vector and evaluates
    weighted residual blocks per dataset."""

    def __init__(self, model, datasets, params):
        self.model = model
        self.data = [_as_xy(d) for d in datasets]
        self.n_sets = len(self.data)
        names = set()
        for p in params:
            if p.key in names:
                raise ParameterError(f"duplicate parameter {p.key!r}")
            names.add(p.key)
            if p.role == LOCAL and not (0 <= p.dataset < self.n_sets):
                raise ParameterError(
                    f"local parameter {p.name!r} references dataset {p.dataset}, "
                    f"but only {self.n_sets} datasets given"
                )
        self.params = list(params)
        self.free = [p for p in self.params if p.role != FIXED]
        if not self.free:
            raise ParameterError("no free parameters")
        self.block_sizes = [d[0].size for d in self.data]
        self.n_data = sum(self.block_sizes)

    def x0(self):
        return np.array([p.value for p in self.free])

    def bounds(self):
        lo = np.array([p.lo for p in self.free])
        hi = np.array([p.hi for p in self.free])
        return lo, hi

    def affected_sets(self, j):
        p = self.free[j]
        if p.role == LOCAL:
            return (p.dataset,)
        return tuple(range(self.n_sets))

    def values_for(self, x, k):
        vals = {}
        for p in self.params:
            if p.role == FIXED:
                vals[p.name] = p.value
        for p, xj in zip(self.free, x):
            if p.role == SHARED:
                vals[p.name] = xj
            elif p.dataset == k:
                vals[p.name] = xj
        return vals

    def residual_block(self, x, k):
        xk, yk, sk = self.data[k]
        r = self.model(self.values_for(x, k), xk, k) - yk
        if sk is not None:
            r = r / sk
        return np.asarray(r, dtype=float)

    def residuals(self, x):
        return [self.residual_block(x, k) for k in range(self.n_sets)]

    def jacobian(self, x, blocks):
        """Forward-difference Jacobian; recomputes only affected blocks per column.

        The probe step flips sign at an active upper bound so the model is
        never evaluated outside its box.
        """
        n = len(x)
        lo, hi = self.bounds()
        J = np.zeros((self.n_data, n))
        offsets = np.concatenate([[0], np.cumsum(self.block_sizes)])
        for j in range(n):
            h = _JAC_REL_STEP * max(abs(x[j]), 1.0)
            if x[j] + h > hi[j] and x[j] - h >= lo[j]:
                h = -h
            xj = x.copy()
            xj[j] += h
            for k in self.affected_sets(j):
                rj = self.residual_block(xj, k)
                J[offsets[k] : offsets[k + 1], j] = (rj - blocks[k]) / h
        return J


def _chi2(blocks):
    return float(sum(np.dot(b, b) for b in blocks))


def _minimize(problem, max_iter):
    x = problem.x0()
    lo, hi = problem.bounds()
    x = np.clip(x, lo, hi)
    blocks = problem.residuals(x)
    chi2 = _chi2(blocks)
    lam = _LAMBDA0
    converged = False
    message = ""
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if chi2 == 0.0:
            converged = True
            message = "exact fit"
            break
        J = problem.jacobian(x, blocks)
        r = np.concatenate(blocks)
        jtj = J.T @ J
        g = J.T @ r
        d = np.diag(jtj).copy()
        d[d <= 0.0] = max(d.max(), 1.0) * 1e-14 + 1e-300
        accepted = False
        while lam < 1e14:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = np.clip(x + step, lo, hi)
            blocks_new = problem.residuals(x_new)
            chi2_new = _chi2(blocks_new)
            if np.isfinite(chi2_new) and chi2_new <= chi2:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            converged = True
            message = "no downhill step found (damping exhausted)"
            break
        step_norm = float(np.linalg.norm(x_new - x))
        rel_drop = (chi2 - chi2_new) / max(chi2, 1e-300)
        x, blocks, chi2 = x_new, blocks_new, chi2_new
        lam = max(lam / 10.0, 1e-14)
        if rel_drop < _CHI2_RTOL or step_norm < _STEP_TOL * (1.0 + float(np.linalg.norm(x))):
            converged = True
            message = "converged"
            break
    else:
        message = f"iteration cap {max_iter} reached (last residual norm {math.sqrt(chi2):.6e})"
    return x, blocks, chi2, n_iter, converged, message


def _covariance(problem, x, blocks, chi2):
    """Covariance from the inverse approximate Hessian, scaled by reduced chi2."""
    J = problem.jacobian(x, blocks)
    u, s, vt = np.linalg.svd(J, full_matrices=False)
    if s[0] == 0.0 or s[-1] == 0.0 or s[0] / s[-1] > _COND_LIMIT:
        null = vt[-1]
        names = [
            problem.free[i].key
            for i in np.argsort(-np.abs(null))
            if abs(null[i]) > 0.1 * np.abs(null).max()
        ]
        raise RankDeficiencyError(
            "Jacobian is rank deficient; unidentifiable parameter combination: "
            + ", ".join(names),
            parameters=names,
        )
    dof = max(problem.n_data - len(x), 1)
    red_chi2 = chi2 / dof
    cov = (vt.T / (s * s)) @ vt * red_chi2
    return cov, red_chi2


def global_fit(model, datasets, params, max_iter=500) -> FitResult:
    """Simultaneous weighted fit of several datasets with shared parameters.

    ``model(values, x, k)`` evaluates dataset ``k`` on grid ``x`` given the
    parameter mapping for that dataset (fixed + shared + its locals, keyed by
    bare name). The residual vector concatenates all datasets in order.
    Non-convergence is flagged on the result, never silent.
    """
    problem = _Problem(model, datasets, params)
    x, blocks, chi2, n_iter, converged, message = _minimize(problem, max_iter)
    sigmas = None
    cov = None
    red_chi2 = chi2 / max(problem.n_data - len(x), 1)
    if converged:
        cov, red_chi2 = _covariance(problem, x, blocks, chi2)
        err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        sigmas = {p.key: float(e) for p, e in zip(problem.free, err)}
    values = {}
    for p in problem.params:
        if p.role == FIXED:
            values[p.key] = p.value
    for p, xj in zip(problem.free, x):
        values[p.key] = float(xj)
    return FitResult(
        values=values,
        sigmas=sigmas,
        chi2=chi2,
        red_chi2=red_chi2,
        n_data=problem.n_data,
        n_free=len(x),
        converged=converged,
        n_iter=n_iter,
        residuals=blocks,
        covariance=cov,
        free_names=tuple(p.key for p in problem.free),
        message=message,
    )


def least_squares(model, data, params, max_iter=500) -> FitResult:
    """Weighted fit of a single dataset; ``model(values, x)`` maps grid to signal."""
    return global_fit(lambda vals, x, _k: model(vals, x), [data], params, max_iter=max_iter)


def parameter_uncertainties(result: FitResult) -> dict:
    """1-sigma uncertainties of a converged fit."""
    if not result.converged:
        raise ConvergenceError("cannot report uncertainties for a non-converged fit")
    if result.sigmas is None:
        raise ConvergenceError("fit result carries no covariance")
    return dict(result.sigmas)
