"""Nonlinear least squares: a damped Gauss-Newton (Levenberg-Marquardt)
engine plus the spectrum-specific fit recipes (extinction line fits,
power-broadening sweeps, saturation curves).

Bounds are enforced by smooth parameter transforms (log / logistic), so the
curvature-based standard errors stay meaningful at the solution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .physics import MoleculeParams, DriveParams
from .spectra import ExtinctionModel, SpectrumTrace, extinction_spectrum, lorentzian_profile


class RankDeficientError(RuntimeError):
    """Raised when the fit problem is (numerically) under-determined."""


class NotConvergedError(RuntimeError):
    """Raised by recipes that require convergence; carries the last FitResult."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class Parameter:
    name: str
    value: float
    lo: float = -math.inf
    hi: float = math.inf
    fixed: bool = False

    def __post_init__(self):
        if not (self.lo <= self.value <= self.hi):
            raise ValueError(
                f"parameter {self.name}: init {self.value} outside bounds "
                f"[{self.lo}, {self.hi}]"
            )


@dataclass
class FitProblem:
    """residual(p) maps the full parameter vector (declared order, fixed
    entries included) to a residual vector; weights are inverse variances."""

    residual: Callable[[np.ndarray], np.ndarray]
    params: list
    weights: Optional[np.ndarray] = None

    def free_indices(self):
        return [i for i, p in enumerate(self.params) if not p.fixed]


@dataclass
class FitOptions:
    max_iter: int = 500
    xtol: float = 1e-10      # relative cost decrease
    gtol: float = 1e-8       # gradient inf-norm
    cond_max: float = 1e12   # normal-equations conditioning limit
    diff_step: float = 1e-7


@dataclass
class FitResult:
    params: dict
    errors: dict
    cost: float
    status: str              # converged | max_iter | rank_deficient
    iterations: int
    covariance: Optional[np.ndarray] = None
    param_order: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_json(self) -> str:
        return json.dumps(
            {
                "params": self.params,
                "errors": self.errors,
                "cost": self.cost,
                "status": self.status,
                "iterations": self.iterations,
            },
            indent=2,
        )

    def table(self) -> str:
        rows = [f"{'parameter':<14}{'value':>16}{'std error':>16}"]
        for k in self.params:
            e = self.errors.get(k, float("nan"))
            rows.append(f"{k:<14}{self.params[k]:>16.8g}{e:>16.3g}")
        rows.append(f"status: {self.status}  iterations: {self.iterations}  "
                    f"cost: {self.cost:.6g}")
        return "\n".join(rows)


# -- smooth bound transforms ------------------------------------------------

def _to_internal(p, lo, hi):
    if math.isfinite(lo) and math.isfinite(hi):
        span = hi - lo
        x = min(max((p - lo) / span, 1e-12), 1 - 1e-12)
        return math.log(x / (1 - x))
    if math.isfinite(lo):
        return math.log(max(p - lo, 1e-300))
    if math.isfinite(hi):
        return math.log(max(hi - p, 1e-300))
    return p


def _safe_exp(t):
    return math.exp(min(t, 700.0))


def _to_external(t, lo, hi):
    if math.isfinite(lo) and math.isfinite(hi):
        return lo + (hi - lo) / (1.0 + _safe_exp(-t))
    if math.isfinite(lo):
        return lo + _safe_exp(t)
    if math.isfinite(hi):
        return hi - _safe_exp(t)
    return t


def _dext_dint(t, lo, hi):
    if math.isfinite(lo) and math.isfinite(hi):
        s = 1.0 / (1.0 + _safe_exp(-t))
        return (hi - lo) * s * (1.0 - s)
    if math.isfinite(lo) or math.isfinite(hi):
        d = _safe_exp(t)
        return d if math.isfinite(lo) else -d
    return 1.0


def minimize(problem: FitProblem, opts: Optional[FitOptions] = None) -> FitResult:
    """Levenberg-Marquardt minimization of the weighted residual norm.

    Accepted steps never increase the weighted cost; damping grows until a
    decreasing step is found or the iteration budget runs out.
    """
    opts = opts or FitOptions()
    pars = problem.params
    free = problem.free_indices()
    nfree = len(free)
    if nfree == 0:
        raise ValueError("no free parameters")

    full = np.array([p.value for p in pars], dtype=float)

    def external(theta):
        out = full.copy()
        for k, i in enumerate(free):
            out[i] = _to_external(theta[k], pars[i].lo, pars[i].hi)
        return out

    theta = np.array([_to_internal(pars[i].value, pars[i].lo, pars[i].hi) for i in free])

    r0 = np.asarray(problem.residual(external(theta)), dtype=float)
    if r0.size < nfree:
        raise RankDeficientError(
            f"residual dimension {r0.size} < free parameter count {nfree}"
        )
    w = np.ones(r0.size) if problem.weights is None else np.asarray(problem.weights, float)
    if not np.all(np.isfinite(r0)):
        raise ValueError("initial residual is not finite")

    def cost_of(r):
        with np.errstate(over="ignore", invalid="ignore"):
            c = float(np.sum(w * r * r))
        return c if math.isfinite(c) else math.inf

    cost = cost_of(r0)
    r = r0
    mu = 0.0
    status = "max_iter"
    it = 0
    rank_flag = False

    for it in range(1, opts.max_iter + 1):
        # forward-difference Jacobian in internal coordinates
        J = np.empty((r.size, nfree))
        for k in range(nfree):
            h = opts.diff_step * (1.0 + abs(theta[k]))
            tp = theta.copy()
            tp[k] += h
            J[:, k] = (np.asarray(problem.residual(external(tp)), float) - r) / h

        g = J.T @ (w * r)
        if np.max(np.abs(g)) < opts.gtol:
            status = "converged"
            break
        A = J.T @ (w[:, None] * J)
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0
        cond = np.linalg.cond(A) if np.all(np.isfinite(A)) else np.inf

        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(A + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu = max(mu * 10.0, 1e-10 * np.max(diag))
                continue
            t_new = theta + step
            r_new = np.asarray(problem.residual(external(t_new)), float)
            if np.all(np.isfinite(r_new)) and cost_of(r_new) <= cost:
                c_new = cost_of(r_new)
                rel = (cost - c_new) / max(cost, 1e-300)
                theta, r, cost = t_new, r_new, c_new
                mu *= 0.25
                if mu < 1e-14 * np.max(diag):
                    mu = 0.0  # undamped Gauss-Newton while steps keep working
                accepted = True
                if rel < opts.xtol:
                    status = "converged"
                break
            mu = max(mu * 10.0, 1e-10 * np.max(diag))
        if not accepted:
            if cond > opts.cond_max:
                rank_flag = True
                break
            status = "converged"  # no decreasing step exists; local minimum
            break
        if status == "converged":
            break
        if cond > opts.cond_max:
            rank_flag = True

    if rank_flag and status != "converged":
        status = "rank_deficient"

    # curvature-based errors at the solution, mapped to external coordinates
    J = np.empty((r.size, nfree))
    for k in range(nfree):
        h = opts.diff_step * (1.0 + abs(theta[k]))
        tp = theta.copy()
        tp[k] += h
        J[:, k] = (np.asarray(problem.residual(external(tp)), float) - r) / h
    A = J.T @ (w[:, None] * J)
    dof = max(r.size - nfree, 1)
    scale = cost / dof if problem.weights is None else 1.0
    try:
        cov_int = np.linalg.pinv(A, rcond=1e-14) * scale
    except np.linalg.LinAlgError:
        cov_int = np.full((nfree, nfree), np.nan)
    dpdt = np.array([_dext_dint(theta[k], pars[free[k]].lo, pars[free[k]].hi)
                     for k in range(nfree)])
    cov = cov_int * np.outer(dpdt, dpdt)

    p_ext = external(theta)
    params = {p.name: float(p_ext[i]) for i, p in enumerate(pars)}
    errors = {}
    for k, i in enumerate(free):
        v = cov[k, k]
        errors[pars[i].name] = float(math.sqrt(v)) if v >= 0 else float("nan")
    for p in pars:
        if p.fixed:
            errors[p.name] = 0.0
    return FitResult(
        params=params,
        errors=errors,
        cost=cost,
        status=status,
        iterations=it,
        covariance=cov,
        param_order=[pars[i].name for i in free],
    )


# ---------------------------------------------------------------------------
# Fit recipes
# ---------------------------------------------------------------------------

def extinction_fit_model(grid, gamma, a, b, psi, center, baseline):
    """Interference transmission model with an effective (already power
    broadened) width gamma."""
    d = grid - center
    lor = 1.0 / (d * d + gamma * gamma / 4.0)
    return baseline * (
        1.0 + a * lor - b * lor * (d * math.cos(psi) + gamma / 2.0 * math.sin(psi))
    )


def _init_extinction(trace: SpectrumTrace):
    """Heuristic initialization: extremum of the smoothed trace locates the
    line, half-width at half extremum seeds gamma."""
    g, v = trace.grid, trace.values
    base = float(np.median(v))
    kernel = np.ones(max(3, v.size // 50))
    kernel /= kernel.size
    sm = np.convolve(v - base, kernel, mode="same")
    i0 = int(np.argmax(np.abs(sm)))
    center = float(g[i0])
    depth = float(sm[i0])
    half = np.abs(sm) > abs(depth) / 2.0
    gamma = max(float(np.sum(half) * np.mean(np.diff(g))), 2.0 * float(np.mean(np.diff(g))))
    baseline = base if base > 0 else 1.0

    # the model is linear in (A, B cos psi, B sin psi) at fixed center/gamma:
    # a cheap linear solve seeds all three, including the psi quadrant
    d = g - center
    lor = 1.0 / (d * d + gamma * gamma / 4.0)
    basis = np.column_stack([lor, lor * d, lor * gamma / 2.0])
    coef, *_ = np.linalg.lstsq(basis, v / baseline - 1.0, rcond=None)
    a0 = max(float(coef[0]), 1e-9)
    b0 = max(float(math.hypot(coef[1], coef[2])), 1e-9)
    psi0 = math.atan2(-coef[2], -coef[1])
    return center, gamma, a0, b0, psi0, baseline


def fit_extinction(
    data: SpectrumTrace,
    init: Optional[dict] = None,
    fixed: Sequence[str] = (),
    weights: Optional[np.ndarray] = None,
    opts: Optional[FitOptions] = None,
) -> FitResult:
    """Fit {A, B, psi, gamma, center, baseline} to a transmission trace."""
    span = data.grid[-1] - data.grid[0]
    center0, gamma0, a0, b0, psi0, base0 = _init_extinction(data)
    if span < 3.0 * gamma0:
        raise ValueError("trace must cover at least three linewidths")
    defaults = {
        "A": a0,
        "B": b0,
        "psi": psi0,
        "gamma": gamma0,
        "center": center0,
        "baseline": base0,
    }
    if init:
        defaults.update(init)
    pars = [
        Parameter("A", defaults["A"], lo=0.0, fixed="A" in fixed),
        Parameter("B", defaults["B"], lo=0.0, fixed="B" in fixed),
        Parameter("psi", defaults["psi"], fixed="psi" in fixed),
        Parameter("gamma", defaults["gamma"], lo=1e-12, fixed="gamma" in fixed),
        Parameter("center", defaults["center"], fixed="center" in fixed),
        Parameter("baseline", defaults["baseline"], lo=1e-12, fixed="baseline" in fixed),
    ]

    def residual(p):
        a, b, psi, gamma, center, baseline = p
        return extinction_fit_model(data.grid, gamma, a, b, psi, center, baseline) - data.values

    return minimize(FitProblem(residual, pars, weights), opts)


def fit_linewidth_vs_power(spectra: Sequence[tuple], opts: Optional[FitOptions] = None):
    """From (power, SpectrumTrace) pairs, extract per-power FWHM and fit
    FWHM(P) = gamma*sqrt(1 + P/P_sat).

    Returns (table, result) where table is a list of (power, fwhm, fwhm_err)
    and result carries {gamma, p_sat}.
    """
    if len(spectra) < 3:
        raise RankDeficientError("need spectra at >= 3 powers")
    table = []
    for power, tr in spectra:
        r = fit_extinction(tr, opts=opts)
        if not r.converged:
            raise NotConvergedError(f"linewidth fit failed at power {power}", r)
        table.append((float(power), r.params["gamma"], r.errors["gamma"]))
    powers = np.array([t[0] for t in table])
    fwhm = np.array([t[1] for t in table])
    if powers.max() / max(powers.min(), 1e-300) < 3.0:
        raise RankDeficientError("power span too small to separate gamma and P_sat")

    pars = [
        Parameter("gamma", float(fwhm.min()), lo=1e-12),
        Parameter("p_sat", float(np.median(powers)), lo=1e-300),
    ]

    def residual(p):
        gamma, p_sat = p
        return gamma * np.sqrt(1.0 + powers / p_sat) - fwhm

    res = minimize(FitProblem(residual, pars), opts)
    return table, res


def fit_saturation_curves(
    powers: np.ndarray,
    coherent_rates: np.ndarray,
    total_rates: np.ndarray,
    opts: Optional[FitOptions] = None,
) -> FitResult:
    """Joint fit of a*S/(1+S)^2 (coherent) and b*S/(1+S) (total) with a
    shared saturation power: S = P/P_sat."""
    powers = np.asarray(powers, float)
    coherent_rates = np.asarray(coherent_rates, float)
    total_rates = np.asarray(total_rates, float)
    if powers.max() / powers.min() < 100.0:
        raise RankDeficientError("need >= 2 decades of power around P_sat")

    p_sat0 = float(powers[np.argmax(coherent_rates)])
    pars = [
        Parameter("p_sat", p_sat0, lo=1e-300),
        Parameter("a", float(4.0 * coherent_rates.max()), lo=1e-300),
        Parameter("b", float(total_rates.max()), lo=1e-300),
    ]

    def residual(p):
        p_sat, a, b = p
        s = powers / p_sat
        rc = a * s / (1.0 + s) ** 2 - coherent_rates
        rt = b * s / (1.0 + s) - total_rates
        return np.concatenate([rc, rt])

    return minimize(FitProblem(residual, pars), opts)
