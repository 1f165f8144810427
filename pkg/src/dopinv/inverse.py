"""Level-set identification of a two-level coefficient from contact data.

The unknown interface is the zero set of a level-set function phi; the
coefficient is gamma = gamma_p + (gamma_n - gamma_p) * H_eps(phi) with a
smoothed Heaviside of width eps_smooth grid cells. Descent directions come
from an adjoint computation that differentiates the *discrete* forward map
exactly (harmonic-mean face weights included), so it matches the
finite-difference gradient oracle to solver accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .elliptic import EllipticProblem, EllipticSolveError, assemble, flux_gamma1, solve_spd
from .forward import (
    CURRENT_FLOW,
    MEASUREMENT_KINDS,
    POINTWISE,
    GammaField,
    MeasurementSet,
)
from .grid import GAMMA0, GAMMA1, Grid, ScalarField, Trace, constant_trace

REINIT_EVERY = 20  # gradient steps between signed-distance rebuilds
_TINY = 1e-30


class ReconstructionError(RuntimeError):
    """Forward solve failed mid-iteration; partial records are attached."""

    def __init__(self, message, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


# ---------------------------------------------------------------------------
# level-set parametrization
# ---------------------------------------------------------------------------

def smoothed_heaviside(t, eps: float):
    """C1 Heaviside ramp: 0 below -eps, 1 above +eps, sine-smoothed between."""
    if not eps > 0.0:
        raise ValueError("smoothing width must be positive")
    t = np.asarray(t, dtype=np.float64)
    s = t / eps
    ramp = 0.5 * (1.0 + s + np.sin(np.pi * s) / np.pi)
    out = np.where(t <= -eps, 0.0, np.where(t >= eps, 1.0, ramp))
    return float(out) if out.ndim == 0 else out


def smoothed_delta(t, eps: float):
    """Exact derivative of `smoothed_heaviside`: (1 + cos(pi t/eps)) / (2 eps) inside."""
    if not eps > 0.0:
        raise ValueError("smoothing width must be positive")
    t = np.asarray(t, dtype=np.float64)
    bump = (1.0 + np.cos(np.pi * t / eps)) / (2.0 * eps)
    out = np.where(np.abs(t) >= eps, 0.0, bump)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LevelSetState:
    """Level-set function plus the known two-level contrast (gamma_p < gamma_n)."""

    phi: ScalarField
    gamma_p: float
    gamma_n: float
    eps_smooth: float = 2.0  # Heaviside half-width in units of h

    def __post_init__(self):
        if not 0.0 < self.gamma_p < self.gamma_n:
            raise ValueError(f"need 0 < gamma_p < gamma_n, got {self.gamma_p}, {self.gamma_n}")
        if not self.eps_smooth > 0.0:
            raise ValueError("eps_smooth must be positive")

    @property
    def eps(self) -> float:
        return self.eps_smooth * self.phi.grid.h

    def with_phi(self, values: np.ndarray) -> "LevelSetState":
        return replace(self, phi=ScalarField(self.phi.grid, values))


def gamma_from_phi(state: LevelSetState) -> GammaField:
    """gamma = gamma_p + (gamma_n - gamma_p) * H_eps(phi); N-region is {phi >= 0}."""
    h_vals = smoothed_heaviside(state.phi.values, state.eps)
    values = state.gamma_p + (state.gamma_n - state.gamma_p) * h_vals
    return GammaField(ScalarField(state.phi.grid, values))


def indicator_from_state(state: LevelSetState) -> ScalarField:
    return ScalarField(state.phi.grid, np.where(state.phi.values >= 0.0, 1.0, 0.0))


def init_phi(grid: Grid, shape: str, **params) -> ScalarField:
    """Exact signed-distance initialization: 'circle' or 'halfplane'."""
    from .phantoms import phi_circle, phi_halfplane

    if shape == "circle":
        return phi_circle(grid, **params)
    if shape == "halfplane":
        return phi_halfplane(grid, **params)
    raise ValueError(f"unknown init shape {shape!r}; known: circle, halfplane")


# ---------------------------------------------------------------------------
# objective and gradients
# ---------------------------------------------------------------------------

def _solve_with(grid, coeff_values, g_bottom_values, g_top_values, rtol):
    problem = EllipticProblem(
        grid,
        ScalarField(grid, coeff_values),
        Trace(grid, GAMMA0, g_bottom_values),
        Trace(grid, GAMMA1, g_top_values),
    )
    return solve_spd(assemble(problem), rtol=rtol)


def _forward_entry(grid, gamma_values, profile, mu_n, mu_p, rtol):
    """One measurement's forward state: (u, v, predicted top trace)."""
    zeros = np.zeros(grid.n)
    u = _solve_with(grid, gamma_values, -profile.trace.values, zeros, rtol)
    v = _solve_with(grid, 1.0 / gamma_values, profile.trace.values, zeros, rtol)
    gamma_field = ScalarField(grid, gamma_values)
    gamma_inv = ScalarField(grid, 1.0 / gamma_values)
    trace = mu_n * flux_gamma1(u, gamma_field, grid).values - mu_p * flux_gamma1(v, gamma_inv, grid).values
    return u, v, trace


def _evaluate(state, data, mu_n, mu_p, rtol, keep_fields=False):
    """J, per-entry residuals, per-entry rho traces, and optionally (u, v) fields."""
    grid = state.phi.grid
    if data.grid.n != grid.n:
        raise ValueError("measurement grid does not match the state grid")
    gamma_values = gamma_from_phi(state).field.values
    h = grid.h
    total = 0.0
    residuals = []
    rhos = []
    fields = []
    for profile, measurement in data.entries:
        u, v, trace = _forward_entry(grid, gamma_values, profile, mu_n, mu_p, rtol)
        if data.kind == POINTWISE:
            rho = trace - measurement.pointwise.values
            total += 0.5 * h * float(np.sum(rho * rho))
            residuals.append(rho.copy())
        else:
            r = h * float(np.sum(trace)) - measurement.scalar
            total += 0.5 * r * r
            residuals.append(r)
            rho = np.full(grid.n, r)
        rhos.append(rho)
        if keep_fields:
            fields.append((u, v))
    return total, residuals, rhos, gamma_values, fields


def objective(
    state: LevelSetState,
    data: MeasurementSet,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> tuple[float, list]:
    """Data misfit J = 1/2 sum_j ||forward(gamma(phi), U_j) - Y_j||^2.

    Pointwise entries use the h-weighted discrete L2 norm on the top contact;
    current-flow entries use plain squared scalar differences. Returns the
    value and the per-entry residuals (arrays or floats respectively).
    """
    total, residuals, _, _, _ = _evaluate(state, data, mu_n, mu_p, rtol)
    return total, residuals


def residual_norm(data: MeasurementSet, residuals: list) -> float:
    """Aggregate data-space norm matching `objective`; equals sqrt(2 J)."""
    acc = 0.0
    for res in residuals:
        if isinstance(res, np.ndarray):
            acc += float(data.grid.h * np.sum(res * res))
        else:
            acc += float(res) ** 2
    return math.sqrt(acc)


def _face_gradient(a, w, wh):
    """Per-cell sum over incident faces of dH/da_cell * (dwh across face)(dw across face).

    H is the harmonic mean of the two cell coefficients; dH/dx = 2 y^2/(x+y)^2.
    """
    g = np.zeros_like(a)
    a1, a2 = a[:, :-1], a[:, 1:]
    p = (wh[:, :-1] - wh[:, 1:]) * (w[:, :-1] - w[:, 1:])
    s = (a1 + a2) ** 2
    g[:, :-1] += 2.0 * a2 * a2 / s * p
    g[:, 1:] += 2.0 * a1 * a1 / s * p
    a1, a2 = a[:-1, :], a[1:, :]
    p = (wh[:-1, :] - wh[1:, :]) * (w[:-1, :] - w[1:, :])
    s = (a1 + a2) ** 2
    g[:-1, :] += 2.0 * a2 * a2 / s * p
    g[1:, :] += 2.0 * a1 * a1 / s * p
    return g


def _coefficient_gradient(a_values, w, wh, rho, g_bottom_values, sgn):
    """d(J_entry)/d(coefficient) for one species, divided by its mobility.

    Exact discrete adjoint of the assembled scheme: interior harmonic-mean
    face terms plus the contact-row corrections from the ghost elimination
    and from the flux functional itself. `sgn` is +1 for the electron-type
    species (adjoint data +rho) and -1 for the hole-type one (data -rho).
    """
    g = _face_gradient(a_values, w, wh)
    g[0, :] += 2.0 * wh[0, :] * (w[0, :] - g_bottom_values)
    g[-1, :] += 2.0 * wh[-1, :] * w[-1, :] - 2.0 * sgn * rho * w[-1, :]
    return g


def gradient_adjoint(
    state: LevelSetState,
    data: MeasurementSet,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> ScalarField:
    """dJ/dphi via two adjoint solves per measurement.

    The adjoints carry Dirichlet data +rho / -rho on the top contact (rho is
    the pointwise residual; for current-flow data the constant scalar
    residual) and zero on the bottom one.
    """
    _, _, rhos, gamma_values, fields = _evaluate(state, data, mu_n, mu_p, rtol, keep_fields=True)
    return _gradient_from_state(state, data, rhos, gamma_values, fields, mu_n, mu_p, rtol)


def _gradient_from_state(state, data, rhos, gamma_values, fields, mu_n, mu_p, rtol):
    grid = state.phi.grid
    gamma_inv_values = 1.0 / gamma_values
    zeros = np.zeros(grid.n)
    d_gamma = np.zeros_like(gamma_values)
    for (profile, _), rho, (u, v) in zip(data.entries, rhos, fields):
        if not np.any(rho):
            continue  # zero residual contributes nothing
        wu = _solve_with(grid, gamma_values, zeros, rho, rtol)
        wv = _solve_with(grid, gamma_inv_values, zeros, -rho, rtol)
        grad_u = _coefficient_gradient(
            gamma_values, u.values, wu.values, rho, -profile.trace.values, +1.0
        )
        grad_v = _coefficient_gradient(
            gamma_inv_values, v.values, wv.values, rho, profile.trace.values, -1.0
        )
        d_gamma += mu_n * grad_u - mu_p * grad_v * gamma_inv_values ** 2
    d_phi = d_gamma * (state.gamma_n - state.gamma_p) * smoothed_delta(state.phi.values, state.eps)
    return ScalarField(grid, d_phi)


def gradient_fd(
    state: LevelSetState,
    data: MeasurementSet,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    delta_fd: float | None = None,
    rtol: float = 1e-10,
) -> ScalarField:
    """Central-difference gradient oracle; O(n^2) objective evaluations."""
    if delta_fd is None:
        delta_fd = 1e-5 * float(np.max(np.abs(state.phi.values))) + 1e-8
    if not delta_fd > 0.0:
        raise ValueError("delta_fd must be positive")
    grid = state.phi.grid
    base = state.phi.values
    out = np.zeros_like(base)
    for j in range(grid.n):
        for i in range(grid.n):
            shift = np.zeros_like(base)
            shift[j, i] = delta_fd
            j_plus, _ = objective(state.with_phi(base + shift), data, mu_n, mu_p, rtol)
            j_minus, _ = objective(state.with_phi(base - shift), data, mu_n, mu_p, rtol)
            out[j, i] = (j_plus - j_minus) / (2.0 * delta_fd)
    return ScalarField(grid, out)


# ---------------------------------------------------------------------------
# reconstruction loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InversionConfig:
    step_size: float = 0.5
    max_iters: int = 200
    discrepancy_tau: float = 1.5
    grad_tol: float = 1e-6
    kind: str = POINTWISE
    record_every: int = 1
    max_backtracks: int = 10
    reinit_every: int = REINIT_EVERY
    rtol: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.discrepancy_tau < 1.0:
            raise ValueError("discrepancy_tau must be >= 1")
        if self.step_size < 0.0:
            raise ValueError("step_size must be nonnegative")
        if self.kind not in MEASUREMENT_KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    residual: float
    symdiff: float | None = None


@dataclass(frozen=True)
class ReconstructionResult:
    state: LevelSetState
    records: tuple[IterationRecord, ...]
    stop_reason: str  # discrepancy | gradient | max_iters | stalled

    @property
    def final_residual(self) -> float:
        return self.records[-1].residual


def _symdiff(state: LevelSetState, ground_truth: ScalarField | None) -> float | None:
    if ground_truth is None:
        return None
    from .grid import symmetric_difference_error

    return symmetric_difference_error(indicator_from_state(state), ground_truth)


def reconstruct(
    data: MeasurementSet,
    cfg: InversionConfig,
    init: LevelSetState,
    ground_truth: ScalarField | None = None,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
) -> ReconstructionResult:
    """Normalized gradient descent on the level-set function.

    Steps phi <- phi - beta * h * g / (||g||_inf + tiny), so one step moves
    the interface by at most a fraction beta of a grid cell; larger steps
    eject every cell from the Heaviside band and freeze the iteration. The
    step is halved until the misfit does not increase, so accepted residuals
    are non-increasing. Every `reinit_every` accepted moves, phi is rebuilt
    as the signed distance to its interface (kept only if the misfit does
    not increase). Stops on the discrepancy principle (noisy data), on a
    small gradient, or at the iteration budget.
    """
    if data.kind != cfg.kind:
        raise ValueError(f"config kind {cfg.kind!r} does not match data kind {data.kind!r}")
    state = init
    records: list[IterationRecord] = []
    grid = state.phi.grid

    def eval_state(s):
        return _evaluate(s, data, mu_n, mu_p, cfg.rtol, keep_fields=True)

    try:
        j_cur, residuals, rhos, gamma_values, fields = eval_state(state)
    except EllipticSolveError as exc:
        raise ReconstructionError(
            f"forward solve failed at initialization: {exc}",
            ReconstructionResult(state, tuple(records), "solver_failure"),
        ) from exc

    stop_reason = "max_iters"
    steps_since_reinit = 0
    moved_since_reinit = False
    it = 0
    while True:
        res = residual_norm(data, residuals)
        if it % cfg.record_every == 0 or it == cfg.max_iters:
            records.append(IterationRecord(it, res, _symdiff(state, ground_truth)))
        if data.delta_data > 0.0 and res <= cfg.discrepancy_tau * data.delta_data:
            stop_reason = "discrepancy"
            break
        try:
            grad = _gradient_from_state(state, data, rhos, gamma_values, fields, mu_n, mu_p, cfg.rtol)
            gnorm = float(np.max(np.abs(grad.values)))
            if gnorm <= cfg.grad_tol:
                stop_reason = "gradient"
                break
            if it >= cfg.max_iters:
                stop_reason = "max_iters"
                break

            direction = grad.values / (gnorm + _TINY)
            step = cfg.step_size * grid.h
            accepted = False
            for _ in range(cfg.max_backtracks + 1):
                trial = state.with_phi(state.phi.values - step * direction)
                j_new, r_new, rho_new, gv_new, f_new = eval_state(trial)
                if j_new <= j_cur:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                stop_reason = "stalled"
                break
            if step > 0.0:
                moved_since_reinit = True
            state, j_cur, residuals, rhos, gamma_values, fields = (
                trial, j_new, r_new, rho_new, gv_new, f_new,
            )
            steps_since_reinit += 1
            if steps_since_reinit >= cfg.reinit_every:
                steps_since_reinit = 0
                if moved_since_reinit:
                    moved_since_reinit = False
                    phi_r = kernels.signed_distance_reinit(
                        np.ascontiguousarray(state.phi.values), grid.h
                    )
                    candidate = state.with_phi(phi_r)
                    j_r, r_r, rho_r, gv_r, f_r = eval_state(candidate)
                    if j_r <= j_cur:
                        state, j_cur, residuals, rhos, gamma_values, fields = (
                            candidate, j_r, r_r, rho_r, gv_r, f_r,
                        )
        except EllipticSolveError as exc:
            raise ReconstructionError(
                f"forward solve failed at iteration {it}: {exc}",
                ReconstructionResult(state, tuple(records), "solver_failure"),
            ) from exc
        it += 1

    if not records or records[-1].iteration != it:
        records.append(IterationRecord(it, residual_norm(data, residuals), _symdiff(state, ground_truth)))
    return ReconstructionResult(state, tuple(records), stop_reason)


def write_convergence_csv(result: ReconstructionResult, path) -> None:
    """CSV log 'iter,residual,symdiff_error' (symdiff column empty without truth)."""
    with open(path, "w") as fh:
        fh.write("iter,residual,symdiff_error\n")
        for rec in result.records:
            sym = "" if rec.symdiff is None else repr(float(rec.symdiff))
            fh.write(f"{rec.iteration},{float(rec.residual)!r},{sym}\n")
