"""Mixed-boundary elliptic solves on the cell-centered grid.

Discretizes div(a grad w) = f with Dirichlet data on the bottom/top contacts
and homogeneous Neumann sides. Face coefficients between adjacent cells are
harmonic means, which keeps fluxes continuous across jumps of a piecewise
constant coefficient; contact faces are eliminated through ghost values
2 g - w so Dirichlet data is imposed at face midpoints. The assembled
operator is symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .device import built_in_potential
from .grid import GAMMA0, GAMMA1, Grid, ScalarField, Trace, constant_trace


class EllipticSolveError(RuntimeError):
    """Linear solve did not meet its residual contract within the budget."""


class NewtonError(RuntimeError):
    """Damped Newton failed to reduce the residual or ran out of iterations."""


@dataclass(frozen=True)
class EllipticProblem:
    grid: Grid
    coeff: ScalarField  # cell-centered a > 0
    dirichlet_bottom: Trace  # on GAMMA0
    dirichlet_top: Trace  # on GAMMA1
    source: ScalarField | None = None  # f; None means zero

    def __post_init__(self):
        if np.any(self.coeff.values <= 0.0):
            raise ValueError("elliptic coefficient must be strictly positive")
        if self.dirichlet_bottom.segment != GAMMA0:
            raise ValueError("dirichlet_bottom must live on gamma0")
        if self.dirichlet_top.segment != GAMMA1:
            raise ValueError("dirichlet_top must live on gamma1")


@dataclass(frozen=True)
class LinearSystem:
    """5-point SPD system A w = b in stencil form (see kernels module)."""

    grid: Grid
    diag: np.ndarray  # (n, n)
    face_x: np.ndarray  # (n, n-1) couplings between x-neighbors
    face_y: np.ndarray  # (n-1, n) couplings between y-neighbors
    rhs: np.ndarray  # (n, n)

    def matvec(self, w: np.ndarray) -> np.ndarray:
        return kernels.stencil_matvec(self.diag, self.face_x, self.face_y, np.ascontiguousarray(w))

    def to_dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense (A, b) with unknowns flattened row-major; for small-grid oracles."""
        n = self.grid.n
        m = n * n
        a = np.zeros((m, m))
        idx = lambda j, i: j * n + i
        for j in range(n):
            for i in range(n):
                a[idx(j, i), idx(j, i)] = self.diag[j, i]
                if i < n - 1:
                    a[idx(j, i), idx(j, i + 1)] = -self.face_x[j, i]
                    a[idx(j, i + 1), idx(j, i)] = -self.face_x[j, i]
                if j < n - 1:
                    a[idx(j, i), idx(j + 1, i)] = -self.face_y[j, i]
                    a[idx(j + 1, i), idx(j, i)] = -self.face_y[j, i]
        return a, self.rhs.reshape(m).copy()


def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def assemble(p: EllipticProblem) -> LinearSystem:
    """Assemble A w = b such that w approximates the solution of div(a grad w) = f."""
    n = p.grid.n
    h2 = p.grid.h ** 2
    a = p.coeff.values

    face_x = _harmonic(a[:, :-1], a[:, 1:]) / h2
    face_y = _harmonic(a[:-1, :], a[1:, :]) / h2

    diag = np.zeros((n, n))
    diag[:, :-1] += face_x
    diag[:, 1:] += face_x
    diag[:-1, :] += face_y
    diag[1:, :] += face_y
    # ghost elimination at the contacts: face coefficient is the cell's own a
    diag[0, :] += 2.0 * a[0, :] / h2
    diag[-1, :] += 2.0 * a[-1, :] / h2

    rhs = np.zeros((n, n))
    if p.source is not None:
        rhs -= p.source.values
    rhs[0, :] += (2.0 * a[0, :] / h2) * p.dirichlet_bottom.values
    rhs[-1, :] += (2.0 * a[-1, :] / h2) * p.dirichlet_top.values

    return LinearSystem(p.grid, diag, face_x, face_y, rhs)


def solve_spd(system: LinearSystem, rtol: float = 1e-10, max_iter: int | None = None) -> ScalarField:
    """Conjugate-gradient solve meeting ||A w - b|| <= rtol ||b||."""
    if not 0.0 < rtol <= 1e-6:
        raise ValueError(f"rtol must be in (0, 1e-6], got {rtol}")
    n = system.grid.n
    if max_iter is None:
        max_iter = 200 * n + 5000
    x, relres, iters = kernels.cg_stencil(
        np.ascontiguousarray(system.diag),
        np.ascontiguousarray(system.face_x),
        np.ascontiguousarray(system.face_y),
        np.ascontiguousarray(system.rhs),
        rtol,
        max_iter,
    )
    if relres > rtol:
        raise EllipticSolveError(
            f"CG exhausted {iters} iterations; achieved relative residual {relres:.3e} > rtol {rtol:.1e}"
        )
    return ScalarField(system.grid, x)


def _boundary_doping_trace(c: np.ndarray, row0: int, row1: int) -> np.ndarray:
    # second-order extrapolation of the cell-centered doping to the contact face
    return 1.5 * c[row0, :] - 0.5 * c[row1, :]


def equilibrium_dirichlet(grid: Grid, c: ScalarField) -> tuple[Trace, Trace]:
    """Built-in potential traces on both contacts, from the doping near each."""
    cb = _boundary_doping_trace(c.values, 0, 1)
    ct = _boundary_doping_trace(c.values, -1, -2)
    return (
        Trace(grid, GAMMA0, built_in_potential(cb)),
        Trace(grid, GAMMA1, built_in_potential(ct)),
    )


def newton_equilibrium(
    grid: Grid,
    c: ScalarField,
    lambda_sq: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    rtol: float = 1e-12,
) -> ScalarField:
    """Solve lambda_sq * lap(V) = exp(V) - exp(-V) - C for the equilibrium potential.

    Dirichlet data on both contacts is the built-in potential of the nearby
    doping; the sides are insulated. Damped Newton with step halving; each
    Newton system is SPD because the linearization adds exp(V) + exp(-V) >= 2
    to the diagonal.
    """
    if not lambda_sq > 0.0:
        raise ValueError("lambda_sq must be positive")
    g_bottom, g_top = equilibrium_dirichlet(grid, c)
    base = assemble(
        EllipticProblem(grid, ScalarField(grid, np.ones((grid.n, grid.n))), g_bottom, g_top)
    )
    cv = c.values

    def residual(v: np.ndarray) -> np.ndarray:
        # F(V) = lambda_sq * (A V - b) + exp(V) - exp(-V) - C; zero at the solution
        av = kernels.stencil_matvec(base.diag, base.face_x, base.face_y, v)
        return lambda_sq * (av - base.rhs) + np.exp(v) - np.exp(-v) - cv

    v = np.arcsinh(cv / 2.0)  # zero-field local solution; exact for constant C
    f = residual(v)
    fnorm = float(np.max(np.abs(f)))
    for _ in range(max_iter):
        if fnorm <= tol:
            return ScalarField(grid, v)
        jac_diag = lambda_sq * base.diag + np.exp(v) + np.exp(-v)
        delta, relres, iters = kernels.cg_stencil(
            jac_diag,
            lambda_sq * base.face_x,
            lambda_sq * base.face_y,
            np.ascontiguousarray(-f),
            rtol,
            200 * grid.n + 5000,
        )
        if relres > rtol:
            raise EllipticSolveError(
                f"Newton inner CG stalled at relative residual {relres:.3e} after {iters} iterations"
            )
        step = 1.0
        for _ in range(40):
            v_new = v + step * delta
            f_new = residual(v_new)
            fnorm_new = float(np.max(np.abs(f_new)))
            if fnorm_new < fnorm:
                break
            step *= 0.5
        else:
            raise NewtonError(
                f"Newton step halving failed to reduce the residual (stuck at {fnorm:.3e})"
            )
        v, f, fnorm = v_new, f_new, fnorm_new
    if fnorm <= tol:
        return ScalarField(grid, v)
    raise NewtonError(f"Newton did not converge in {max_iter} iterations; last residual {fnorm:.3e}")


def flux_gamma1(w: ScalarField, a: ScalarField, grid: Grid, g_top: Trace | None = None) -> Trace:
    """Discrete conormal flux a dw/dnu on the top contact, per face midpoint.

    Consistent with the assembled scheme's ghost elimination: the flux through
    a top face is a_cell * (g - w_cell) * 2/h with g the Dirichlet value there.
    """
    if g_top is None:
        g_top = constant_trace(grid, GAMMA1, 0.0)
    if g_top.segment != GAMMA1:
        raise ValueError("g_top must live on gamma1")
    vals = a.values[-1, :] * (g_top.values - w.values[-1, :]) * (2.0 / grid.h)
    return Trace(grid, GAMMA1, vals)


def flux_gamma0(w: ScalarField, a: ScalarField, grid: Grid, g_bottom: Trace | None = None) -> Trace:
    """Outward conormal flux through the bottom contact (outward normal is -y)."""
    if g_bottom is None:
        g_bottom = constant_trace(grid, GAMMA0, 0.0)
    if g_bottom.segment != GAMMA0:
        raise ValueError("g_bottom must live on gamma0")
    vals = a.values[0, :] * (g_bottom.values - w.values[0, :]) * (2.0 / grid.h)
    return Trace(grid, GAMMA0, vals)
