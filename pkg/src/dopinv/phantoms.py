"""Stand-in doping phantoms: indicator fields, level-set functions, doping fields.

The N-region (net donor doping, C > 0) is the indicator-1 / phi >= 0 set.
"""

from __future__ import annotations

import numpy as np

from .forward import C_MAX_DEFAULT, C_MIN_DEFAULT, DopingField
from .grid import Grid, ScalarField

PHANTOM_NAMES = ("halfplane", "circle", "lshape")


def phi_halfplane(grid: Grid, axis: str = "y", offset: float = 0.5) -> ScalarField:
    """Signed distance with the N-region on the high-coordinate side."""
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if not 0.0 < offset < 1.0:
        raise ValueError(f"halfplane offset must lie strictly inside (0, 1), got {offset}")
    x, y = grid.cell_mesh()
    coord = x if axis == "x" else y
    return ScalarField(grid, coord - offset)


def phi_circle(grid: Grid, center: tuple[float, float] = (0.5, 0.5), radius: float = 0.25) -> ScalarField:
    """Signed distance to a circle, positive inside (the N-region is the disk)."""
    cx, cy = center
    if not (0.0 <= cx <= 1.0 and 0.0 <= cy <= 1.0):
        raise ValueError(f"circle center {center} is outside the unit square")
    if not radius > 0.0:
        raise ValueError(f"circle radius must be positive, got {radius}")
    x, y = grid.cell_mesh()
    return ScalarField(grid, radius - np.hypot(x - cx, y - cy))


def phi_lshape(grid: Grid, x_cut: float = 0.5, y_cut: float = 0.5) -> ScalarField:
    """L-shaped N-region {x >= x_cut} union {y >= y_cut} (unit-slope level set)."""
    if not (0.0 < x_cut < 1.0 and 0.0 < y_cut < 1.0):
        raise ValueError("lshape cuts must lie strictly inside (0, 1)")
    x, y = grid.cell_mesh()
    return ScalarField(grid, np.maximum(x - x_cut, y - y_cut))


def indicator_from_phi(phi: ScalarField) -> ScalarField:
    """N-region indicator of {phi >= 0}; ties at zero count as N."""
    return ScalarField(phi.grid, np.where(phi.values >= 0.0, 1.0, 0.0))


def doping_from_indicator(
    indicator: ScalarField,
    c_p: float = -5.0,
    c_n: float = 5.0,
    c_min: float = C_MIN_DEFAULT,
    c_max: float = C_MAX_DEFAULT,
) -> DopingField:
    """Two-level doping: c_p on the P-region (indicator 0), c_n on the N-region."""
    if not c_p <= c_n:
        raise ValueError(f"phantom doping levels must satisfy c_p <= c_n, got {c_p}, {c_n}")
    values = np.where(indicator.values != 0.0, float(c_n), float(c_p))
    return DopingField(ScalarField(indicator.grid, values), c_min, c_max)


def phantom_phi(grid: Grid, name: str, **params) -> ScalarField:
    """Level-set function of a named phantom shape."""
    if name == "halfplane":
        return phi_halfplane(grid, **params)
    if name == "circle":
        return phi_circle(grid, **params)
    if name == "lshape":
        return phi_lshape(grid, **params)
    raise ValueError(f"unknown phantom {name!r}; known: {PHANTOM_NAMES}")
