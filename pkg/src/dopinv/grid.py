"""Uniform cell-centered discretization of the unit square.

The boundary decomposition follows the device geometry: the bottom side
(`GAMMA0`) and top side (`GAMMA1`) are the Ohmic contacts carrying Dirichlet
data, the left/right sides (`NEUMANN_LEFT`/`NEUMANN_RIGHT`) are insulating.
Fields live at cell centers; traces carry one value per boundary face
midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAMMA0 = "gamma0"  # bottom contact {(x, 0)}
GAMMA1 = "gamma1"  # top contact {(x, 1)}
NEUMANN_LEFT = "neumann_left"
NEUMANN_RIGHT = "neumann_right"
BOUNDARY_SEGMENTS = (GAMMA0, GAMMA1, NEUMANN_LEFT, NEUMANN_RIGHT)


@dataclass(frozen=True)
class Grid:
    """n-by-n cell-centered grid on [0,1]^2; cell (i,j) sits at ((i+.5)h, (j+.5)h)."""

    n: int
    h: float = field(init=False)

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"grid needs n >= 4 cells per side, got {self.n}")
        object.__setattr__(self, "h", 1.0 / self.n)

    @property
    def cell_x(self) -> np.ndarray:
        """x-coordinates of cell centers (also boundary-face midpoints on top/bottom)."""
        return (np.arange(self.n) + 0.5) * self.h

    @property
    def cell_y(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def cell_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of shape (n, n), indexed [j, i] = [y-row, x-column]."""
        return np.meshgrid(self.cell_x, self.cell_y)


def make_grid(n: int) -> Grid:
    return Grid(int(n))


def _as_readonly(values, shape) -> np.ndarray:
    a = np.array(values, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(a)):
        raise ValueError("values must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalarField:
    """Cell-centered real field; values[j, i] with j the y-row (bottom row first)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        object.__setattr__(self, "values", _as_readonly(self.values, (n, n)))

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class Trace:
    """Boundary function sampled at the n face midpoints of one segment."""

    grid: Grid
    segment: str
    values: np.ndarray

    def __post_init__(self):
        if self.segment not in BOUNDARY_SEGMENTS:
            raise ValueError(f"unknown boundary segment {self.segment!r}")
        object.__setattr__(self, "values", _as_readonly(self.values, (self.grid.n,)))


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full((grid.n, grid.n), float(value)))


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample fn(x, y) at cell centers (fn must accept numpy arrays)."""
    x, y = grid.cell_mesh()
    return ScalarField(grid, np.asarray(fn(x, y), dtype=np.float64))


def constant_trace(grid: Grid, segment: str, value: float) -> Trace:
    return Trace(grid, segment, np.full(grid.n, float(value)))


def trace_from_function(grid: Grid, segment: str, fn) -> Trace:
    """Sample fn(s) at the segment's face midpoints (s = x on top/bottom, y on sides)."""
    return Trace(grid, segment, np.asarray(fn(grid.cell_x), dtype=np.float64))


def integrate_trace(t: Trace) -> float:
    """Midpoint-rule integral over the top contact; exact for linear data."""
    if t.segment != GAMMA1:
        raise ValueError(f"trace integration is defined on {GAMMA1!r}, got {t.segment!r}")
    return float(t.grid.h * np.sum(t.values))


def field_laplacian(f: ScalarField) -> ScalarField:
    """Discrete Laplacian with mirror ghosts on the insulated sides.

    Interior rows use the standard centered 5-point stencil; the bottom and
    top rows (where no boundary data is available) use the one-sided
    second-order 4-point stencil in y.
    """
    n = f.grid.n
    h2 = f.grid.h ** 2
    v = f.values
    lap = np.zeros((n, n))

    # x-part: centered, with mirror ghosts imposing zero normal derivative
    lap[:, 1:-1] += v[:, :-2] - 2.0 * v[:, 1:-1] + v[:, 2:]
    lap[:, 0] += v[:, 1] - v[:, 0]
    lap[:, -1] += v[:, -2] - v[:, -1]

    # y-part: centered inside, one-sided 4-point at the contact rows
    # (difference form of 2f0 - 5f1 + 4f2 - f3, exact on constants)
    lap[1:-1, :] += v[:-2, :] - 2.0 * v[1:-1, :] + v[2:, :]
    lap[0, :] += 2.0 * (v[0, :] - v[1, :]) - 3.0 * (v[1, :] - v[2, :]) + (v[2, :] - v[3, :])
    lap[-1, :] += 2.0 * (v[-1, :] - v[-2, :]) - 3.0 * (v[-2, :] - v[-3, :]) + (v[-3, :] - v[-4, :])

    return ScalarField(f.grid, lap / h2)


def symmetric_difference_error(a: ScalarField, b: ScalarField) -> float:
    """Area of the symmetric difference between two indicator fields."""
    for name, f in (("a", a), ("b", b)):
        if not np.all((f.values == 0.0) | (f.values == 1.0)):
            raise ValueError(f"field {name} is not an indicator (values must be 0 or 1)")
    if a.grid.n != b.grid.n:
        raise ValueError("indicator fields live on different grids")
    return float(a.grid.h ** 2 * np.count_nonzero(a.values != b.values))


# ---------------------------------------------------------------------------
# plain-text serialization
# ---------------------------------------------------------------------------

def save_field(f: ScalarField, path) -> None:
    """Write 'n=<n>' then n rows of n values, bottom row first; exact round-trip."""
    lines = [f"n={f.grid.n}"]
    for j in range(f.grid.n):
        lines.append(" ".join(repr(float(v)) for v in f.values[j]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> ScalarField:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("n="):
            raise ValueError(f"bad field file {path}: expected 'n=<n>' header")
        n = int(header[2:])
        rows = []
        for _ in range(n):
            rows.append([float(tok) for tok in fh.readline().split()])
    values = np.array(rows)
    if values.shape != (n, n):
        raise ValueError(f"bad field file {path}: expected {n}x{n} values")
    return ScalarField(make_grid(n), values)


def save_trace(t: Trace, path) -> None:
    """CSV with header 'x,value', one row per face midpoint."""
    xs = t.grid.cell_x
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for x, v in zip(xs, t.values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")


def load_trace(path, grid: Grid, segment: str) -> Trace:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x,value":
            raise ValueError(f"bad trace file {path}: expected 'x,value' header")
        vals = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _, v = line.split(",")
            vals.append(float(v))
    if len(vals) != grid.n:
        raise ValueError(f"bad trace file {path}: expected {grid.n} rows, got {len(vals)}")
    return Trace(grid, segment, np.array(vals))
