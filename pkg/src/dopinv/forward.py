"""Forward pipeline from doping profile to voltage-current measurements.

The pipeline runs C -> V0 (equilibrium potential) -> gamma = exp(V0), then
solves the two decoupled continuity problems per applied contact voltage and
extracts the total-current data on the top contact, either as the pointwise
trace or as the integrated current flow. The algebraic back-step
C = gamma - 1/gamma - lambda_sq * lap(ln gamma) is also provided.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import EllipticProblem, assemble, flux_gamma1, newton_equilibrium, solve_spd
from .grid import (
    GAMMA0,
    GAMMA1,
    Grid,
    ScalarField,
    Trace,
    constant_trace,
    field_laplacian,
    integrate_trace,
    load_trace,
    make_grid,
    save_trace,
)

POINTWISE = "pointwise"
CURRENT_FLOW = "current_flow"
MEASUREMENT_KINDS = (POINTWISE, CURRENT_FLOW)

C_MIN_DEFAULT = -10.0
C_MAX_DEFAULT = 10.0


@dataclass(frozen=True)
class DopingField:
    """Net doping C in units of the intrinsic density, confined to [c_min, c_max]."""

    field: ScalarField
    c_min: float = C_MIN_DEFAULT
    c_max: float = C_MAX_DEFAULT
    clamped_cells: int = 0  # nonzero when produced by a clamping operation

    def __post_init__(self):
        if not self.c_min < self.c_max:
            raise ValueError(f"need c_min < c_max, got [{self.c_min}, {self.c_max}]")
        v = self.field.values
        if np.any(v < self.c_min) or np.any(v > self.c_max):
            raise ValueError("doping values violate the configured bounds")


@dataclass(frozen=True)
class GammaField:
    """Strictly positive equilibrium coefficient gamma = exp(V0)."""

    field: ScalarField

    def __post_init__(self):
        if np.any(self.field.values <= 0.0):
            raise ValueError("gamma must be strictly positive")

    @property
    def inverse(self) -> ScalarField:
        return ScalarField(self.field.grid, 1.0 / self.field.values)


@dataclass(frozen=True)
class VoltageProfile:
    """Applied potential on the bottom contact; implicitly zero on the top one."""

    trace: Trace

    def __post_init__(self):
        if self.trace.segment != GAMMA0:
            raise ValueError("voltage profiles live on gamma0")

    @property
    def grid(self) -> Grid:
        return self.trace.grid


@dataclass(frozen=True)
class Measurement:
    kind: str
    pointwise: Trace | None = None
    scalar: float | None = None

    def __post_init__(self):
        if self.kind not in MEASUREMENT_KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.kind == POINTWISE and (self.pointwise is None or self.scalar is not None):
            raise ValueError("pointwise measurement must carry exactly a trace payload")
        if self.kind == CURRENT_FLOW and (self.scalar is None or self.pointwise is not None):
            raise ValueError("current-flow measurement must carry exactly a scalar payload")


@dataclass(frozen=True)
class MeasurementSet:
    """Measured data per voltage profile, plus the clean counterparts.

    `delta_data` is the aggregate data-space norm of the injected noise,
    used by the discrepancy stopping rule.
    """

    entries: tuple[tuple[VoltageProfile, Measurement], ...]
    noise_level: float = 0.0
    seed: int = 0
    clean: tuple[Measurement, ...] | None = None
    delta_data: float = 0.0

    def __post_init__(self):
        if len(self.entries) == 0:
            raise ValueError("measurement set must be nonempty")
        kinds = {m.kind for _, m in self.entries}
        if len(kinds) != 1:
            raise ValueError("measurement set must be of homogeneous kind")
        if self.noise_level < 0.0:
            raise ValueError("noise level must be nonnegative")
        if self.clean is not None and len(self.clean) != len(self.entries):
            raise ValueError("clean measurements must match entries one-to-one")

    @property
    def kind(self) -> str:
        return self.entries[0][1].kind

    @property
    def grid(self) -> Grid:
        return self.entries[0][0].grid


def equilibrium_gamma(doping: DopingField, lambda_sq: float, tol: float = 1e-10) -> GammaField:
    """gamma = exp(V0) with V0 the equilibrium potential of the doping profile."""
    grid = doping.field.grid
    v0 = newton_equilibrium(grid, doping.field, lambda_sq, tol=tol)
    return GammaField(ScalarField(grid, np.exp(v0.values)))


def solve_continuity(
    gamma: GammaField,
    profile: VoltageProfile,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> tuple[ScalarField, ScalarField]:
    """Solve the two decoupled continuity problems for one applied voltage.

    u solves div(mu_n gamma grad u) = 0 with u = -U on the bottom contact;
    v solves div(mu_p gamma^-1 grad v) = 0 with v = +U there; both vanish on
    the top contact and have insulated sides. Constant mobilities divide out
    of the solves, so the solutions do not depend on mu_n, mu_p.
    """
    del mu_n, mu_p  # constants cancel in the homogeneous problems
    grid = gamma.field.grid
    zero_top = constant_trace(grid, GAMMA1, 0.0)
    minus_u = Trace(grid, GAMMA0, -profile.trace.values)
    u = solve_spd(assemble(EllipticProblem(grid, gamma.field, minus_u, zero_top)), rtol=rtol)
    v = solve_spd(assemble(EllipticProblem(grid, gamma.inverse, profile.trace, zero_top)), rtol=rtol)
    return u, v


def dn_pointwise(
    gamma: GammaField,
    profile: VoltageProfile,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> Trace:
    """Total current-density trace mu_n gamma u_nu - mu_p gamma^-1 v_nu on the top contact."""
    grid = gamma.field.grid
    u, v = solve_continuity(gamma, profile, rtol=rtol)
    flux_u = flux_gamma1(u, gamma.field, grid)
    flux_v = flux_gamma1(v, gamma.inverse, grid)
    return Trace(grid, GAMMA1, mu_n * flux_u.values - mu_p * flux_v.values)


def dn_current_flow(
    gamma: GammaField,
    profile: VoltageProfile,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> float:
    """Averaged outflow current: midpoint quadrature of the pointwise trace."""
    return integrate_trace(dn_pointwise(gamma, profile, mu_n, mu_p, rtol=rtol))


def doping_from_gamma(
    gamma: GammaField,
    lambda_sq: float,
    c_min: float = C_MIN_DEFAULT,
    c_max: float = C_MAX_DEFAULT,
) -> DopingField:
    """Recover C = gamma - 1/gamma - lambda_sq * lap(ln gamma).

    Values outside [c_min, c_max] are clamped; the number of clamped cells is
    reported on the returned field rather than failing.
    """
    grid = gamma.field.grid
    g = gamma.field.values
    log_gamma = ScalarField(grid, np.log(g))
    c = g - 1.0 / g - lambda_sq * field_laplacian(log_gamma).values
    clamped = int(np.count_nonzero((c < c_min) | (c > c_max)))
    c = np.clip(c, c_min, c_max)
    return DopingField(ScalarField(grid, c), c_min, c_max, clamped_cells=clamped)


def contact_voltage(
    grid: Grid,
    center: float = 0.5,
    half_width: float = 0.25,
    amplitude: float = 1.0,
) -> VoltageProfile:
    """Piecewise-constant contact voltage: amplitude where |x - center| <= half_width.

    A half width >= 0.5 with a centered contact selects every face (the full
    contact); selecting no face at all is a configuration error.
    """
    if not half_width > 0.0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    xs = grid.cell_x
    mask = np.abs(xs - center) <= half_width
    if not np.any(mask):
        raise ValueError("degenerate contact: no boundary face inside the support")
    return VoltageProfile(Trace(grid, GAMMA0, np.where(mask, float(amplitude), 0.0)))


def _clean_measurement(gamma, profile, kind, mu_n, mu_p, rtol) -> Measurement:
    if kind == POINTWISE:
        return Measurement(POINTWISE, pointwise=dn_pointwise(gamma, profile, mu_n, mu_p, rtol))
    return Measurement(CURRENT_FLOW, scalar=dn_current_flow(gamma, profile, mu_n, mu_p, rtol))


def _entry_norm_sq(grid: Grid, kind: str, values: np.ndarray | float) -> float:
    if kind == POINTWISE:
        return float(grid.h * np.sum(np.asarray(values) ** 2))
    return float(values) ** 2


def synthesize_from_gamma(
    gamma: GammaField,
    profiles: list[VoltageProfile],
    kind: str = POINTWISE,
    noise_level: float = 0.0,
    seed: int = 0,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> MeasurementSet:
    """Forward-model every profile and add seeded Gaussian noise.

    The per-entry noise standard deviation is noise_level times the max-norm
    of that entry's clean output, so the level is relative and comparable
    across measurement kinds.
    """
    if kind not in MEASUREMENT_KINDS:
        raise ValueError(f"unknown measurement kind {kind!r}")
    if noise_level < 0.0:
        raise ValueError("noise level must be nonnegative")
    grid = gamma.field.grid
    rng = np.random.default_rng(seed)
    entries = []
    clean = []
    delta_sq = 0.0
    for profile in profiles:
        clean_m = _clean_measurement(gamma, profile, kind, mu_n, mu_p, rtol)
        if noise_level == 0.0:
            noisy_m = clean_m
        elif kind == POINTWISE:
            sigma = noise_level * float(np.max(np.abs(clean_m.pointwise.values)))
            noise = rng.normal(0.0, sigma, size=grid.n) if sigma > 0.0 else np.zeros(grid.n)
            noisy_m = Measurement(
                POINTWISE, pointwise=Trace(grid, GAMMA1, clean_m.pointwise.values + noise)
            )
            delta_sq += _entry_norm_sq(grid, kind, noise)
        else:
            sigma = noise_level * abs(clean_m.scalar)
            noise = float(rng.normal(0.0, sigma)) if sigma > 0.0 else 0.0
            noisy_m = Measurement(CURRENT_FLOW, scalar=clean_m.scalar + noise)
            delta_sq += noise ** 2
        entries.append((profile, noisy_m))
        clean.append(clean_m)
    return MeasurementSet(
        entries=tuple(entries),
        noise_level=noise_level,
        seed=seed,
        clean=tuple(clean),
        delta_data=float(np.sqrt(delta_sq)),
    )


def synthesize_data(
    doping: DopingField,
    lambda_sq: float,
    profiles: list[VoltageProfile],
    kind: str = POINTWISE,
    noise_level: float = 0.0,
    seed: int = 0,
    mu_n: float = 1.0,
    mu_p: float = 1.0,
    rtol: float = 1e-10,
) -> MeasurementSet:
    """Run the full pipeline C -> gamma -> data for every voltage profile."""
    gamma = equilibrium_gamma(doping, lambda_sq)
    return synthesize_from_gamma(gamma, profiles, kind, noise_level, seed, mu_n, mu_p, rtol)


# ---------------------------------------------------------------------------
# measurement-set serialization: per-entry CSV files plus a manifest
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.txt"


def save_measurement_set(ms: MeasurementSet, outdir) -> None:
    from pathlib import Path

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = ms.grid
    clean = ms.clean if ms.clean is not None else tuple(m for _, m in ms.entries)
    lines = [
        f"kind = {ms.kind}",
        f"grid_n = {grid.n}",
        f"noise_level = {float(ms.noise_level)!r}",
        f"seed = {ms.seed}",
        f"delta_data = {float(ms.delta_data)!r}",
        f"entries = {len(ms.entries)}",
    ]
    for k, ((profile, noisy), clean_m) in enumerate(zip(ms.entries, clean)):
        pfile = f"profile_{k:03d}.csv"
        mfile = f"measurement_{k:03d}.csv"
        save_trace(profile.trace, outdir / pfile)
        with open(outdir / mfile, "w") as fh:
            if ms.kind == POINTWISE:
                fh.write("x,clean,noisy\n")
                for x, c, nv in zip(grid.cell_x, clean_m.pointwise.values, noisy.pointwise.values):
                    fh.write(f"{float(x)!r},{float(c)!r},{float(nv)!r}\n")
            else:
                fh.write("value_clean,value_noisy\n")
                fh.write(f"{float(clean_m.scalar)!r},{float(noisy.scalar)!r}\n")
        lines.append(f"profile_{k} = {pfile}")
        lines.append(f"measurement_{k} = {mfile}")
    with open(outdir / MANIFEST_NAME, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_measurement_set(indir) -> MeasurementSet:
    from pathlib import Path

    indir = Path(indir)
    manifest = indir / MANIFEST_NAME
    if not manifest.exists():
        raise FileNotFoundError(f"no measurement manifest at {manifest}")
    meta = {}
    with open(manifest) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    kind = meta["kind"]
    grid = make_grid(int(meta["grid_n"]))
    n_entries = int(meta["entries"])
    entries = []
    clean = []
    for k in range(n_entries):
        profile = VoltageProfile(load_trace(indir / meta[f"profile_{k}"], grid, GAMMA0))
        with open(indir / meta[f"measurement_{k}"]) as fh:
            header = fh.readline().strip()
            rows = [line.strip().split(",") for line in fh if line.strip()]
        if kind == POINTWISE:
            if header != "x,clean,noisy":
                raise ValueError(f"bad pointwise measurement file for entry {k}")
            cvals = np.array([float(r[1]) for r in rows])
            nvals = np.array([float(r[2]) for r in rows])
            clean.append(Measurement(POINTWISE, pointwise=Trace(grid, GAMMA1, cvals)))
            entries.append((profile, Measurement(POINTWISE, pointwise=Trace(grid, GAMMA1, nvals))))
        else:
            if header != "value_clean,value_noisy" or len(rows) != 1:
                raise ValueError(f"bad current-flow measurement file for entry {k}")
            clean.append(Measurement(CURRENT_FLOW, scalar=float(rows[0][0])))
            entries.append((profile, Measurement(CURRENT_FLOW, scalar=float(rows[0][1]))))
    return MeasurementSet(
        entries=tuple(entries),
        noise_level=float(meta["noise_level"]),
        seed=int(meta["seed"]),
        clean=tuple(clean),
        delta_data=float(meta["delta_data"]),
    )
