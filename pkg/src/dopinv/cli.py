"""Command-line driver: phantom generation, forward runs, inversion, gradient checks.

Configs are flat ``key = value`` text files ('#' starts a comment); unknown
keys, duplicates of non-repeatable keys, and out-of-range values are rejected
with exit code 2. All outputs are plain text with exact float round-trips, so
repeated runs of the same config are byte-identical.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 iteration budget
exhausted without a convergence criterion, 5 gradient-check failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .device import built_in_potential
from .elliptic import EllipticSolveError, NewtonError
from .forward import (
    CURRENT_FLOW,
    MEASUREMENT_KINDS,
    POINTWISE,
    DopingField,
    contact_voltage,
    doping_from_gamma,
    equilibrium_gamma,
    load_measurement_set,
    save_measurement_set,
    synthesize_data,
    synthesize_from_gamma,
)
from .grid import make_grid, save_field
from .inverse import (
    InversionConfig,
    LevelSetState,
    ReconstructionError,
    gamma_from_phi,
    gradient_adjoint,
    gradient_fd,
    init_phi,
    reconstruct,
    write_convergence_csv,
)
from .phantoms import (
    PHANTOM_NAMES,
    doping_from_indicator,
    indicator_from_phi,
    phantom_phi,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NO_CONVERGENCE = 4
EXIT_GRADCHECK = 5

GRADCHECK_MAX_N = 16
GRADCHECK_TOL = 1e-4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    grid_n: int = 64
    lambda_sq: float = 1e-3
    mu_n: float = 1.0
    mu_p: float = 0.3
    c_min: float = -10.0
    c_max: float = 10.0
    phantom: str = "halfplane"
    phantom_axis: str = "y"
    phantom_offset: float = 0.5
    phantom_center_x: float = 0.5
    phantom_center_y: float = 0.5
    phantom_radius: float = 0.25
    phantom_x_cut: float = 0.5
    phantom_y_cut: float = 0.5
    c_p_level: float = -5.0
    c_n_level: float = 5.0
    profiles: list[tuple[float, float, float]] = field(default_factory=list)
    kind: str = POINTWISE
    noise_level: float = 0.0
    seed: int = 0
    beta: float = 0.5
    max_iters: int = 200
    tau: float = 1.5
    grad_tol: float = 1e-6
    eps_smooth: float = 2.0
    gamma_p: float | None = None
    gamma_n: float | None = None
    init_shape: str = "circle"
    init_center_x: float = 0.5
    init_center_y: float = 0.8
    init_radius: float = 0.35
    init_axis: str = "y"
    init_offset: float = 0.5
    record_every: int = 1
    data_dir: str | None = None
    out_dir: str = "out"

    def resolved_gamma_levels(self) -> tuple[float, float]:
        """Two-level contrast; defaults derive from the doping levels."""
        gp = self.gamma_p if self.gamma_p is not None else math.exp(built_in_potential(self.c_p_level))
        gn = self.gamma_n if self.gamma_n is not None else math.exp(built_in_potential(self.c_n_level))
        return gp, gn


_INT_KEYS = {"grid_n", "seed", "max_iters", "record_every"}
_FLOAT_KEYS = {
    "lambda_sq", "mu_n", "mu_p", "c_min", "c_max",
    "phantom_offset", "phantom_center_x", "phantom_center_y", "phantom_radius",
    "phantom_x_cut", "phantom_y_cut", "c_p_level", "c_n_level",
    "noise_level", "beta", "tau", "grad_tol", "eps_smooth", "gamma_p", "gamma_n",
    "init_center_x", "init_center_y", "init_radius", "init_offset",
}
_STR_KEYS = {"phantom", "phantom_axis", "kind", "init_shape", "init_axis", "data_dir", "out_dir"}
_REPEATABLE_KEYS = {"profile"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _REPEATABLE_KEYS


def _parse_scalar(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"key '{key}' has a malformed value {raw!r}") from None
    return raw


def _parse_profile(raw: str) -> tuple[float, float, float]:
    parts = raw.replace(",", " ").split()
    if len(parts) != 3:
        raise ConfigError("key 'profile' needs three values: center half_width amplitude")
    try:
        return float(parts[0]), float(parts[1]), float(parts[2])
    except ValueError:
        raise ConfigError(f"key 'profile' has a malformed value {raw!r}") from None


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    seen: set[str] = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = key.strip(), value.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"unknown key '{key}'")
            if key in _REPEATABLE_KEYS:
                cfg.profiles.append(_parse_profile(value))
                continue
            if key in seen:
                raise ConfigError(f"duplicate key '{key}'")
            seen.add(key)
            setattr(cfg, key, _parse_scalar(key, value))
    _validate(cfg)
    return cfg


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _validate(cfg: RunConfig) -> None:
    _require(cfg.grid_n >= 4, "key 'grid_n' must be at least 4")
    _require(cfg.lambda_sq > 0, "key 'lambda_sq' must be positive")
    _require(cfg.mu_n > 0, "key 'mu_n' must be positive")
    _require(cfg.mu_p > 0, "key 'mu_p' must be positive")
    _require(cfg.c_min < cfg.c_max, "key 'c_min' must be below c_max")
    _require(cfg.phantom in PHANTOM_NAMES, f"key 'phantom' must be one of {PHANTOM_NAMES}")
    _require(cfg.phantom_axis in ("x", "y"), "key 'phantom_axis' must be 'x' or 'y'")
    _require(cfg.c_p_level <= cfg.c_n_level, "key 'c_p_level' must not exceed c_n_level")
    _require(cfg.c_min <= cfg.c_p_level <= cfg.c_max, "key 'c_p_level' violates the doping bounds")
    _require(cfg.c_min <= cfg.c_n_level <= cfg.c_max, "key 'c_n_level' violates the doping bounds")
    _require(cfg.kind in MEASUREMENT_KINDS, f"key 'kind' must be one of {MEASUREMENT_KINDS}")
    _require(cfg.noise_level >= 0, "key 'noise_level' must be nonnegative")
    _require(cfg.beta >= 0, "key 'beta' must be nonnegative")
    _require(cfg.max_iters >= 1, "key 'max_iters' must be at least 1")
    _require(cfg.tau >= 1, "key 'tau' must be at least 1")
    _require(cfg.grad_tol > 0, "key 'grad_tol' must be positive")
    _require(cfg.eps_smooth > 0, "key 'eps_smooth' must be positive")
    if cfg.gamma_p is not None or cfg.gamma_n is not None:
        gp, gn = cfg.resolved_gamma_levels()
        _require(0 < gp < gn, "keys 'gamma_p'/'gamma_n' must satisfy 0 < gamma_p < gamma_n")
    _require(cfg.init_shape in ("circle", "halfplane"), "key 'init_shape' must be circle or halfplane")
    _require(cfg.init_axis in ("x", "y"), "key 'init_axis' must be 'x' or 'y'")
    _require(cfg.record_every >= 1, "key 'record_every' must be at least 1")
    for center, half_width, _ in cfg.profiles:
        _require(half_width > 0, "key 'profile' needs a positive half_width")
        _require(0.0 <= center <= 1.0, "key 'profile' needs a center inside [0, 1]")


def _gamma_levels_strict(cfg: RunConfig) -> tuple[float, float]:
    gp, gn = cfg.resolved_gamma_levels()
    if not 0 < gp < gn:
        raise ConfigError(
            "keys 'gamma_p'/'gamma_n' (possibly derived from the doping levels) "
            "must satisfy 0 < gamma_p < gamma_n"
        )
    return gp, gn


def _phantom_params(cfg: RunConfig) -> dict:
    if cfg.phantom == "halfplane":
        return {"axis": cfg.phantom_axis, "offset": cfg.phantom_offset}
    if cfg.phantom == "circle":
        return {"center": (cfg.phantom_center_x, cfg.phantom_center_y), "radius": cfg.phantom_radius}
    return {"x_cut": cfg.phantom_x_cut, "y_cut": cfg.phantom_y_cut}


def _init_phi(cfg: RunConfig, grid):
    if cfg.init_shape == "circle":
        return init_phi(grid, "circle", center=(cfg.init_center_x, cfg.init_center_y),
                        radius=cfg.init_radius)
    return init_phi(grid, "halfplane", axis=cfg.init_axis, offset=cfg.init_offset)


def _profiles(cfg: RunConfig, grid):
    specs = cfg.profiles if cfg.profiles else [(0.5, 0.25, 1.0)]
    return [contact_voltage(grid, c, hw, amp) for c, hw, amp in specs]


def cmd_phantom(cfg: RunConfig, outdir: Path) -> int:
    grid = make_grid(cfg.grid_n)
    phi = phantom_phi(grid, cfg.phantom, **_phantom_params(cfg))
    indicator = indicator_from_phi(phi)
    doping = doping_from_indicator(indicator, cfg.c_p_level, cfg.c_n_level, cfg.c_min, cfg.c_max)
    gamma = equilibrium_gamma(doping, cfg.lambda_sq)
    outdir.mkdir(parents=True, exist_ok=True)
    save_field(doping.field, outdir / "doping.txt")
    save_field(gamma.field, outdir / "gamma.txt")
    save_field(indicator, outdir / "indicator.txt")
    return EXIT_OK


def cmd_forward(cfg: RunConfig, outdir: Path) -> int:
    grid = make_grid(cfg.grid_n)
    phi = phantom_phi(grid, cfg.phantom, **_phantom_params(cfg))
    doping = doping_from_indicator(
        indicator_from_phi(phi), cfg.c_p_level, cfg.c_n_level, cfg.c_min, cfg.c_max
    )
    ms = synthesize_data(
        doping, cfg.lambda_sq, _profiles(cfg, grid), kind=cfg.kind,
        noise_level=cfg.noise_level, seed=cfg.seed, mu_n=cfg.mu_n, mu_p=cfg.mu_p,
    )
    save_measurement_set(ms, outdir)
    if cfg.kind == CURRENT_FLOW:
        for _, measurement in ms.entries:
            print(repr(float(measurement.scalar)))
    return EXIT_OK


def cmd_invert(cfg: RunConfig, outdir: Path) -> int:
    grid = make_grid(cfg.grid_n)
    gp, gn = _gamma_levels_strict(cfg)
    ground_truth = None
    if cfg.data_dir is not None:
        data_path = Path(cfg.data_dir)
        if not (data_path / "manifest.txt").exists():
            raise ConfigError(f"key 'data_dir' names no measurement manifest: {data_path}")
        data = load_measurement_set(data_path)
        if data.grid.n != grid.n:
            raise ConfigError(
                f"key 'data_dir' holds measurements for n={data.grid.n}, config says {grid.n}"
            )
    else:
        # inline synthesis under the two-level assumption: the truth gamma is
        # the level-set parametrization of the phantom interface
        phi_truth = phantom_phi(grid, cfg.phantom, **_phantom_params(cfg))
        truth_state = LevelSetState(phi_truth, gp, gn, eps_smooth=cfg.eps_smooth)
        data = synthesize_from_gamma(
            gamma_from_phi(truth_state), _profiles(cfg, grid), kind=cfg.kind,
            noise_level=cfg.noise_level, seed=cfg.seed, mu_n=cfg.mu_n, mu_p=cfg.mu_p,
        )
        ground_truth = indicator_from_phi(phi_truth)

    init = LevelSetState(_init_phi(cfg, grid), gp, gn, eps_smooth=cfg.eps_smooth)
    inv_cfg = InversionConfig(
        step_size=cfg.beta, max_iters=cfg.max_iters, discrepancy_tau=cfg.tau,
        grad_tol=cfg.grad_tol, kind=cfg.kind, record_every=cfg.record_every,
    )
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        result = reconstruct(data, inv_cfg, init, ground_truth=ground_truth,
                             mu_n=cfg.mu_n, mu_p=cfg.mu_p)
    except ReconstructionError as exc:
        if exc.partial_result is not None:
            write_convergence_csv(exc.partial_result, outdir / "convergence.csv")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    write_convergence_csv(result, outdir / "convergence.csv")
    final_gamma = gamma_from_phi(result.state)
    save_field(result.state.phi, outdir / "phi.txt")
    save_field(final_gamma.field, outdir / "gamma.txt")
    save_field(indicator_from_phi(result.state.phi), outdir / "indicator.txt")
    save_field(
        doping_from_gamma(final_gamma, cfg.lambda_sq, cfg.c_min, cfg.c_max).field,
        outdir / "doping.txt",
    )
    print(f"stop_reason = {result.stop_reason}")
    print(f"final_residual = {result.final_residual!r}")
    return EXIT_OK if result.stop_reason != "max_iters" else EXIT_NO_CONVERGENCE


def cmd_gradcheck(cfg: RunConfig) -> int:
    if cfg.grid_n > GRADCHECK_MAX_N:
        raise ConfigError(
            f"key 'grid_n' must be at most {GRADCHECK_MAX_N} for gradcheck (oracle cost), got {cfg.grid_n}"
        )
    grid = make_grid(cfg.grid_n)
    gp, gn = _gamma_levels_strict(cfg)
    phi_truth = phantom_phi(grid, cfg.phantom, **_phantom_params(cfg))
    data = synthesize_from_gamma(
        gamma_from_phi(LevelSetState(phi_truth, gp, gn, eps_smooth=cfg.eps_smooth)),
        _profiles(cfg, grid), kind=cfg.kind, noise_level=cfg.noise_level, seed=cfg.seed,
        mu_n=cfg.mu_n, mu_p=cfg.mu_p,
    )
    rng = np.random.default_rng(cfg.seed)
    phi = _init_phi(cfg, grid).values + 0.05 * rng.standard_normal((grid.n, grid.n))
    state = LevelSetState(_init_phi(cfg, grid).with_values(phi), gp, gn, eps_smooth=cfg.eps_smooth)

    ga = gradient_adjoint(state, data, cfg.mu_n, cfg.mu_p, rtol=1e-12).values
    gf = gradient_fd(state, data, cfg.mu_n, cfg.mu_p, rtol=1e-12).values
    norm_a = float(np.linalg.norm(ga))
    norm_f = float(np.linalg.norm(gf))
    if norm_a < 1e-12 and norm_f < 1e-12:
        print(f"adjoint_norm = {norm_a!r}")
        print(f"fd_norm = {norm_f!r}")
        print("relative_discrepancy = 0.0  # degenerate zero-gradient case")
        return EXIT_OK
    rel = float(np.linalg.norm(ga - gf)) / max(norm_f, 1e-30)
    print(f"adjoint_norm = {norm_a!r}")
    print(f"fd_norm = {norm_f!r}")
    print(f"relative_discrepancy = {rel!r}")
    return EXIT_OK if rel <= GRADCHECK_TOL else EXIT_GRADCHECK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dopinv",
        description="Doping-profile forward simulation and level-set inversion on the unit square.",
    )
    parser.add_argument("command", choices=("phantom", "forward", "invert", "gradcheck"))
    parser.add_argument("--config", required=True, help="path to a key=value config file")
    parser.add_argument("--out", default=None, help="output directory (overrides config out_dir)")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        outdir = Path(args.out) if args.out is not None else Path(cfg.out_dir)
        if args.command == "phantom":
            return cmd_phantom(cfg, outdir)
        if args.command == "forward":
            return cmd_forward(cfg, outdir)
        if args.command == "invert":
            return cmd_invert(cfg, outdir)
        return cmd_gradcheck(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EllipticSolveError, NewtonError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
