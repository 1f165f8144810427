"""Physical constants, unit scaling, and closed-form device physics.

Convention: the model is nondimensionalized by measuring densities (n, p, C)
in units of the intrinsic density and potentials in units of the thermal
voltage. In these units the equilibrium potential equation reads

    lambda_sq * lap(V0) = exp(V0) - exp(-V0) - C

with lambda_sq the dimensionless Debye parameter produced by `scale`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VACUUM_PERMITTIVITY = 8.85e-14  # A s / (V cm)
ELEMENTARY_CHARGE = 1.6e-19  # A s


@dataclass(frozen=True)
class DeviceParams:
    """Physical device constants in CGS-flavored semiconductor units."""

    permittivity: float  # A s / (V cm)
    elementary_charge: float  # A s
    thermal_voltage: float  # V
    intrinsic_density: float  # 1 / cm^3
    mobility_n: float  # cm^2 / (V s)
    mobility_p: float  # cm^2 / (V s)
    auger_cn: float  # cm^6 / s
    auger_cp: float  # cm^6 / s
    srh_tau_n: float  # s
    srh_tau_p: float  # s

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0.0:
                raise ValueError(f"DeviceParams.{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless model parameters for a device of a given edge length."""

    lambda_sq: float
    mu_n: float
    mu_p: float

    def __post_init__(self):
        if not self.lambda_sq > 0.0:
            raise ValueError(f"lambda_sq must be positive, got {self.lambda_sq}")
        if not (self.mu_n > 0.0 and self.mu_p > 0.0):
            raise ValueError("scaled mobilities must be positive")


def silicon_defaults() -> DeviceParams:
    """Room-temperature silicon values."""
    return DeviceParams(
        permittivity=11.9 * VACUUM_PERMITTIVITY,
        elementary_charge=ELEMENTARY_CHARGE,
        thermal_voltage=0.0259,
        intrinsic_density=1.0e10,
        mobility_n=1500.0,
        mobility_p=450.0,
        auger_cn=2.8e-31,
        auger_cp=9.9e-32,
        srh_tau_n=1.0e-6,
        srh_tau_p=1.0e-5,
    )


def scale(params: DeviceParams, device_length: float) -> ScaledParams:
    """Nondimensionalize for a square device of edge `device_length` (cm).

    lambda_sq = eps * U_T / (q * n_i * L^2); mobilities are normalized by the
    electron mobility so mu_n == 1.
    """
    if not device_length > 0.0:
        raise ValueError(f"device_length must be positive, got {device_length}")
    lambda_sq = (params.permittivity * params.thermal_voltage) / (
        params.elementary_charge * params.intrinsic_density * device_length ** 2
    )
    return ScaledParams(lambda_sq=lambda_sq, mu_n=1.0, mu_p=params.mobility_p / params.mobility_n)


def slotboom_to_densities(potential, u, v):
    """Carrier densities (n, p) from the exponentially rescaled variables.

    n = exp(V) * u, p = exp(-V) * v, all in units of the intrinsic density.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0.0) or np.any(v < 0.0):
        raise ValueError("slotboom variables must be nonnegative")
    potential = np.asarray(potential, dtype=np.float64)
    n = np.exp(potential) * u
    p = np.exp(-potential) * v
    if n.ndim == 0:
        return float(n), float(p)
    return n, p


def equilibrium_boundary_densities(c):
    """Contact carrier densities (n_D, p_D) for net doping c (units of n_i).

    Solves n - p = c with n * p = 1; evaluated via the numerically large
    root so the product identity holds to machine precision for any |c|.
    """
    c_arr = np.asarray(c, dtype=np.float64)
    s = np.sqrt(c_arr * c_arr + 4.0)
    big = 0.5 * (np.abs(c_arr) + s)
    small = 1.0 / big
    n_d = np.where(c_arr >= 0.0, big, small)
    p_d = np.where(c_arr >= 0.0, small, big)
    if c_arr.ndim == 0:
        return float(n_d), float(p_d)
    return n_d, p_d


def built_in_potential(c):
    """Equilibrium contact potential asinh(c / 2) in thermal-voltage units."""
    out = np.arcsinh(np.asarray(c, dtype=np.float64) / 2.0)
    return float(out) if out.ndim == 0 else out


def recombination_srh(n, p, params: DeviceParams):
    """Shockley-Read-Hall rate (n p - 1) / (tau_n (n+1) + tau_p (p+1))."""
    return (n * p - 1.0) / (params.srh_tau_n * (n + 1.0) + params.srh_tau_p * (p + 1.0))


def recombination_auger(n, p, params: DeviceParams):
    """Auger rate (C_n n + C_p p) (n p - 1)."""
    return (params.auger_cn * n + params.auger_cp * p) * (n * p - 1.0)


def device_length_for(params: DeviceParams, lambda_sq: float) -> float:
    """Edge length (cm) at which `scale` yields the requested lambda_sq."""
    if not lambda_sq > 0.0:
        raise ValueError("lambda_sq must be positive")
    return math.sqrt(
        (params.permittivity * params.thermal_voltage)
        / (params.elementary_charge * params.intrinsic_density * lambda_sq)
    )
