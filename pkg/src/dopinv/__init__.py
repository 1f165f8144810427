"""Doping-profile identification from voltage-current contact measurements.

Forward model: the linearized near-equilibrium bipolar device on the unit
square. The equilibrium potential solves a nonlinear Poisson problem driven
by the doping profile; the resulting coefficient gamma = exp(V0) enters two
decoupled continuity equations whose conormal data on the top contact is the
measurement. The inverse solver identifies the P-N interface as the zero set
of a level-set function by adjoint-gradient descent on the data misfit.
"""

from .device import (
    DeviceParams,
    ScaledParams,
    built_in_potential,
    device_length_for,
    equilibrium_boundary_densities,
    recombination_auger,
    recombination_srh,
    scale,
    silicon_defaults,
    slotboom_to_densities,
)
from .elliptic import (
    EllipticProblem,
    EllipticSolveError,
    LinearSystem,
    NewtonError,
    assemble,
    flux_gamma1,
    newton_equilibrium,
    solve_spd,
)
from .forward import (
    CURRENT_FLOW,
    POINTWISE,
    DopingField,
    GammaField,
    Measurement,
    MeasurementSet,
    VoltageProfile,
    contact_voltage,
    dn_current_flow,
    dn_pointwise,
    doping_from_gamma,
    equilibrium_gamma,
    load_measurement_set,
    save_measurement_set,
    solve_continuity,
    synthesize_data,
    synthesize_from_gamma,
)
from .grid import (
    GAMMA0,
    GAMMA1,
    Grid,
    ScalarField,
    Trace,
    constant_field,
    constant_trace,
    field_from_function,
    field_laplacian,
    integrate_trace,
    load_field,
    load_trace,
    make_grid,
    save_field,
    save_trace,
    symmetric_difference_error,
    trace_from_function,
)
from .inverse import (
    InversionConfig,
    IterationRecord,
    LevelSetState,
    ReconstructionError,
    ReconstructionResult,
    gamma_from_phi,
    gradient_adjoint,
    gradient_fd,
    init_phi,
    objective,
    reconstruct,
    smoothed_delta,
    smoothed_heaviside,
    write_convergence_csv,
)
from .kernels import NUMBA_ENABLED

__version__ = "0.1.0"
