import numpy as np
import pytest

from dopinv import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure the algorithms."""
    diag = np.full((4, 4), 4.0)
    fx = np.ones((4, 3))
    fy = np.ones((3, 4))
    b = np.ones((4, 4))
    kernels.cg_stencil(diag, fx, fy, b, 1e-8, 100)
    kernels.stencil_matvec(diag, fx, fy, b)
    kernels.signed_distance_reinit(np.ascontiguousarray(b - 0.5), 0.25)
