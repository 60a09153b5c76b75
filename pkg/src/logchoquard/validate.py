"""Built-in oracle suite behind the ``validate`` subcommand.

Small-grid cross-checks of the independent computational routes: analytic
kernel values, radial vs 2-d convolution, finite-difference derivative
consistency, and the symmetry of the discrete Hessian form.
"""

from __future__ import annotations

import numpy as np

from .grids import (
    Field2D,
    Grid2D,
    RadialGrid,
    RadialProfile,
    dot_l2,
    gradient_sq_integral,
    lift_radial,
)
from .groundstate import energy_I, grad_I
from .linops import linearized_at
from .logkernel import (
    build_kernel_spectrum,
    convolve,
    gaussian_density,
    radial_log_potential,
    truncated_log_multiplier,
    truncated_log_multiplier_quadrature,
)

EULER_GAMMA = 0.5772156649015328606


def run_validation(seed: int = 99):
    """Returns a list of (name, passed, detail) rows."""
    rng = np.random.default_rng(seed)
    results = []
    grid = Grid2D(128, 128, 14.0, 14.0)
    K = build_kernel_spectrum(grid)

    # 1. kernel multipliers: closed form vs quadrature
    kk = K.pad_wavenumbers().ravel()
    idx = rng.choice(kk.size, 128, replace=False)
    ana = truncated_log_multiplier(kk[idx], K.T)
    qua = truncated_log_multiplier_quadrature(kk[idx], K.T)
    err = float(np.abs(ana - qua).max() / np.abs(ana).max())
    results.append(("kernel_multiplier_quadrature", err < 1e-12, f"rel={err:.2e}"))

    # 2. Gaussian potential at the origin: Euler gamma / 4
    rho = Field2D.from_function(grid, lambda X, Y: np.exp(-(X**2 + Y**2)))
    phi = convolve(rho, K)
    val = phi.values[grid.center_index()]
    err = abs(val - EULER_GAMMA / 4) / (EULER_GAMMA / 4)
    results.append(("gaussian_origin_value", err < 1e-9, f"rel={err:.2e}"))

    # 3. radial engine vs 2-d engine
    rg = RadialGrid.uniform(7.0, 12000)
    w = radial_log_potential(gaussian_density(rg), tail_tol=1e-8)
    lifted = lift_radial(RadialProfile(rg, w.values), grid)
    mask = grid.radii() <= 5.0
    err = float(np.abs(lifted.values - phi.values)[mask].max())
    results.append(("radial_vs_fft_engine", err < 1e-6, f"max={err:.2e}"))

    # 4. energy gradient vs central differences
    u = Field2D.from_function(
        grid, lambda X, Y: 1.7 * np.exp(-((X - 0.4) ** 2 + Y**2))
        + 0.8 * np.exp(-0.7 * (X**2 + (Y + 0.6) ** 2)))
    g = grad_I(u, K)
    worst = 0.0
    for _ in range(4):
        d = Field2D.from_function(
            grid, lambda X, Y: np.exp(-(X - rng.uniform(-1, 1)) ** 2
                                      - (Y - rng.uniform(-1, 1)) ** 2))
        h = 1e-4
        fd = (energy_I(u + h * d, K) - energy_I(u + (-h) * d, K)) / (2 * h)
        exact = dot_l2(g, d)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-300))
    results.append(("gradient_fd_consistency", worst < 1e-6, f"rel={worst:.2e}"))

    # 5. differentiation backends on a resolved mode
    f = Field2D.from_function(grid, lambda X, Y: np.sin(2 * np.pi * X / grid.lx))
    spectral = gradient_sq_integral(f, "spectral")
    fd4 = gradient_sq_integral(f, "fd4")
    target = (2 * np.pi / grid.lx) ** 2 * grid.lx * grid.ly / 2
    err = max(abs(spectral - target), abs(fd4 - spectral)) / target
    results.append(("differentiation_backends", err < 1e-6, f"rel={err:.2e}"))

    # 6. Hessian form symmetry on random pairs
    L = linearized_at(u, K)
    worst = 0.0
    for _ in range(4):
        a = Field2D(grid, rng.standard_normal(grid.shape))
        b = Field2D(grid, rng.standard_normal(grid.shape))
        lhs = dot_l2(Field2D(grid, L.apply_array(a.values)), b)
        rhs = dot_l2(Field2D(grid, L.apply_array(b.values)), a)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    results.append(("hessian_symmetry", worst < 1e-10, f"rel={worst:.2e}"))
    return results
