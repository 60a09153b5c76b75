"""External potentials and the semiclassical concentration experiment.

Potentials are capped quadratics around a critical point x0: the quadratic
model is multiplied by a C^2 radial cutoff so the potential is globally
bounded with bounded derivatives, while staying exactly quadratic inside
the flattening radius.  The experiment sweeps eps, locates the minimizer
xi(eps) of the reduced energy, assembles the rescaled critical point
u_eps = z_xi + w, and maps it back to the physical solution pair
(v_eps, E_eps) with E_eps = eps^{-2} Phi_{v_eps} + c_eps and
c_eps = eps^{-2} log(eps) ||v_eps||_2^2 (log-kernel convention without the
1/2pi, matching the displayed far-field normalization of E).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import LogChoquardError, ResolutionError
from .grids import Field2D, Grid2D, integrate, resolution_guard
from .groundstate import (
    GroundStateRecord,
    SolveOptions,
    ground_state_field,
    solve_ground_state,
)
from .logkernel import TruncatedKernelSpectrum, build_kernel_spectrum, convolve_array
from .reduction import (
    ReductionContext,
    ReducedFunctionalTable,
    grad_I_eps,
    locate_minimizer,
    make_xi_grid,
    reduced_theta,
    solve_correction,
)

__all__ = [
    "PotentialSpec",
    "SolutionPair",
    "ConcentrationOptions",
    "ConcentrationReport",
    "IncompleteSweepError",
    "eval_potential",
    "assemble_solution_pair",
    "run_concentration",
]


class IncompleteSweepError(LogChoquardError):
    """Some eps values of a sweep failed; carries the partial report."""

    def __init__(self, message, report=None, failures=None):
        super().__init__(message)
        self.report = report
        self.failures = failures or {}


def _smoothstep(s: np.ndarray) -> np.ndarray:
    """C^2 ramp: 0 -> 1 on [0, 1] with vanishing first/second derivatives."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def _smoothstep_d1(s: np.ndarray) -> np.ndarray:
    inside = (s > 0) & (s < 1)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 30.0 * s**2 * (1.0 - s) ** 2, 0.0)


def _smoothstep_d2(s: np.ndarray) -> np.ndarray:
    inside = (s > 0) & (s < 1)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 60.0 * s * (1.0 - 3.0 * s + 2.0 * s**2), 0.0)


@dataclass
class PotentialSpec:
    """Capped quadratic potential around a nondegenerate critical point.

    V(x) = v0 + [g.(x-x0) + 0.5 (x-x0)^T H (x-x0)] * chi(|x-x0|/flat_radius)

    with chi a C^2 cutoff: 1 inside the flattening radius, 0 beyond twice
    it, so V is constant (= v0) far away and all assumptions on
    boundedness of V and its first two derivatives hold.  ``grad`` is only
    allowed for kind="custom" (states with a nonzero slope at x0).
    """

    kind: str = "quadratic-min"
    v0: float = 1.0
    x0: tuple[float, float] = (0.0, 0.0)
    hessian: np.ndarray = dc_field(default_factory=lambda: np.eye(2))
    flat_radius: float = 1.6
    grad: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.hessian = np.asarray(self.hessian, dtype=float).reshape(2, 2)
        if not np.allclose(self.hessian, self.hessian.T, atol=1e-12):
            raise ValueError("hessian must be symmetric")
        if self.v0 <= 0:
            raise ValueError("v0 must be positive")
        if self.flat_radius <= 0:
            raise ValueError("flat_radius must be positive")
        eig = np.linalg.eigvalsh(self.hessian)
        if self.kind == "quadratic-min" and eig.min() <= 0:
            raise ValueError("quadratic-min needs a positive-definite hessian")
        if self.kind == "quadratic-max" and eig.max() >= 0:
            raise ValueError("quadratic-max needs a negative-definite hessian")
        if self.kind not in ("quadratic-min", "quadratic-max", "double-well", "custom"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind != "custom" and any(abs(g) > 0 for g in self.grad):
            raise ValueError("a slope at x0 is only allowed for kind='custom'")
        if self._inf_estimate() <= 0:
            raise ValueError(
                "potential dips to a nonpositive value inside the cap annulus; "
                "shrink flat_radius or the quadratic coefficients"
            )

    def _quadratic(self, dx, dy):
        H = self.hessian
        g = self.grad
        return g[0] * dx + g[1] * dy + 0.5 * (
            H[0, 0] * dx**2 + 2.0 * H[0, 1] * dx * dy + H[1, 1] * dy**2
        )

    def _chi(self, t):
        return 1.0 - _smoothstep(t - 1.0)

    def __call__(self, px, py):
        dx = np.asarray(px, dtype=float) - self.x0[0]
        dy = np.asarray(py, dtype=float) - self.x0[1]
        t = np.hypot(dx, dy) / self.flat_radius
        return self.v0 + self._quadratic(dx, dy) * self._chi(t)

    def derivatives(self, px, py):
        """(V, grad V, Hess V) at one point, analytic."""
        dx = float(px) - self.x0[0]
        dy = float(py) - self.x0[1]
        y = np.array([dx, dy])
        R = self.flat_radius
        rr = float(np.hypot(dx, dy))
        t = rr / R
        H = self.hessian
        g = np.asarray(self.grad, dtype=float)
        Q = float(self._quadratic(dx, dy))
        dQ = g + H @ y
        chi = float(self._chi(t))
        value = self.v0 + Q * chi
        if t <= 1.0 or t >= 2.0 or rr == 0.0:
            # cutoff locally constant: only the quadratic varies
            return value, dQ * chi, H * chi
        dchi = -_smoothstep_d1(t - 1.0)
        d2chi = -_smoothstep_d2(t - 1.0)
        gt = y / (R * rr)  # gradient of t
        hess_t = (np.eye(2) / rr - np.outer(y, y) / rr**3) / R
        grad = dQ * chi + Q * dchi * gt
        hess = (
            H * chi
            + np.outer(dQ, gt) * dchi
            + np.outer(gt, dQ) * dchi
            + Q * (d2chi * np.outer(gt, gt) + dchi * hess_t)
        )
        return value, grad, hess

    def _inf_estimate(self, n_dir: int = 64, n_rad: int = 300) -> float:
        angles = np.linspace(0.0, 2.0 * np.pi, n_dir, endpoint=False)
        radii = np.linspace(0.0, 2.2 * self.flat_radius, n_rad)
        A, Rr = np.meshgrid(angles, radii, indexing="ij")
        px = self.x0[0] + Rr * np.cos(A)
        py = self.x0[1] + Rr * np.sin(A)
        return float(self(px, py).min())


def eval_potential(p: PotentialSpec, x: tuple[float, float]):
    """Value, gradient and Hessian of the capped potential at a point."""
    return p.derivatives(x[0], x[1])


@dataclass
class SolutionPair:
    """Physical-space solution (v_eps, E_eps) with the far-field constant."""

    v_eps: Field2D
    E_eps: Field2D
    c_eps: float
    eps: float
    xi_phys: tuple[float, float]
    peak_width: float
    identity_residual: float = 0.0


def _second_moment_width(f: Field2D) -> float:
    X, Y = f.grid.meshes()
    rho = f.values**2
    mass = rho.sum()
    xbar = (X * rho).sum() / mass
    ybar = (Y * rho).sum() / mass
    var = (((X - xbar) ** 2 + (Y - ybar) ** 2) * rho).sum() / mass
    return float(np.sqrt(var))


def assemble_solution_pair(u_eps: Field2D, eps: float,
                           K: TruncatedKernelSpectrum,
                           xi: tuple[float, float] = (0.0, 0.0),
                           x0: tuple[float, float] = (0.0, 0.0),
                           identity_check: bool = True) -> SolutionPair:
    """Map the rescaled critical point to the physical pair (v_eps, E_eps).

    v_eps(x) = u_eps((x - x0)/eps) on the physical grid sharing node
    indices with the rescaled grid; E_eps comes from the rescaled log
    potential, and the far-field identity
    E_eps = eps^{-2} Phi_{v_eps} + c_eps is re-verified with an
    independent convolution on the physical grid when ``identity_check``.
    """
    rg = u_eps.grid
    phys_grid = Grid2D(rg.nx, rg.ny, eps * rg.lx, eps * rg.ly, x0[0], x0[1])
    v = Field2D(phys_grid, u_eps.values.copy())
    mass_v = integrate(v * v)
    width_u = _second_moment_width(u_eps)
    resolution_guard(rg, 2.0 * width_u, 12)
    # E(x) = omega(x/eps) with omega the 2pi-free rescaled log potential;
    # node values coincide index-by-index with the rescaled grid
    omega = 2.0 * np.pi * convolve_array(u_eps.values**2, K)
    E = Field2D(phys_grid, omega)
    c_eps = float(np.log(eps) / eps**2 * mass_v)
    identity_residual = 0.0
    if identity_check:
        K_phys = build_kernel_spectrum(phys_grid)
        phi_v = 2.0 * np.pi * convolve_array(v.values**2, K_phys)
        resid = E.values - phi_v / eps**2 - c_eps
        identity_residual = float(np.abs(resid).max() / max(np.abs(E.values).max(), 1e-300))
    xi_phys = (eps * xi[0], eps * xi[1])
    return SolutionPair(
        v_eps=v,
        E_eps=E,
        c_eps=c_eps,
        eps=eps,
        xi_phys=xi_phys,
        peak_width=_second_moment_width(v),
        identity_residual=identity_residual,
    )


@dataclass
class ConcentrationOptions:
    nx: int = 256
    box: float = 24.0
    xi_grid_n: int = 5
    xi_max: float = 0.5
    fp_tol: float = 1e-10
    jobs: int = 1
    mode: str = "minimize"
    solve_opts: SolveOptions = dc_field(default_factory=SolveOptions)
    identity_check: bool = True
    kernel_T: float | None = None


@dataclass
class ConcentrationReport:
    gs: GroundStateRecord
    base_state: Field2D
    eps_list: list
    tables: dict
    trajectory: np.ndarray  # rows: eps, xi1, xi2, theta_min, w_norm, residual
    pairs: dict
    u_fields: dict
    tangential: dict
    failures: dict = dc_field(default_factory=dict)


def run_concentration(pot: PotentialSpec, eps_list, opts: ConcentrationOptions | None = None,
                      gs: GroundStateRecord | None = None,
                      base_state: Field2D | None = None,
                      kernel: TruncatedKernelSpectrum | None = None) -> ConcentrationReport:
    """Full concentration experiment over an eps sweep.

    For each eps: tabulate the reduced energy over the xi grid, locate the
    interior minimizer (maximizer for ``mode='maximize'``), resolve the
    correction there, and assemble the physical pair.  The ground state is
    solved once for a = V(x0) and shared across the sweep.
    """
    opts = opts or ConcentrationOptions()
    if opts.mode not in ("minimize", "maximize"):
        raise ValueError("mode must be 'minimize' or 'maximize'")
    eps_list = [float(e) for e in np.atleast_1d(eps_list)]
    if gs is None:
        gs = solve_ground_state(pot.v0, opts=opts.solve_opts)
    grid = Grid2D(opts.nx, opts.nx, opts.box, opts.box)
    if kernel is None:
        kernel = build_kernel_spectrum(grid, T=opts.kernel_T)
    if base_state is None:
        base_state = ground_state_field(gs, grid, kernel)
    xi_grid, shape = make_xi_grid(opts.xi_grid_n, opts.xi_max)
    tables: dict = {}
    pairs: dict = {}
    u_fields: dict = {}
    tangential: dict = {}
    failures: dict = {}
    rows = []
    for eps in eps_list:
        try:
            ctx = ReductionContext.build(gs, base_state, pot, eps, kernel,
                                         fp_tol=opts.fp_tol)
            table = reduced_theta(ctx, xi_grid, shape, jobs=opts.jobs)
            if opts.mode == "maximize":
                flipped = ReducedFunctionalTable(
                    xi_grid=table.xi_grid, theta=-table.theta, gamma=table.gamma,
                    b0=table.b0, shape=table.shape, w_norms=table.w_norms,
                    iterations=table.iterations, converged=table.converged,
                )
                xi_star = locate_minimizer(flipped)
            else:
                xi_star = locate_minimizer(table)
            table.argmin_xi = xi_star
            tables[eps] = table
            corr = solve_correction(ctx, tuple(xi_star))
            local = ctx.at_xi(tuple(xi_star))
            u_eps = local.z + corr.w
            g_full = grad_I_eps(u_eps, local)
            full_res = float(np.abs(g_full.values).max())
            u_fields[eps] = u_eps
            tangential[eps] = corr.residual_tangential
            pairs[eps] = assemble_solution_pair(
                u_eps, eps, kernel, tuple(xi_star), pot.x0,
                identity_check=opts.identity_check)
            rows.append([eps, xi_star[0], xi_star[1],
                         float(table.theta.min() if opts.mode == "minimize"
                               else table.theta.max()),
                         corr.w_norm, full_res])
        except LogChoquardError as exc:  # keep sweeping, report at the end
            failures[eps] = exc
    report = ConcentrationReport(
        gs=gs, base_state=base_state, eps_list=eps_list, tables=tables,
        trajectory=np.asarray(rows), pairs=pairs, u_fields=u_fields,
        tangential=tangential, failures=failures,
    )
    if failures:
        raise IncompleteSweepError(
            f"sweep failed at eps = {sorted(failures)}", report, failures
        )
    return report
