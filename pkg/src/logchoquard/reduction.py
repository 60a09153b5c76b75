"""Finite-dimensional reduction near the manifold of translated ground states.

For each translation xi and small eps, a correction w orthogonal (in the
potential-weighted product) to the tangent space of the manifold is found
so that the energy gradient at z_xi + w points along the tangent space.
The correction solves the fixed point

    w = -L^{-1} [ P I'(z_xi) + P R(z_xi, w) ],

with L the projected Hessian and R the closed-form quadratic-cubic
remainder.  Tabulating the reduced energy Theta(xi) = I_eps(z_xi + w) and
the quadratic weight Gamma(xi) localizes the surviving critical point.

Discretely, everything lives in the L2 pairing: with {e_i} the weighted-
orthonormal tangent basis and G the L2 representative of the weighted
product, the projector onto the weighted complement is
pi f = f - sum e_i <G e_i, f>, its L2 adjoint is q = pi^T, and the
stationarity condition P I' = 0 becomes q(grad) = 0.  The linear solves
use MINRES on the symmetric operator q H pi, which is singular exactly on
the deflated directions and consistent on their complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.fft import irfft2, rfft2
from scipy.sparse.linalg import LinearOperator, cg, minres

from .errors import (
    BoundaryMinimumError,
    ContractionFailureError,
    DegenerateBasisError,
    LinearSolveFailureError,
)
from .grids import (
    Field2D,
    Grid2D,
    NormWeights,
    gradient,
    gradient_sq_integral,
    integrate,
    laplacian_array,
    log_weight,
    log_weight_cone_coefficient,
    shift_field,
    x_inner_product,
)
from .groundstate import GroundStateRecord
from .logkernel import TruncatedKernelSpectrum, bilinear_B, convolve_array

__all__ = [
    "ReductionContext",
    "CorrectionResult",
    "ReducedFunctionalTable",
    "grad_I_eps",
    "energy_I_eps",
    "remainder_R",
    "project_orthogonal",
    "solve_correction",
    "reduced_theta",
    "locate_minimizer",
    "make_xi_grid",
]


@dataclass
class ReductionContext:
    """Everything needed to solve the correction at one (eps, xi).

    ``potential`` duck-types the external potential: callable on physical
    coordinate arrays, with attributes ``x0`` (critical point), ``v0`` and
    ``hessian``.  The grid is the rescaled frame centered at x0.
    """

    gs: GroundStateRecord
    base_state: Field2D
    potential: object
    eps: float
    kernel: TruncatedKernelSpectrum
    xi: tuple[float, float] = (0.0, 0.0)
    fp_tol: float = 1e-10
    max_fixed_point: int = 50
    # derived, filled in build()
    v_eps: np.ndarray = None
    weights: NormWeights = None
    z: Field2D = None
    tangent_basis: list = dc_field(default_factory=list)
    projector_basis: list = dc_field(default_factory=list)
    g_tangent: list = dc_field(default_factory=list)

    @classmethod
    def build(cls, gs: GroundStateRecord, base_state: Field2D, potential,
              eps: float, kernel: TruncatedKernelSpectrum,
              xi: tuple[float, float] = (0.0, 0.0), fp_tol: float = 1e-10,
              max_fixed_point: int = 50) -> "ReductionContext":
        if eps <= 0:
            raise ValueError("eps must be positive")
        ctx = cls(gs, base_state, potential, float(eps), kernel, tuple(xi),
                  fp_tol, max_fixed_point)
        grid = base_state.grid
        margin = 0.45 * min(grid.lx, grid.ly)
        if max(abs(xi[0]), abs(xi[1])) > margin:
            raise ValueError(f"xi={xi} too close to the box edge (margin {margin:g})")
        X, Y = grid.meshes()
        x0 = getattr(potential, "x0", (0.0, 0.0))
        ctx.v_eps = np.asarray(potential(x0[0] + eps * X, x0[1] + eps * Y), dtype=float)
        ctx.weights = NormWeights(grid, ctx.v_eps, include_log_weight=True)
        if xi == (0.0, 0.0):
            ctx.z = base_state
        else:
            ctx.z = shift_field(base_state, xi)
        dz1, dz2 = gradient(ctx.z)
        ctx.projector_basis = [ctx.z, dz1, dz2]
        ctx.tangent_basis = ctx._orthonormalize([dz1, dz2])
        ctx.g_tangent = [Field2D(grid, ctx.apply_G(e.values)) for e in ctx.tangent_basis]
        return ctx

    def at_xi(self, xi: tuple[float, float]) -> "ReductionContext":
        return ReductionContext.build(self.gs, self.base_state, self.potential,
                                      self.eps, self.kernel, xi,
                                      self.fp_tol, self.max_fixed_point)

    def _orthonormalize(self, fields: list) -> list:
        out = []
        for f in fields:
            v = f.values.copy()
            for e in out:
                v -= x_inner_product(Field2D(f.grid, v), e, self.weights) * e.values
        # degenerate-basis guard: compare to the original scale
            nrm2 = x_inner_product(Field2D(f.grid, v), Field2D(f.grid, v), self.weights)
            orig2 = x_inner_product(f, f, self.weights)
            if nrm2 <= 1e-12 * orig2:
                raise DegenerateBasisError("tangent basis is numerically degenerate")
            out.append(Field2D(f.grid, v / np.sqrt(nrm2)))
        return out

    # -- operators in the L2 pairing ---------------------------------------
    def apply_G(self, arr: np.ndarray) -> np.ndarray:
        """L2 representative of the weighted product: -Lap + V_eps + log(1+|x|).

        Includes the rank-one cone correction of the log weight so that
        cell_area * <G u, v> equals x_inner_product(u, v, weights) exactly.
        """
        grid = self.base_state.grid
        zero = self.v_eps + log_weight(grid)
        out = -laplacian_array(grid, arr) + zero * arr
        cy, cx = grid.center_index()
        out[cy, cx] += (log_weight_cone_coefficient(grid) / grid.cell_area
                        * arr[cy, cx])
        return out

    def apply_hessian(self, arr: np.ndarray) -> np.ndarray:
        """I''_eps(z_xi) in the L2 pairing."""
        grid = self.base_state.grid
        z = self.z.values
        w_z = self._cached_wz()
        return (
            -laplacian_array(grid, arr)
            + self.v_eps * arr
            - w_z * arr
            - 2.0 * z * convolve_array(z * arr, self.kernel)
        )

    def _cached_wz(self) -> np.ndarray:
        if not hasattr(self, "_wz"):
            self._wz = convolve_array(self.z.values**2, self.kernel)
        return self._wz

    def project_pi(self, arr: np.ndarray) -> np.ndarray:
        """Projector onto the weighted complement of the tangent space."""
        area = self.base_state.grid.cell_area
        for e, ge in zip(self.tangent_basis, self.g_tangent):
            arr = arr - e.values * (area * np.vdot(ge.values, arr))
        return arr

    def project_q(self, arr: np.ndarray) -> np.ndarray:
        """L2 adjoint of project_pi (acts on gradient representatives)."""
        area = self.base_state.grid.cell_area
        for e, ge in zip(self.tangent_basis, self.g_tangent):
            arr = arr - ge.values * (area * np.vdot(e.values, arr))
        return arr

    def tangential_coefficients(self, arr: np.ndarray) -> np.ndarray:
        area = self.base_state.grid.cell_area
        return np.array([area * np.vdot(e.values, arr) for e in self.tangent_basis])

    def weighted_norm(self, arr: np.ndarray) -> float:
        f = Field2D(self.base_state.grid, arr)
        return float(np.sqrt(max(x_inner_product(f, f, self.weights), 0.0)))

    def riesz_solve(self, arr: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
        """G^{-1} arr by preconditioned CG (weighted gradient representative)."""
        grid = self.base_state.grid
        n = arr.size
        kx, ky = grid.wavenumbers()
        shift = float(np.mean(self.v_eps + log_weight(grid)))
        mult = 1.0 / (kx**2 + ky**2 + shift)

        def mv(vec):
            return self.apply_G(vec.reshape(grid.shape)).ravel()

        def pre(vec):
            return irfft2(mult * rfft2(vec.reshape(grid.shape)), s=grid.shape).ravel()

        sol, info = cg(LinearOperator((n, n), matvec=mv, dtype=float), arr.ravel(),
                       M=LinearOperator((n, n), matvec=pre, dtype=float),
                       rtol=rtol, atol=0.0, maxiter=500)
        if info != 0:
            raise LinearSolveFailureError(f"weighted Riesz solve stalled (info={info})")
        return sol.reshape(grid.shape)


@dataclass
class CorrectionResult:
    w: Field2D
    xi: tuple[float, float]
    eps: float
    w_norm: float
    iterations: int
    contraction_trace: list
    residual_tangential: np.ndarray
    projected_residual: float
    converged: bool = True


@dataclass
class ReducedFunctionalTable:
    xi_grid: np.ndarray          # (m, 2)
    theta: np.ndarray            # (m,)
    gamma: np.ndarray            # (m,)
    b0: float
    shape: tuple[int, int]
    w_norms: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    argmin_xi: np.ndarray | None = None
    boundary_minimum: bool = False


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------

def energy_I_eps(u: Field2D, ctx: ReductionContext) -> float:
    """I_eps(u) = 0.5 Int |grad u|^2 + V_eps u^2 - 0.25 B(u^2, u^2)."""
    u2 = u * u
    quad = gradient_sq_integral(u) + integrate(Field2D(u.grid, ctx.v_eps * u2.values))
    return 0.5 * quad - 0.25 * bilinear_B(u2, u2, ctx.kernel)


def grad_I_eps(u: Field2D, ctx: ReductionContext) -> Field2D:
    """L2 gradient: -Lap u + V_eps u - Phi[u^2] u."""
    vals = u.values
    out = (
        -laplacian_array(u.grid, vals)
        + ctx.v_eps * vals
        - convolve_array(vals * vals, ctx.kernel) * vals
    )
    return Field2D(u.grid, out)


def remainder_R(z: Field2D, w: Field2D, ctx: ReductionContext) -> Field2D:
    """Closed-form remainder of the gradient expansion around z.

    R(z, w) = I'(z+w) - I'(z) - I''(z)[w]
            = -2 Phi[z w] w - Phi[w^2] z - Phi[w^2] w.
    """
    zw = convolve_array(z.values * w.values, ctx.kernel)
    w2 = convolve_array(w.values * w.values, ctx.kernel)
    out = -2.0 * zw * w.values - w2 * z.values - w2 * w.values
    return Field2D(z.grid, out)


def project_orthogonal(f: Field2D, ctx: ReductionContext) -> Field2D:
    """Remove the weighted tangent components; idempotent."""
    return Field2D(f.grid, ctx.project_pi(f.values.copy()))


# ---------------------------------------------------------------------------
# the correction fixed point
# ---------------------------------------------------------------------------

def _projected_hessian_operator(ctx: ReductionContext) -> LinearOperator:
    grid = ctx.base_state.grid
    n = grid.nx * grid.ny

    def mv(vec):
        arr = ctx.project_pi(vec.reshape(grid.shape).copy())
        out = ctx.apply_hessian(arr)
        return ctx.project_q(out).ravel()

    return LinearOperator((n, n), matvec=mv, dtype=float)


def _local_preconditioner(ctx: ReductionContext) -> LinearOperator:
    grid = ctx.base_state.grid
    kx, ky = grid.wavenumbers()
    mult = 1.0 / (kx**2 + ky**2 + float(ctx.v_eps.mean()))
    n = grid.nx * grid.ny

    def mv(vec):
        return irfft2(mult * rfft2(vec.reshape(grid.shape)), s=grid.shape).ravel()

    return LinearOperator((n, n), matvec=mv, dtype=float)


def solve_correction(ctx: ReductionContext,
                     xi: tuple[float, float] | None = None) -> CorrectionResult:
    """Unique small correction with tangential-only residual at (eps, xi).

    Picard iteration on w = -L^{-1} q(I'(z) + R(z, w)); each step is one
    MINRES solve of the deflated symmetric system, warm-started from the
    previous iterate, with tolerances tightened as the fixed point
    contracts.  Convergence: weighted-norm update below ``ctx.fp_tol``.
    """
    if xi is not None and tuple(xi) != ctx.xi:
        ctx = ctx.at_xi(tuple(xi))
    grid = ctx.base_state.grid
    area = grid.cell_area
    g0 = grad_I_eps(ctx.z, ctx).values
    A = _projected_hessian_operator(ctx)
    M = _local_preconditioner(ctx)
    w = np.zeros(grid.shape)
    x_prev = np.zeros(grid.nx * grid.ny)
    trace: list[float] = []
    rise = 0
    converged = False
    scale0 = None
    for k in range(ctx.max_fixed_point):
        rhs_field = g0 + remainder_R(ctx.z, Field2D(grid, w), ctx).values if k else g0
        rhs = -ctx.project_q(rhs_field.copy()).ravel()
        rhs_norm = np.linalg.norm(rhs)
        if rhs_norm == 0.0:
            w_new = np.zeros_like(w)
        else:
            if k == 0:
                rtol = 1e-6
            else:
                floor = ctx.fp_tol * 1e-2 * np.sqrt(area)
                rtol = max(min(1e-6, (trace[-1] / max(scale0, 1e-300)) * 1e-3),
                           floor / max(rhs_norm, 1e-300))
            sol, info = minres(A, rhs, x0=x_prev, rtol=rtol, maxiter=1200, M=M)
            if info != 0:
                raise LinearSolveFailureError(
                    f"correction solve stalled at fixed-point step {k} (info={info})",
                    trace,
                )
            x_prev = sol
            w_new = ctx.project_pi(sol.reshape(grid.shape).copy())
        update = ctx.weighted_norm(w_new - w)
        trace.append(update)
        if scale0 is None:
            scale0 = max(update, 1e-300)
        w = w_new
        if update < ctx.fp_tol:
            converged = True
            break
        if len(trace) >= 2 and trace[-1] >= trace[-2]:
            rise += 1
            if rise >= 3:
                raise ContractionFailureError(
                    "fixed-point updates stopped contracting", trace
                )
        else:
            rise = 0
    if not converged:
        raise ContractionFailureError(
            f"no convergence in {ctx.max_fixed_point} fixed-point steps", trace
        )
    # diagnostics at the fixed point
    g_final = grad_I_eps(ctx.z + Field2D(grid, w), ctx).values
    alpha = ctx.tangential_coefficients(g_final)
    qg = ctx.project_q(g_final.copy())
    proj_res = float(np.sqrt(max(area * np.vdot(qg, ctx.riesz_solve(qg)), 0.0)))
    return CorrectionResult(
        w=Field2D(grid, w),
        xi=ctx.xi,
        eps=ctx.eps,
        w_norm=ctx.weighted_norm(w),
        iterations=len(trace),
        contraction_trace=trace,
        residual_tangential=alpha,
        projected_residual=proj_res,
    )


# ---------------------------------------------------------------------------
# reduced functionals
# ---------------------------------------------------------------------------

def make_xi_grid(n: int, xi_max: float) -> tuple[np.ndarray, tuple[int, int]]:
    """n x n translation grid over [-xi_max, xi_max]^2, row-major points."""
    side = np.linspace(-xi_max, xi_max, n)
    P1, P2 = np.meshgrid(side, side, indexing="xy")
    return np.stack([P1.ravel(), P2.ravel()], axis=1), (n, n)


def gamma_value(ctx: ReductionContext, xi: tuple[float, float]) -> float:
    """Gamma(xi) = Int Q2(x) z_xi^2 with Q2 the half-Hessian quadratic."""
    grid = ctx.base_state.grid
    H = np.asarray(ctx.potential.hessian, dtype=float)
    X, Y = grid.meshes()
    q2 = 0.5 * (H[0, 0] * X**2 + 2.0 * H[0, 1] * X * Y + H[1, 1] * Y**2)
    z = ctx.z if tuple(xi) == ctx.xi else shift_field(ctx.base_state, xi)
    return integrate(Field2D(grid, q2 * z.values**2))


def _solve_one_xi(args):
    ctx, xi = args
    local = ctx.at_xi(tuple(xi))
    corr = solve_correction(local)
    theta = energy_I_eps(local.z + corr.w, local)
    gamma = gamma_value(local, tuple(xi))
    return theta, gamma, corr.w_norm, corr.iterations, corr.converged


def reduced_theta(ctx: ReductionContext, xi_grid: np.ndarray,
                  shape: tuple[int, int] | None = None,
                  jobs: int = 1) -> ReducedFunctionalTable:
    """Tabulate Theta(xi) = I_eps(z_xi + w) and Gamma(xi) over a xi grid."""
    xi_grid = np.atleast_2d(np.asarray(xi_grid, dtype=float))
    m = xi_grid.shape[0]
    if shape is None:
        side = int(round(np.sqrt(m)))
        shape = (side, m // max(side, 1)) if side * (m // max(side, 1)) == m else (m, 1)
    theta = np.empty(m)
    gamma = np.empty(m)
    w_norms = np.empty(m)
    iters = np.empty(m, dtype=int)
    ok = np.ones(m, dtype=bool)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_one_xi,
                                    [(ctx, xi) for xi in xi_grid], chunksize=1))
    else:
        results = [_solve_one_xi((ctx, xi)) for xi in xi_grid]
    for i, (th, ga, wn, it, cv) in enumerate(results):
        theta[i], gamma[i], w_norms[i], iters[i], ok[i] = th, ga, wn, it, cv
    table = ReducedFunctionalTable(
        xi_grid=xi_grid, theta=theta, gamma=gamma, b0=ctx.gs.b0, shape=shape,
        w_norms=w_norms, iterations=iters, converged=ok,
    )
    try:
        table.argmin_xi = locate_minimizer(table)
    except BoundaryMinimumError:
        table.boundary_minimum = True
    return table


def locate_minimizer(table: ReducedFunctionalTable) -> np.ndarray:
    """Sub-grid minimizer by a quadratic fit on the 3x3 stencil at the argmin."""
    n1, n2 = table.shape
    theta = table.theta.reshape(n1, n2)
    flat = int(np.argmin(table.theta))
    i, j = np.unravel_index(int(np.argmin(theta)), theta.shape)
    if n1 >= 3 and n2 >= 3 and (i in (0, n1 - 1) or j in (0, n2 - 1)):
        raise BoundaryMinimumError(
            f"reduced-energy minimum on the xi-grid boundary at {table.xi_grid[flat]}"
        )
    if n1 < 3 or n2 < 3:
        return table.xi_grid[flat].copy()
    pts = []
    vals = []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            idx = (i + di) * n2 + (j + dj)
            pts.append(table.xi_grid[idx])
            vals.append(table.theta[idx])
    pts = np.asarray(pts)
    vals = np.asarray(vals)
    x, y = pts[:, 0], pts[:, 1]
    Amat = np.stack([np.ones_like(x), x, y, x**2, x * y, y**2], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, vals, rcond=None)
    _, b, c, d, e, f = coef
    hess = np.array([[2 * d, e], [e, 2 * f]])
    if np.linalg.det(hess) <= 0 or hess[0, 0] <= 0:
        return table.xi_grid[flat].copy()
    sol = np.linalg.solve(hess, -np.array([b, c]))
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return np.clip(sol, lo, hi)
