"""Linearization at a state: matrix-free Hessian, spectrum, coercivity.

The second derivative of the energy at u acts on a test field as
-Lap(phi) + P phi - Phi[u^2] phi - 2 u Phi[u phi]; the local part is
inverted exactly by FFT and serves as the preconditioner for the blocked
eigensolver.  Spectral facts to reproduce at the ground state: a single
negative eigenvalue, a two-dimensional near-kernel spanned by the
translation modes, and a positive gap on the weighted-orthogonal
complement of {state, translations}.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.fft import irfft2, rfft2
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import NonConvergenceError
from .grids import (
    Field2D,
    Grid2D,
    NormWeights,
    gradient,
    log_weight,
    log_weight_cone_coefficient,
    x_inner_product,
    x_norm,
)
from .logkernel import TruncatedKernelSpectrum, convolve_array

__all__ = [
    "LinearizedOperator",
    "SpectrumReport",
    "apply_second_derivative",
    "lowest_eigenpairs",
    "coercivity_estimate",
    "linearized_at",
]


@dataclass
class LinearizedOperator:
    """I''(u) as a matrix-free symmetric operator in the L2 pairing.

    ``potential`` provides the zeroth-order coefficient P (V(eps x) or 1);
    its log-weight flag only matters for the weighted products used in
    projections, never for the operator itself.
    """

    base_state: Field2D
    kernel_spectrum: TruncatedKernelSpectrum
    potential: NormWeights
    cached_w: Field2D = None  # Phi[u^2], built lazily

    def __post_init__(self):
        if self.cached_w is None:
            w = convolve_array(self.base_state.values**2, self.kernel_spectrum)
            self.cached_w = Field2D(self.base_state.grid, w)

    @property
    def grid(self) -> Grid2D:
        return self.base_state.grid

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        grid = self.grid
        kx, ky = grid.wavenumbers()
        lap = irfft2(-(kx**2 + ky**2) * rfft2(arr, axes=(-2, -1)), s=grid.shape,
                     axes=(-2, -1))
        z = self.base_state.values
        out = (
            -lap
            + self.potential.potential_values() * arr
            - self.cached_w.values * arr
        )
        if np.any(z):
            if arr.ndim == 2:
                out = out - 2.0 * z * convolve_array(z * arr, self.kernel_spectrum)
            else:
                for i in range(arr.shape[0]):
                    out[i] -= 2.0 * z * convolve_array(z * arr[i], self.kernel_spectrum)
        return out

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        return self.apply_array(vec.reshape(self.grid.shape)).ravel()

    def matmat(self, mat: np.ndarray) -> np.ndarray:
        block = mat.T.reshape(mat.shape[1], *self.grid.shape)
        out = self.apply_array(block)
        return out.reshape(mat.shape[1], -1).T

    def as_linear_operator(self) -> LinearOperator:
        n = self.grid.nx * self.grid.ny
        return LinearOperator((n, n), matvec=self.matvec, matmat=self.matmat,
                              dtype=float)

    def local_preconditioner(self) -> LinearOperator:
        """Exact FFT inverse of the local part -Lap + mean(P)."""
        grid = self.grid
        kx, ky = grid.wavenumbers()
        shift = float(self.potential.potential_values().mean())
        mult = 1.0 / (kx**2 + ky**2 + shift)

        def mv(vec):
            return irfft2(mult * rfft2(vec.reshape(grid.shape)), s=grid.shape).ravel()

        def mm(mat):
            block = mat.T.reshape(mat.shape[1], *grid.shape)
            out = irfft2(mult * rfft2(block, axes=(-2, -1)), s=grid.shape, axes=(-2, -1))
            return out.reshape(mat.shape[1], -1).T

        n = grid.nx * grid.ny
        return LinearOperator((n, n), matvec=mv, matmat=mm, dtype=float)

    def weighted_product_operator(self) -> LinearOperator:
        """L2 representative of the weighted inner product: -Lap + P + log(1+|x|)."""
        grid = self.grid
        kx, ky = grid.wavenumbers()
        zero = self.potential.potential_values() + log_weight(grid)
        cone = log_weight_cone_coefficient(grid) / grid.cell_area
        cy, cx = grid.center_index()

        def mv(vec):
            arr = vec.reshape(grid.shape)
            lap = irfft2(-(kx**2 + ky**2) * rfft2(arr), s=grid.shape)
            out = -lap + zero * arr
            out[cy, cx] += cone * arr[cy, cx]
            return out.ravel()

        def mm(mat):
            block = mat.T.reshape(mat.shape[1], *grid.shape)
            lap = irfft2(-(kx**2 + ky**2) * rfft2(block, axes=(-2, -1)),
                         s=grid.shape, axes=(-2, -1))
            out = -lap + zero * block
            out[:, cy, cx] += cone * block[:, cy, cx]
            return out.reshape(mat.shape[1], -1).T

        n = grid.nx * grid.ny
        return LinearOperator((n, n), matvec=mv, matmat=mm, dtype=float)


def linearized_at(state: Field2D, K: TruncatedKernelSpectrum,
                  weights: NormWeights | None = None) -> LinearizedOperator:
    if weights is None:
        weights = NormWeights.plain(state.grid)
    return LinearizedOperator(state, K, weights)


def apply_second_derivative(L: LinearizedOperator, phi: Field2D) -> Field2D:
    """Hessian-vector product: -Lap phi + P phi - Phi[u^2] phi - 2u Phi[u phi]."""
    if phi.grid != L.grid:
        from .errors import GridMismatchError

        raise GridMismatchError("test field grid differs from the operator grid")
    return Field2D(L.grid, L.apply_array(phi.values))


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenfields: list
    morse_index: int
    kernel_dim_numerical: int
    kernel_alignment: float
    kernel_alignments: list
    delta_estimate: float
    residual_norms: np.ndarray
    kernel_tol: float
    iterations: int = 0


def _translation_modes(state: Field2D) -> list[np.ndarray]:
    gx, gy = gradient(state)
    return [gx.values.ravel(), gy.values.ravel()]


def _smooth_random_block(grid: Grid2D, count: int, rng: np.random.Generator,
                         k_cutoff: float = 3.0) -> np.ndarray:
    """Low-pass filtered white noise: probes that live at the core scale."""
    kx, ky = grid.wavenumbers()
    filt = np.exp(-(kx**2 + ky**2) / (2.0 * k_cutoff**2))
    cols = []
    for _ in range(count):
        noise = rng.standard_normal(grid.shape)
        cols.append(irfft2(filt * rfft2(noise), s=grid.shape).ravel())
    return np.stack(cols, axis=1)


def lowest_eigenpairs(L: LinearizedOperator, k: int = 8, tol: float = 1e-6,
                      maxiter: int = 3000, kernel_tol: float | None = None,
                      seed: int = 2203) -> SpectrumReport:
    """Lowest-k spectrum of the linearization in the L2 pairing.

    Blocked LOBPCG preconditioned by the exact inverse of the local part;
    the starting block contains the state, its translation modes and
    filtered noise, which pins the Morse/kernel structure deterministically.
    ``delta_estimate`` is the smallest Rayleigh quotient of the pencil
    (I''(u), weighted product) on the weighted-orthogonal complement of
    span{u, d1 u, d2 u}.
    """
    if k < 4:
        raise ValueError("need k >= 4 to resolve Morse index and kernel")
    grid = L.grid
    n = grid.nx * grid.ny
    rng = np.random.default_rng(seed)
    block = max(k + 4, int(1.2 * k))
    cols = [L.base_state.values.ravel()] + _translation_modes(L.base_state)
    X = np.concatenate(
        [np.stack([c for c in cols if np.linalg.norm(c) > 0], axis=1),
         _smooth_random_block(grid, block, rng)], axis=1)[:, :block]
    X, _ = np.linalg.qr(X)
    A = L.as_linear_operator()
    M = L.local_preconditioner()
    vals, vecs, hist = lobpcg(A, X, M=M, tol=tol, maxiter=maxiter, largest=False,
                              retLambdaHistory=True)
    order = np.argsort(vals)
    vals, vecs = vals[order][:k], vecs[:, order][:, :k]
    res = np.array([
        np.linalg.norm(A.matvec(vecs[:, i]) - vals[i] * vecs[:, i])
        / np.linalg.norm(vecs[:, i]) for i in range(k)
    ])
    if not np.all(np.isfinite(vals)) or np.any(res > 1e3 * tol * max(1.0, abs(vals).max())):
        raise NonConvergenceError(
            f"eigensolver stagnated: residuals {res}", list(res)
        )
    if kernel_tol is None:
        kernel_tol = max(10.0 * float(res.max()), 1e-6)
    morse = int(np.sum(vals < -kernel_tol))
    near_zero = np.where(np.abs(vals) < kernel_tol)[0]
    tmodes = _translation_modes(L.base_state)
    Q = None
    if any(np.linalg.norm(t) > 0 for t in tmodes):
        Q, _ = np.linalg.qr(np.stack(tmodes, axis=1))
    alignments = []
    for i in near_zero:
        v = vecs[:, i]
        if Q is None:
            alignments.append(0.0)
        else:
            alignments.append(float(np.linalg.norm(Q.T @ v) / np.linalg.norm(v)))
    fields = [Field2D(grid, vecs[:, i].reshape(grid.shape)) for i in range(k)]

    delta = _delta_estimate(L, tol=max(tol, 2e-5), maxiter=min(maxiter, 250),
                            seed=seed)
    return SpectrumReport(
        eigenvalues=vals,
        eigenfields=fields,
        morse_index=morse,
        kernel_dim_numerical=int(near_zero.size),
        kernel_alignment=float(max(alignments)) if alignments else 0.0,
        kernel_alignments=alignments,
        delta_estimate=delta,
        residual_norms=res,
        kernel_tol=float(kernel_tol),
        iterations=len(hist) if hist is not None else 0,
    )


def _delta_estimate(L: LinearizedOperator, tol: float, maxiter: int, seed: int) -> float:
    grid = L.grid
    rng = np.random.default_rng(seed + 1)
    Y = np.stack([L.base_state.values.ravel()] + _translation_modes(L.base_state),
                 axis=1)
    if np.linalg.norm(Y) == 0:
        Y = None
    X = _smooth_random_block(grid, 4, rng)
    A = L.as_linear_operator()
    B = L.weighted_product_operator()
    M = L.local_preconditioner()
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # guard vectors may lag
        vals, _ = lobpcg(A, X, B=B, M=M, Y=Y, tol=tol, maxiter=maxiter, largest=False)
    return float(np.min(vals))


def coercivity_estimate(L: LinearizedOperator, state: Field2D | None = None,
                        n_probes: int = 200, seed: int = 515,
                        exclude_state: bool = True,
                        include_state_probe: bool = False) -> float:
    """min of I''[v,v] over weighted-normalized random v in the constraint set.

    Probes are orthogonalized (weighted product) against the translation
    modes and, with ``exclude_state``, against the state itself.  Passing
    ``exclude_state=False, include_state_probe=True`` runs the control
    configuration whose minimum must dip below zero.
    """
    state = state or L.base_state
    grid = L.grid
    weights = NormWeights(grid, L.potential.potential,
                          include_log_weight=L.potential.include_log_weight)
    gx, gy = gradient(state)
    basis = [gx, gy] + ([state] if exclude_state else [])
    ortho: list[Field2D] = []
    for b in basis:
        v = b.values.copy()
        for e in ortho:
            v = v - x_inner_product(Field2D(grid, v), e, weights) * e.values
        nrm = x_norm(Field2D(grid, v), weights)
        if nrm > 0:
            ortho.append(Field2D(grid, v / nrm))
    rng = np.random.default_rng(seed)
    probes = []
    if include_state_probe:
        probes.append(state.values.ravel())
    probes.extend(_smooth_random_block(grid, n_probes, rng).T)
    best = np.inf
    area = grid.cell_area
    for p in probes:
        v = p.reshape(grid.shape).copy()
        for e in ortho:
            v = v - x_inner_product(Field2D(grid, v), e, weights) * e.values
        f = Field2D(grid, v)
        nx2 = x_inner_product(f, f, weights)
        if nx2 <= 0:
            continue
        quad = area * float(np.vdot(v, L.apply_array(v)))
        best = min(best, quad / nx2)
    return float(best)
