"""Free-space log convolution: analytic values, oracles, equivariance."""

import numpy as np
import pytest

from logchoquard.errors import GridMismatchError, TailDecayError
from logchoquard.grids import Field2D, Grid2D, RadialGrid, RadialProfile, integrate, lift_radial
from logchoquard.logkernel import (
    bilinear_B,
    build_kernel_spectrum,
    convolve,
    gaussian_density,
    radial_area_integral,
    radial_log_potential,
    truncated_log_multiplier,
    truncated_log_multiplier_quadrature,
)

EULER_GAMMA = 0.5772156649015328606


@pytest.fixture(scope="module")
def grid():
    return Grid2D(256, 256, 20.0, 20.0)


@pytest.fixture(scope="module")
def kernel(grid):
    return build_kernel_spectrum(grid)


@pytest.fixture(scope="module")
def gauss(grid):
    return Field2D.from_function(grid, lambda X, Y: np.exp(-(X**2 + Y**2)))


def test_analytic_matches_quadrature_full_build():
    # the closed-form fast path must reproduce the quadrature build to
    # 1e-12 of the kernel scale before it is allowed
    g = Grid2D(48, 48, 10.0, 10.0)
    K_ana = build_kernel_spectrum(g, method="analytic")
    K_quad = build_kernel_spectrum(g, method="quadrature")
    scale = np.abs(K_ana.khat).max()
    assert np.abs(K_ana.khat - K_quad.khat).max() < 1e-12 * scale
    assert K_quad.method == "quadrature"


def test_multiplier_zero_mode_and_series():
    T = 22.627416997969522
    k0 = truncated_log_multiplier(np.array([0.0]), T)[0]
    assert k0 == pytest.approx(T**2 / 4 - T**2 * np.log(T) / 2, rel=1e-14)
    # series branch consistent with the Bessel branch at the crossover
    left = truncated_log_multiplier(np.array([0.099 / T]), T)[0]
    right = truncated_log_multiplier(np.array([0.101 / T]), T)[0]
    ref = truncated_log_multiplier_quadrature(np.array([0.099 / T, 0.101 / T]), T)
    assert left == pytest.approx(ref[0], rel=1e-12)
    assert right == pytest.approx(ref[1], rel=1e-12)


def test_khat_isotropy_on_square_grid(kernel):
    npy, npx = kernel.pad_shape
    assert npy == npx
    half = kernel.khat[: npx // 2 + 1, : npx // 2 + 1]
    assert np.abs(half - half.T).max() < 1e-12 * np.abs(half).max()


def test_convolve_zero(grid, kernel):
    out = convolve(Field2D.zeros(grid), kernel)
    assert np.abs(out.values).max() == 0.0


def test_convolve_gaussian_origin_gamma(grid, kernel, gauss):
    phi = convolve(gauss, kernel)
    val = phi.values[grid.center_index()]
    assert val == pytest.approx(EULER_GAMMA / 4, rel=1e-6)
    # the oracle itself: radial quadrature of -(1/2pi) log|y| e^{-|y|^2}
    rg = RadialGrid.uniform(10.0, 40000)
    w = radial_log_potential(gaussian_density(rg), tail_tol=1e-8)
    assert w.values[0] == pytest.approx(EULER_GAMMA / 4, rel=1e-7)
    assert val == pytest.approx(w.values[0], rel=1e-6)


def test_point_source_matches_fundamental_solution():
    g = Grid2D(512, 512, 8.0, 8.0)
    K = build_kernel_spectrum(g)
    rho = np.zeros(g.shape)
    cy, cx = g.center_index()
    rho[cy, cx] = 1.0 / g.cell_area  # unit mass spike
    phi = convolve(Field2D(g, rho), K)
    xs = g.xs()
    for r in (0.5, 0.8, 1.25, 2.0):
        i = cx + int(round(r / g.hx))
        target = -np.log(xs[i]) / (2 * np.pi)
        assert phi.values[cy, i] == pytest.approx(target, abs=1e-3 * np.log(2) / (2 * np.pi))


def test_truncation_radius_exactness(grid, gauss):
    K1 = build_kernel_spectrum(grid)
    K2 = build_kernel_spectrum(grid, T=2 * K1.T)
    p1 = convolve(gauss, K1)
    p2 = convolve(gauss, K2)
    assert np.abs(p1.values - p2.values).max() < 1e-12 * np.abs(p1.values).max()


def test_translation_equivariance(grid, kernel, gauss):
    phi = convolve(gauss, kernel)
    my, mx = 12, -7
    shifted = Field2D(grid, np.roll(gauss.values, (my, mx), axis=(0, 1)))
    phi_sh = convolve(shifted, kernel)
    rolled = np.roll(phi.values, (my, mx), axis=(0, 1))
    n = grid.nx
    valid = np.zeros(grid.shape, dtype=bool)
    valid[max(0, my):n + min(0, my), max(0, mx):n + min(0, mx)] = True
    assert np.abs(phi_sh.values - rolled)[valid].max() < 1e-9


def test_convolve_linearity(grid, kernel, gauss):
    other = Field2D.from_function(grid, lambda X, Y: np.exp(-((X - 1) ** 2 + Y**2) / 2))
    lhs = convolve(2.5 * gauss + (-1.25) * other, kernel)
    rhs = 2.5 * convolve(gauss, kernel) + (-1.25) * convolve(other, kernel)
    scale = np.abs(lhs.values).max()
    assert np.abs(lhs.values - rhs.values).max() < 1e-12 * scale


def test_convolve_far_field_log_growth(grid, kernel, gauss):
    # Phi + (mass/2pi) log|x| stays bounded toward the box edge
    phi = convolve(gauss, kernel)
    mass = integrate(gauss)
    X, Y = grid.meshes()
    r = np.hypot(X, Y)
    sel = (r > 6.0) & (r < 9.5)
    compensated = phi.values[sel] + mass / (2 * np.pi) * np.log(r[sel])
    assert np.abs(compensated).max() < 1e-6


def test_bilinear_B_zero_and_symmetry(grid, kernel, gauss):
    assert bilinear_B(gauss, Field2D.zeros(grid), kernel) == pytest.approx(0.0, abs=1e-14)
    rng = np.random.default_rng(7)
    kx, ky = grid.wavenumbers()
    filt = np.exp(-(kx**2 + ky**2) / 8.0)
    from scipy.fft import irfft2, rfft2

    for _ in range(3):
        a = Field2D(grid, irfft2(filt * rfft2(rng.standard_normal(grid.shape)), s=grid.shape))
        b = Field2D(grid, irfft2(filt * rfft2(rng.standard_normal(grid.shape)), s=grid.shape))
        assert bilinear_B(a, b, kernel) == pytest.approx(bilinear_B(b, a, kernel), rel=1e-10)


def test_bilinear_B_gaussian_nested_quadrature_oracle(grid, kernel):
    rho2d = Field2D.from_function(grid, lambda X, Y: np.exp(-(X**2 + Y**2)))
    value = bilinear_B(rho2d, rho2d, kernel)
    # independent 1-d nested quadrature with the circle-averaged kernel:
    # B = 2pi Int r rho(r) w(r) dr,
    # w(r) = -log r Int_0^r s rho ds - Int_r^inf s log s rho ds
    from scipy.integrate import quad

    rho = lambda s: np.exp(-(s**2))

    def w(r):
        inner = quad(lambda s: s * rho(s), 0, r, limit=200)[0]
        outer = quad(lambda s: s * np.log(s) * rho(s), r, 12.0, limit=200)[0]
        return -np.log(r) * inner - outer if r > 0 else -quad(
            lambda s: s * np.log(s) * rho(s), 0, 12.0, limit=200)[0]

    ref = 2 * np.pi * quad(lambda r: r * rho(r) * w(r), 0, 12.0, limit=200)[0]
    assert value == pytest.approx(ref, rel=1e-6)


def test_radial_log_potential_zero():
    rg = RadialGrid.uniform(5.0, 200)
    w = radial_log_potential(RadialProfile(rg, np.zeros(rg.r.size)), tail_tol=1e-8)
    assert np.abs(w.values).max() == 0.0


def test_radial_log_potential_far_field(grid, kernel):
    rg = RadialGrid.uniform(10.0, 20000)
    u2 = gaussian_density(rg)
    w = radial_log_potential(u2, tail_tol=1e-8)
    m_far = radial_area_integral(u2) / (2 * np.pi)
    sel = (rg.r > 5.0) & (rg.r < 9.0)
    assert np.abs(w.values[sel] + m_far * np.log(rg.r[sel])).max() < 1e-7
    # direct 2-d oracle on the lifted density
    lifted = lift_radial(RadialProfile(rg, u2.values), grid)
    phi = convolve(lifted, kernel)
    wl = lift_radial(RadialProfile(rg, w.values), grid)
    mask = grid.radii() <= 8.0
    assert np.abs(phi.values - wl.values)[mask].max() < 1e-6


def test_radial_log_potential_tail_guard():
    rg = RadialGrid.uniform(2.0, 100)
    with pytest.raises(TailDecayError):
        radial_log_potential(gaussian_density(rg), tail_tol=1e-8)


def test_engine_equivalence_random_densities(grid, kernel):
    rng = np.random.default_rng(42)
    rg = RadialGrid.uniform(8.0, 60000)
    r2 = rg.r**2
    for _ in range(5):
        # even in r (functions of r^2), so the lifted density is smooth
        vals = np.zeros(rg.r.size)
        for _ in range(3):
            amp = rng.uniform(0.3, 1.5)
            width = rng.uniform(0.8, 1.8)
            m = rng.integers(0, 3)
            vals += amp * (r2 / width**2) ** m * np.exp(-r2 / width**2)
        u2 = RadialProfile(rg, vals)
        w = radial_log_potential(u2, tail_tol=1e-6)
        phi = convolve(lift_radial(u2, grid), kernel)
        wl = lift_radial(RadialProfile(rg, w.values), grid)
        mask = grid.radii() <= 8.0
        assert np.abs(phi.values - wl.values)[mask].max() < 1e-6


def test_B_sign_flip_under_dilation(grid, kernel):
    # unit mass kept fixed: concentrated -> positive, dilated -> negative
    def rho_lambda(lam):
        f = Field2D.from_function(
            grid, lambda X, Y: lam**2 * np.exp(-(lam**2) * (X**2 + Y**2)) / np.pi)
        return f

    tight = rho_lambda(4.0)
    wide = rho_lambda(0.35)
    assert bilinear_B(tight, tight, kernel) > 0
    assert bilinear_B(wide, wide, kernel) < 0


def test_zero_mode_regression(kernel):
    # recorded at first build; the analytic box-average referee
    # (16 - 32 log 8 + corner integral - 1/4 = -69.9793) agrees to the
    # expected O(h^2) boundary quadrature bias of the box integral
    g = Grid2D(128, 128, 16.0, 16.0)
    K = build_kernel_spectrum(g)
    rho = Field2D.from_function(g, lambda X, Y: np.exp(-(X**2 + Y**2)))
    rho = (1.0 / integrate(rho)) * rho
    val = integrate(convolve(rho, K))
    assert val == pytest.approx(-69.98055279262817, rel=1e-12)


def test_kernel_grid_mismatch(kernel):
    other = Field2D.zeros(Grid2D(64, 64, 20.0, 20.0))
    with pytest.raises(GridMismatchError):
        convolve(other, kernel)


def test_kernel_T_below_diameter_rejected(grid):
    with pytest.raises(ValueError):
        build_kernel_spectrum(grid, T=0.5 * np.hypot(grid.lx, grid.ly))


def test_kernel_cache_roundtrip(tmp_path):
    from logchoquard.logkernel import cached_kernel_spectrum

    g = Grid2D(32, 32, 6.0, 6.0)
    K1 = cached_kernel_spectrum(g, cache_dir=tmp_path)
    files = list(tmp_path.glob("*.lck"))
    assert len(files) == 1
    K2 = cached_kernel_spectrum(g, cache_dir=tmp_path)
    assert np.array_equal(K1.khat, K2.khat)
    assert K2.T == K1.T and K2.pad_shape == K1.pad_shape
