"""Grid, field, quadrature and weighted-product behavior."""

import numpy as np
import pytest

from logchoquard.errors import GridMismatchError
from logchoquard.grids import (
    Field2D,
    Grid2D,
    NormWeights,
    RadialGrid,
    RadialProfile,
    gradient_sq_integral,
    integrate,
    lift_radial,
    log_weight,
    log_weight_cone_coefficient,
    shift_field,
    x_inner_product,
    x_norm,
)


def test_grid_invariants():
    with pytest.raises(ValueError):
        Grid2D(8, 8, 2.0, 2.0)  # too coarse for the FFT-friendly floor
    with pytest.raises(ValueError):
        Grid2D(17, 16, 2.0, 2.0)  # odd count
    with pytest.raises(ValueError):
        Grid2D(16, 16, -1.0, 2.0)
    g = Grid2D(16, 16, 2.0, 2.0)
    assert g.hx > 0 and g.hy > 0
    assert g.xs()[g.nx // 2] == pytest.approx(0.0, abs=0)


def test_integrate_constant_box_area():
    g = Grid2D(16, 16, 2.0, 2.0)
    assert integrate(Field2D(g, np.ones(g.shape))) == pytest.approx(4.0, rel=1e-15)


def test_integrate_zero():
    g = Grid2D(16, 16, 2.0, 2.0)
    assert integrate(Field2D.zeros(g)) == 0.0


def test_integrate_gaussian_pi():
    g = Grid2D(256, 256, 24.0, 24.0)
    f = Field2D.from_function(g, lambda X, Y: np.exp(-(X**2 + Y**2)))
    assert integrate(f) == pytest.approx(np.pi, rel=1e-10)

    # cross-check against adaptive 1-d radial quadrature
    from scipy.integrate import quad

    ref = 2 * np.pi * quad(lambda r: r * np.exp(-(r**2)), 0, 12)[0]
    assert integrate(f) == pytest.approx(ref, rel=1e-10)


def test_integrate_scaling_linear():
    g = Grid2D(32, 32, 5.0, 3.0)
    rng = np.random.default_rng(5)
    f = Field2D(g, rng.standard_normal(g.shape))
    assert integrate(4.5 * f) == pytest.approx(4.5 * integrate(f), rel=1e-13)


def test_gradient_sq_zero_field():
    g = Grid2D(32, 32, 2.0, 2.0)
    assert gradient_sq_integral(Field2D.zeros(g)) == 0.0


def test_gradient_sq_sine_analytic_and_backends():
    # resolved lowest mode: spectral is exact, fd4 matches to 1e-8
    g = Grid2D(512, 16, 7.0, 1.0)
    f = Field2D.from_function(g, lambda X, Y: np.sin(2 * np.pi * X / g.lx))
    target = (2 * np.pi / g.lx) ** 2 * g.lx * g.ly / 2
    spectral = gradient_sq_integral(f, "spectral")
    fd4 = gradient_sq_integral(f, "fd4")
    assert spectral == pytest.approx(target, rel=1e-12)
    assert abs(fd4 - spectral) / target < 1e-8


def test_gradient_sq_fd2_second_order():
    target = lambda g: (2 * np.pi / g.lx) ** 2 * g.lx * g.ly / 2
    errs = []
    for n in (64, 128):
        g = Grid2D(n, 16, 7.0, 1.0)
        f = Field2D.from_function(g, lambda X, Y: np.sin(2 * np.pi * X / g.lx))
        errs.append(abs(gradient_sq_integral(f, "fd2") - target(g)) / target(g))
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.1)


def test_gradient_sq_translation_invariance():
    g = Grid2D(64, 64, 10.0, 10.0)
    f = Field2D.from_function(g, lambda X, Y: np.exp(-3 * (X**2 + Y**2)))
    shifted = Field2D(g, np.roll(f.values, (7, -5), axis=(0, 1)))
    assert gradient_sq_integral(shifted) == pytest.approx(
        gradient_sq_integral(f), rel=1e-12)


def test_gradient_sq_quadratic_scaling():
    g = Grid2D(32, 32, 4.0, 4.0)
    f = Field2D.from_function(g, lambda X, Y: np.exp(-(X**2 + Y**2)))
    assert gradient_sq_integral(3.0 * f) == pytest.approx(
        9.0 * gradient_sq_integral(f), rel=1e-13)


def test_x_inner_product_definition():
    g = Grid2D(128, 128, 16.0, 16.0)
    u = Field2D.from_function(g, lambda X, Y: np.exp(-(X**2 + Y**2)))
    w = NormWeights.plain(g)
    h1 = gradient_sq_integral(u) + integrate(u * u)
    cy, cx = g.center_index()
    star = (integrate(Field2D(g, log_weight(g) * u.values**2))
            + log_weight_cone_coefficient(g) * u.values[cy, cx] ** 2)
    assert x_inner_product(u, u, w) == pytest.approx(h1 + star, rel=1e-13)


def test_x_inner_product_parity_orthogonality():
    g = Grid2D(128, 128, 16.0, 16.0)
    even = Field2D.from_function(g, lambda X, Y: np.exp(-(X**2 + Y**2)))
    odd = Field2D.from_function(g, lambda X, Y: X * np.exp(-(X**2 + Y**2)))
    val = x_inner_product(even, odd)
    scale = x_norm(even) * x_norm(odd)
    assert abs(val) < 1e-12 * scale


def test_x_inner_product_log_weight_radial_oracle():
    g = Grid2D(512, 512, 24.0, 24.0)
    u = Field2D.from_function(g, lambda X, Y: np.exp(-(X**2 + Y**2) / 2))
    star = (x_inner_product(u, u) - gradient_sq_integral(u) - integrate(u * u))
    from scipy.integrate import quad

    ref = 2 * np.pi * quad(lambda r: np.log1p(r) * np.exp(-(r**2)) * r, 0, 12,
                           limit=200)[0]
    assert star == pytest.approx(ref, rel=1e-8)


def test_x_inner_product_grid_mismatch():
    u = Field2D.zeros(Grid2D(16, 16, 2.0, 2.0))
    v = Field2D.zeros(Grid2D(32, 32, 2.0, 2.0))
    with pytest.raises(GridMismatchError):
        x_inner_product(u, v)


def test_x_product_positive_definite_on_random_fields():
    g = Grid2D(32, 32, 6.0, 6.0)
    rng = np.random.default_rng(11)
    for _ in range(100):
        u = Field2D(g, rng.standard_normal(g.shape))
        assert x_inner_product(u, u) > 0


def test_elementary_log_kernel_inequality():
    # log(1+|x-y|) <= log(1+|x|) + log(1+|y|) on sampled node pairs
    g = Grid2D(32, 32, 20.0, 20.0)
    X, Y = g.meshes()
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    rng = np.random.default_rng(3)
    idx = rng.integers(0, pts.shape[0], size=(500, 2))
    a, b = pts[idx[:, 0]], pts[idx[:, 1]]
    lhs = np.log1p(np.hypot(*(a - b).T))
    rhs = np.log1p(np.hypot(*a.T)) + np.log1p(np.hypot(*b.T))
    assert np.all(lhs <= rhs + 1e-12)


def test_translation_changes_weighted_part_only():
    g = Grid2D(128, 128, 20.0, 20.0)
    f = Field2D.from_function(g, lambda X, Y: np.exp(-4 * ((X - 0) ** 2 + Y**2)))
    shifted = Field2D(g, np.roll(f.values, 20, axis=1))  # shift by 20 cells in x
    h1 = gradient_sq_integral(f) + integrate(f * f)
    h1_sh = gradient_sq_integral(shifted) + integrate(shifted * shifted)
    star = integrate(Field2D(g, log_weight(g) * f.values**2))
    star_sh = integrate(Field2D(g, log_weight(g) * shifted.values**2))
    assert h1_sh == pytest.approx(h1, rel=1e-12)
    assert abs(star_sh - star) > 1e-3 * star


def test_lift_radial_origin_and_argmax():
    rg = RadialGrid.uniform(6.0, 2000)
    p = RadialProfile(rg, np.exp(-rg.r**2))
    g = Grid2D(128, 128, 16.0, 16.0)
    f = lift_radial(p, g)
    cy, cx = g.center_index()
    assert f.values[cy, cx] == pytest.approx(1.0, abs=1e-12)
    assert np.unravel_index(np.argmax(f.values), f.values.shape) == (cy, cx)


def test_lift_radial_mass_oracle():
    rg = RadialGrid.uniform(6.0, 4000)
    p = RadialProfile(rg, np.exp(-rg.r**2))
    g = Grid2D(512, 512, 24.0, 24.0)
    f = lift_radial(p, g)
    mass = integrate(f * f)
    from scipy.integrate import quad

    ref = 2 * np.pi * quad(lambda r: r * np.exp(-2 * r**2), 0, 6)[0]
    assert mass == pytest.approx(ref, rel=1e-6)


def test_lift_radial_center_outside_box():
    rg = RadialGrid.uniform(2.0, 100)
    p = RadialProfile(rg, np.exp(-rg.r**2))
    g = Grid2D(32, 32, 4.0, 4.0)
    with pytest.raises(ValueError):
        lift_radial(p, g, center=(9.0, 0.0))


def test_lift_radial_clipped_support_warns():
    rg = RadialGrid.uniform(5.0, 200)
    p = RadialProfile(rg, np.exp(-rg.r**2))
    g = Grid2D(32, 32, 6.0, 6.0)
    with pytest.warns(UserWarning):
        f = lift_radial(p, g)
    assert "warnings" in f.meta


def test_shift_field_matches_grid_roll():
    g = Grid2D(64, 64, 12.0, 12.0)
    f = Field2D.from_function(g, lambda X, Y: np.exp(-2 * (X**2 + Y**2)))
    rolled = np.roll(f.values, (3, -2), axis=(0, 1))
    shifted = shift_field(f, (-2 * g.hx, 3 * g.hy))
    assert np.abs(shifted.values - rolled).max() < 1e-12


def test_field_rejects_nonfinite():
    g = Grid2D(16, 16, 2.0, 2.0)
    vals = np.zeros(g.shape)
    vals[3, 3] = np.inf
    with pytest.raises(ValueError):
        Field2D(g, vals)


def test_radial_grid_monotonicity():
    with pytest.raises(ValueError):
        RadialGrid(np.array([0.0, 1.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        RadialGrid(np.array([-0.5, 1.0, 2.0, 3.0]))


def test_norm_weights_positive_floor():
    g = Grid2D(16, 16, 2.0, 2.0)
    with pytest.raises(ValueError):
        NormWeights(g, np.zeros(g.shape))
