import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landau import _backend as B
from landau import grid as G
from landau import kernel as K
from landau import scenarios as S
from landau.kernel import KernelParams


def _random_field(grid, rng, lo=0.1):
    return G.ScalarField(grid, rng.uniform(lo, 1.0, size=(grid.n,) * 3))


def test_grid_coordinates():
    g = G.VelocityGrid(16, 6.0)
    assert g.h == pytest.approx(12.0 / 15)
    np.testing.assert_allclose(g.axis, -6.0 + np.arange(16) * g.h, atol=1e-14)
    np.testing.assert_allclose(g.axis, -g.axis[::-1], atol=1e-15)
    v = g.mesh()
    assert v.shape == (3, 16, 16, 16)
    assert v[0, 3, 0, 0] == g.axis[3] and v[2, 0, 0, 5] == g.axis[5]


@pytest.mark.parametrize("n", [8, 18, 30])
def test_grid_rejects_bad_n(n):
    with pytest.raises(ValueError):
        G.VelocityGrid(n, 6.0)


def test_field_shape_checked(grid16):
    with pytest.raises(G.GridMismatchError):
        G.ScalarField(grid16, np.zeros((8, 8, 8)))
    with pytest.raises(G.GridMismatchError):
        G.ScalarField(grid16, np.zeros((16,) * 3)) + G.ScalarField(G.VelocityGrid(16, 5.0), np.zeros((16,) * 3))


def test_point_measure_validation():
    with pytest.raises(ValueError):
        G.PointMeasure([[0, 0, 0], [1, 0, 0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        G.PointMeasure([[0, 0, 0]], [-1.0])
    assert len(G.PointMeasure.uniform(np.zeros((4, 3)))) == 4


# --------------------------------------------------------------------------
# convolution


def test_convolution_matches_direct_sum(grid16, rng):
    # independent oracle: explicit h^3-weighted double sum at a few nodes
    f = _random_field(grid16, rng)
    p = KernelParams(1.0, 0.3)
    c = G.convolve_coefficients(f, p, regularized=True)
    v = grid16.mesh().reshape(3, -1).T
    fv = f.values.ravel()
    h3 = grid16.cell_volume
    for idx in [(0, 0, 0), (7, 8, 3), (15, 2, 9)]:
        z = np.array([grid16.axis[i] for i in idx]) - v
        a = K.eval_a_reg(z, p)
        b = K.eval_b_reg(z, p)
        cc = K.eval_c_reg(z, p)
        direct_a = np.einsum("kij,k->ij", a, fv) * h3
        for m, (i, j) in enumerate(K.SYM_PAIRS):
            assert c.abar[m][idx] == pytest.approx(direct_a[i, j], rel=1e-11, abs=1e-11 * np.abs(direct_a).max())
        np.testing.assert_allclose(c.bbar[(slice(None),) + idx], b.T @ fv * h3, rtol=1e-11,
                                   atol=1e-11 * np.abs(b.T @ fv * h3).max())
        assert c.cbar[idx] == pytest.approx(cc @ fv * h3, rel=1e-11)


def test_two_surrogates_give_diag011_at_centre():
    # frozen oracle: 1/2 a(-u1) + 1/2 a(-u2) = diag(0, 1, 1)
    oracle = 0.5 * K.eval_a((-1, 0, 0), 1.0) + 0.5 * K.eval_a((1, 0, 0), 1.0)
    np.testing.assert_allclose(oracle, np.diag([0.0, 1.0, 1.0]), atol=1e-15)
    g = G.VelocityGrid(48, 3.0)
    f = 0.5 * S.point_surrogate((1, 0, 0), g) + 0.5 * S.point_surrogate((-1, 0, 0), g)
    c = G.convolve_coefficients(f, KernelParams(1.0, 0.05), regularized=False, parts="a")
    mid = g.n // 2
    A = c.matrix()[mid - 1:mid + 1, mid - 1:mid + 1, mid - 1:mid + 1].mean(axis=(0, 1, 2))
    # averaging the 8 nodes around 0 and the surrogate width h/2 give an O(h^2) bias
    np.testing.assert_allclose(A, np.diag([0.0, 1.0, 1.0]), atol=0.05)


def test_single_surrogate_translates_kernel():
    g = G.VelocityGrid(32, 6.0)
    f = S.point_surrogate((0, 0, 0), g)
    c = G.convolve_coefficients(f, KernelParams(1.0, 0.05), regularized=False, parts="a")
    A = c.matrix()
    v = g.mesh()
    for idx in [(4, 16, 16), (25, 10, 20), (16, 2, 29)]:
        z = v[(slice(None),) + idx]
        exact = K.eval_a(z, 1.0)
        np.testing.assert_allclose(A[idx], exact, rtol=0, atol=0.02 * np.abs(exact).max())


def test_convolution_linearity(grid16, rng, params):
    f1, f2 = _random_field(grid16, rng), _random_field(grid16, rng)
    a, b = 0.7, -1.3
    c1 = G.convolve_coefficients(f1, params)
    c2 = G.convolve_coefficients(f2, params)
    c12 = G.convolve_coefficients(a * f1 + b * f2, params)
    for name in ("abar", "bbar", "cbar"):
        x, y = getattr(c12, name), a * getattr(c1, name) + b * getattr(c2, name)
        assert np.abs(x - y).max() <= 1e-12 * np.abs(y).max()


def test_convolution_rejects_nonfinite(grid16):
    vals = np.zeros((16,) * 3)
    vals[3, 3, 3] = np.nan
    with pytest.raises(ValueError):
        G.convolve_coefficients(G.ScalarField(grid16, vals), KernelParams())


@pytest.mark.parametrize("regularized", [True, False])
def test_trace_identity(grid16, bump16, regularized):
    p = KernelParams(1.0, 0.05)
    c = G.convolve_coefficients(bump16, p, regularized=regularized, parts="a")
    key = ("radial_reg", 1.0, 0.05) if regularized else ("pow", 3.0, 0.0)
    radial = G.convolve_scalar(bump16, key)
    tr = c.abar[0] + c.abar[1] + c.abar[2]
    assert np.abs(tr - 2 * radial).max() <= 1e-12 * np.abs(tr).max()


def test_rotation_covariance(grid16, rng, params):
    f = _random_field(grid16, rng)
    c = G.convolve_coefficients(f, params)
    cr = G.convolve_coefficients(G.rotate_quarter_turn(f), params)
    expect = G.rotate_coefficients(c)
    for name in ("abar", "bbar", "cbar"):
        x, y = getattr(cr, name), getattr(expect, name)
        assert np.abs(x - y).max() <= 1e-12 * np.abs(y).max()


def test_psd_and_sign(grid16, bump16, params):
    c = G.convolve_coefficients(bump16, params)
    lo, hi = G.sym_eig_extremes(c.abar)
    assert lo.min() >= -1e-10 * c.scale()
    assert c.cbar.max() <= 1e-10 * np.abs(c.cbar).max()


def test_sym_eig_extremes_matches_eigvalsh(rng):
    a6 = rng.normal(size=(6, 50))
    lo, hi = G.sym_eig_extremes(a6)
    m = np.zeros((50, 3, 3))
    for k, (i, j) in enumerate(K.SYM_PAIRS):
        m[:, i, j] = m[:, j, i] = a6[k]
    ev = np.linalg.eigvalsh(m)
    np.testing.assert_allclose(lo, ev[:, 0], atol=1e-12)
    np.testing.assert_allclose(hi, ev[:, 2], atol=1e-12)


# --------------------------------------------------------------------------
# stencils


def _coeffs(grid, a_diag=(1.0, 1.0, 1.0), b=None, c=None):
    shape = (grid.n,) * 3
    a6 = np.zeros((6,) + shape)
    for i in range(3):
        a6[i] = a_diag[i]
    return G.CoefficientField(grid, a6, b, c)


def test_divergence_flux_constant_is_zero(grid16):
    f = G.ScalarField(grid16, np.full((16,) * 3, 2.5))
    out = G.divergence_flux(_coeffs(grid16, b=np.zeros((3, 16, 16, 16))), f)
    assert np.abs(out.values).max() == 0.0


def test_divergence_flux_quadratic(grid16):
    f = G.ScalarField(grid16, grid16.speed2())
    out = G.divergence_flux(_coeffs(grid16), f).values
    np.testing.assert_allclose(out[1:-1, 1:-1, 1:-1], 6.0, rtol=1e-12)


def test_divergence_flux_telescopes(grid16, bump16, params, rng):
    c = G.convolve_coefficients(bump16, params, parts="ab")
    for f in (bump16, _random_field(grid16, rng)):
        out = G.divergence_flux(c, f)
        assert abs(out.values.sum() * grid16.cell_volume) <= 1e-12 * np.abs(out.values).sum() * grid16.cell_volume
    mask = grid16.ball_mask()
    out = G.divergence_flux(c, bump16, mask=mask)
    assert abs(out.values.sum()) <= 1e-12 * np.abs(out.values).sum()
    assert np.all(out.values[~mask] == 0)


def test_hessian_examples(grid16):
    q = G.ScalarField(grid16, grid16.speed2())
    out = G.hessian_apply(_coeffs(grid16), q).values
    np.testing.assert_allclose(out[1:-1, 1:-1, 1:-1], 6.0, rtol=1e-12)
    v1 = G.ScalarField(grid16, np.sin(grid16.mesh()[0]))
    out = G.hessian_apply(_coeffs(grid16, (0.0, 1.0, 1.0)), v1).values
    assert np.abs(out[:, 1:-1, 1:-1]).max() <= 1e-14
    c = G.CoefficientField(grid16, None, None, np.full((16,) * 3, -6.0))
    np.testing.assert_array_equal(G.zeroth_apply(c, G.ScalarField(grid16, np.ones((16,) * 3))).values, -6.0)


def test_mixed_derivative_stencil(grid16):
    v = grid16.mesh()
    f = G.ScalarField(grid16, v[0] * v[1])
    a6 = np.zeros((6,) + (16,) * 3)
    a6[3] = 1.0
    out = G.hessian_apply(G.CoefficientField(grid16, a6, None, None), f).values
    np.testing.assert_allclose(out[1:-1, 1:-1, :], 2.0, rtol=1e-12)


def test_weak_divergence_conserves(grid24, params):
    f = S.two_bump(grid24)
    mask = grid24.ball_mask()
    inner = G.interior_mask(f.values.shape, mask)
    c = G.weak_coefficients(f, params, True, inner)
    L = G.weak_divergence(c.abar, c.bbar, f.values, grid24.h, inner, mask, 0.05)
    v = grid24.mesh()
    scale = np.abs(L).sum()
    assert abs(L.sum()) <= 1e-13 * scale
    for i in range(3):
        assert abs((v[i] * L).sum()) <= 1e-12 * scale * 6
    # only the added diffusion changes the energy: 3 eps M (closed faces, mass far from the boundary)
    dE = 0.5 * (grid24.speed2() * L).sum() * grid24.cell_volume
    assert dE == pytest.approx(3 * 0.05 * f.mass(), rel=1e-6)


def test_weak_coefficients_drift_approximates_b(grid24, params):
    f = S.two_bump(grid24)
    c = G.weak_coefficients(f, params, True, G.interior_mask(f.values.shape, grid24.ball_mask()))
    ref = G.convolve_coefficients(f, params, parts="b")
    bulk = f.values > 1e-3 * f.values.max()
    err = np.abs(c.bbar - ref.bbar)[:, bulk].max() / np.abs(ref.bbar[:, bulk]).max()
    assert err < 0.05


def test_interior_mask_depth():
    act = np.ones((16,) * 3, dtype=bool)
    inner = G.interior_mask(act.shape, act)
    assert inner[2:-2, 2:-2, 2:-2].all()
    assert not inner[1].any() and not inner[:, -2].any()


def test_neumann_laplacian_conserves(grid16, bump16):
    mask = grid16.ball_mask()
    L = G.neumann_laplacian(bump16.values, grid16.h, mask)
    assert abs(L.sum()) <= 1e-13 * np.abs(L).sum()
    assert np.all(L[~mask] == 0)


# --------------------------------------------------------------------------
# backends


def test_backends_agree(grid16, rng):
    n = grid16.n
    f = rng.normal(size=(n,) * 3)
    a6 = rng.normal(size=(6,) + (n,) * 3)
    b3 = rng.normal(size=(3,) + (n,) * 3)
    inner = rng.random((n,) * 3) > 0.3
    h = grid16.h
    for x, y in zip(B.face_fluxes(f, a6, b3, h), B.python_face_fluxes(f, a6, b3, h)):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(B.hessian_contract(f, a6, h), B.python_hessian_contract(f, a6, h),
                               rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(B.centred_flux_divergence(f, a6, b3, inner.view(np.uint8), h),
                               B.python_centred_flux_divergence(f, a6, b3, inner, h), rtol=1e-12, atol=1e-12)


def test_backend_name():
    assert B.BACKEND in ("native", "python")


# --------------------------------------------------------------------------
# rotations, quadrature, snapshots


def test_rotation_index_map(grid16):
    vals = np.zeros((16,) * 3)
    vals[2, 5, 7] = 1.0
    out = G.rotate_quarter_turn(G.ScalarField(grid16, vals)).values
    assert out[16 - 1 - 5, 2, 7] == 1.0 and out.sum() == 1.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_rotation_order_four_and_mass(seed):
    g = G.VelocityGrid(16, 6.0)
    f = G.ScalarField(g, np.random.default_rng(seed).random((16,) * 3))
    r = f
    for _ in range(4):
        r = G.rotate_quarter_turn(r)
    np.testing.assert_array_equal(r.values, f.values)
    assert G.rotate_quarter_turn(f).mass() == pytest.approx(f.mass(), rel=1e-14)


def test_rotation_realizes_turn(grid16):
    v = grid16.mesh()
    f = G.ScalarField(grid16, np.exp(-((v[0] - 1) ** 2 + 2 * v[1] ** 2)))
    # f o T^-1 with T e1 = e2: value at v equals f(T^-1 v) = f(v2, -v1, v3)
    expect = np.exp(-((v[1] - 1) ** 2 + 2 * v[0] ** 2))
    np.testing.assert_allclose(G.rotate_quarter_turn(f).values, expect, rtol=1e-13)


def test_rotation_needs_even_n():
    with pytest.raises(ValueError):
        G.rotate_quarter_turn_array(np.zeros((5, 5, 5)))


def test_integrate_weighted_maxwellian():
    g = G.VelocityGrid(48, 6.0)
    m = S.maxwellian(1.0, g)
    assert G.integrate_weighted(m, np.ones((48,) * 3)) == pytest.approx(1.0, rel=1e-14)
    # oracle: second moment of the unit Gaussian, 3; erf tail beyond R=6 is below 1e-7
    assert G.integrate_weighted(m, g.speed2()) == pytest.approx(3.0, rel=1e-3)
    assert G.integrate_weighted(m, lambda v: 1 + (v**2).sum(axis=0)) == pytest.approx(4.0, rel=1e-3)
    with pytest.raises(ValueError):
        G.integrate_weighted(m, np.full((48,) * 3, np.inf))


def test_lndf_roundtrip(tmp_path, grid16, rng):
    f = _random_field(grid16, rng)
    p = tmp_path / "x.lndf"
    G.write_lndf(p, f, 0.5, 1.25)
    g, gamma, t = G.read_lndf(p)
    assert g.grid == grid16 and gamma == 0.5 and t == 1.25
    np.testing.assert_array_equal(g.values, f.values)
    raw = p.read_bytes()
    assert raw[:4] == b"LNDF"
    assert len(raw) == 4 + 4 + 4 + 8 * 3 + 8 * 16**3
    (tmp_path / "bad.lndf").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        G.read_lndf(tmp_path / "bad.lndf")
    (tmp_path / "magic.lndf").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        G.read_lndf(tmp_path / "magic.lndf")
