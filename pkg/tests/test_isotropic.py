import math

import numpy as np
import pytest

from surfimp.impedance import impedance_tensor, radial_derivative_z, solve_zminus
from surfimp.isotropic import (
    CurvatureData,
    build_Y,
    divXc_and_CS,
    iso_blocks,
    iso_impedance_full,
    iso_iq_full,
    iso_kernel_vector,
    iso_scalar_derivatives,
    iso_state,
    iso_state_on_sigma,
    iso_symbol_L,
    rayleigh_cubic_root,
    subprincipal_p,
    _zeta_forms,
)
from surfimp.polyfactor import NonEllipticError, build_pencil, spectral_factor
from surfimp.presets import random_isotropic

from conftest import frame_rotation, random_frame

T_LAM_EQ_MU = 0.84529946162074847     # cubic root at u = 1/3
T_INCOMPRESSIBLE = 0.91262197461572976  # u -> 0 limit


def bisect_quartic_oracle(u, lo=1e-12, hi=1.0 - 1e-12):
    """Independent root finder on ((t-2)^4 - 16(1-t)(1-ut))/t."""
    def f(t):
        return ((t - 2.0) ** 4 - 16.0 * (1.0 - t) * (1.0 - u * t)) / t
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_cubic_root_against_independent_oracle():
    for u in (1.0 / 3.0, 0.25, 0.1, 0.49):
        t = rayleigh_cubic_root(u)
        assert t == pytest.approx(bisect_quartic_oracle(u), abs=1e-13)
        assert 0.0 < t < 1.0
        # the root zeroes the determinant bracket
        assert 4.0 * math.sqrt((1 - t) * (1 - u * t)) - (2 - t) ** 2 == pytest.approx(0.0, abs=1e-12)


def test_cubic_root_frozen_constants():
    assert rayleigh_cubic_root(1.0 / 3.0) == pytest.approx(T_LAM_EQ_MU, abs=1e-13)
    assert rayleigh_cubic_root(1e-12) == pytest.approx(T_INCOMPRESSIBLE, abs=1e-9)
    # incompressible limit satisfies (2-t)^4 = 16(1-t)
    t = rayleigh_cubic_root(1e-12)
    assert (2 - t) ** 4 == pytest.approx(16 * (1 - t), rel=1e-9)


def test_cubic_root_domain():
    with pytest.raises(ValueError):
        rayleigh_cubic_root(0.6)
    with pytest.raises(ValueError):
        rayleigh_cubic_root(0.0)


def test_blocks_unit_case():
    st = iso_state(1.0, 1.0, 1.0, 2.0)  # lam = mu = rho = 1, |xi| = 2
    blocks = iso_blocks(st)
    assert blocks.z22_scalar == pytest.approx(math.sqrt(3.0), rel=1e-14)
    z11 = blocks.z11
    assert z11[0, 0].imag == 0 and z11[1, 1].imag == 0
    assert z11[0, 1] == pytest.approx(np.conj(z11[1, 0]))
    # determinant display equals the product form
    det = np.linalg.det(z11).real
    assert blocks.detz11 == pytest.approx(det, rel=1e-12)


def test_blocks_require_elliptic():
    st = iso_state(1.0, 1.0, 1.0, 0.5)
    with pytest.raises(NonEllipticError):
        iso_blocks(st)


def test_blocks_match_general_route():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        mat = random_isotropic(rng)
        lam = mat.stiffness.voigt[0, 1]
        mu = mat.stiffness.voigt[3, 3]
        frame = random_frame(rng)
        cs = math.sqrt(mu / mat.density)
        ximag = rng.uniform(1.05, 20.0) / cs
        p = build_pencil(mat, frame, ximag)
        data = impedance_tensor(p, spectral_factor(p))
        st = iso_state(lam, mu, mat.density, ximag)
        rot = frame_rotation(frame)
        z_err = np.linalg.norm(rot.T @ data.z @ rot - iso_impedance_full(st))
        worst = max(worst, z_err / np.linalg.norm(data.z))
    assert worst < 1e-10


def test_kernel_vector_on_variety():
    st = iso_state_on_sigma(2.0e9, 1.0e9, 1000.0)
    t = st.t
    b = st.b
    # on the variety 2(2b - t) = t(2 - t)
    assert 2 * (2 * b - t) == pytest.approx(t * (2 - t), rel=1e-12)
    blocks = iso_blocks(st)
    assert abs(blocks.detz11) <= 1e-11 * np.linalg.norm(blocks.z11) ** 2
    v = iso_kernel_vector(t)
    z = iso_impedance_full(st)
    assert np.linalg.norm(z @ v) <= 1e-9 * np.linalg.norm(z)
    assert v[1].imag == 0 and v[1].real > 0


def test_speed_ordering():
    rng = np.random.default_rng(4)
    for _ in range(20):
        lam = rng.uniform(0.1, 100.0) * 1e9
        mu = rng.uniform(0.1, 100.0) * 1e9
        st = iso_state_on_sigma(lam, mu, rng.uniform(500.0, 12000.0))
        assert 0.0 < st.c_r < st.c_s < st.c_p


def test_kernel_vector_matches_general_route(soft_iso, std_frame):
    from surfimp.rayleigh import rayleigh_point
    pt = rayleigh_point(soft_iso, std_frame)
    st = iso_state_on_sigma(2.0e9, 1.0e9, 1000.0)
    rot = frame_rotation(std_frame)
    np.testing.assert_allclose(pt.kernel, rot @ iso_kernel_vector(st.t), atol=1e-8)


def richardson(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h
    return (4.0 * d2 - d1) / 3.0


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(17)
    for _ in range(8):
        lam = rng.uniform(0.5, 50.0) * 1e9
        mu = rng.uniform(0.5, 50.0) * 1e9
        rho = rng.uniform(500.0, 12000.0)
        cs = math.sqrt(mu / rho)
        ximag = rng.uniform(1.2, 10.0) / cs
        st = iso_state(lam, mu, rho, ximag)
        derivs = iso_scalar_derivatives(st)
        args = [lam, mu, rho, ximag]
        f0 = np.array([float(v) for v in _zeta_forms(*args)[:3]])
        for j in range(4):
            def f(x, j=j):
                a = list(args)
                a[j] = x
                return np.array([float(v) for v in _zeta_forms(*a)[:3]])
            fd = richardson(f, args[j], 1e-6 * abs(args[j]))
            scale = np.maximum(np.abs(fd), np.abs(f0) / abs(args[j]))
            assert np.max(np.abs(derivs.zeta_partials[:, j] - fd) / scale) < 1e-7


def test_radial_derivative_consistent_with_rescaling():
    st = iso_state(3.0e9, 1.5e9, 2000.0, 2.0 * math.sqrt(2000.0 / 1.5e9))
    derivs = iso_scalar_derivatives(st)
    # evaluate at s|xi| and differentiate in s at s=1
    def f(s):
        return np.array([float(v) for v in
                         _zeta_forms(st.lam, st.mu, st.rho, s * st.xi_mag)[:3]])
    fd = richardson(f, 1.0, 1e-6)
    np.testing.assert_allclose(derivs.zeta_dot, fd, rtol=1e-7)


def test_joint_scaling_relation():
    # zeta_j(lam, mu, rho, s|xi|) re-evaluated directly vs state at scaled xi
    st1 = iso_state(3.0e9, 1.5e9, 2000.0, 3.0 * math.sqrt(2000.0 / 1.5e9))
    st2 = iso_state(3.0e9, 1.5e9, 2000.0, 2.0 * st1.xi_mag)
    direct = np.array([float(v) for v in
                       _zeta_forms(st1.lam, st1.mu, st1.rho, 2.0 * st1.xi_mag)[:3]])
    blocks2 = iso_blocks(st2)
    np.testing.assert_allclose(
        direct, [blocks2.z11[0, 0].real, blocks2.z11[1, 0].imag, blocks2.z11[1, 1].real],
        rtol=1e-12)


def sigma_state():
    return iso_state_on_sigma(3.7e9, 1.3e9, 2100.0)


def sample_curvature():
    return CurvatureData(s22=0.31, trS=0.74, grad_lambda_t=0.21, grad_mu_t=-0.13,
                         grad_rho_t=0.09, dn_lambda=-0.41, dn_mu=0.17, dn_rho=0.23)


def test_build_Y_zero_curvature():
    st = sigma_state()
    y1, y2, y3 = build_Y(st, CurvatureData.zero())
    assert np.all(y1 == 0) and np.all(y2 == 0) and np.all(y3 == 0)


def test_build_Y_row_vectors_unit_material():
    st = iso_state_on_sigma(1.0, 1.0, 1.0)
    t, ut, b = st.t, st.ut, st.b
    br = subprincipal_p(st, sample_curvature())
    np.testing.assert_allclose(
        br.w1, [(ut - b) * math.sqrt(1 - t), -1j * (b - ut)], rtol=1e-14)
    np.testing.assert_allclose(
        br.w2, [1j * (b - t), math.sqrt(1 - ut) - math.sqrt(1 - t)], rtol=1e-14)


def test_build_Y_linearity():
    st = sigma_state()
    curv = sample_curvature()
    y = build_Y(st, curv)
    for alpha in (2.0, -1.0, 10.0):
        ys = build_Y(st, curv.scaled(alpha))
        for a, b in zip(ys, y):
            np.testing.assert_allclose(a, alpha * b, rtol=1e-12, atol=1e-30)


def test_Y2_consistent_with_tangential_coefficient():
    # rebuild Y2 from (div_X c)(nu) + <C,S> restricted to the frame block
    st = sigma_state()
    curv = sample_curvature()
    _, y2, _ = build_Y(st, curv)
    nu = np.array([0.0, 0.0, 1.0])
    xihat = np.array([1.0, 0.0, 0.0])
    perp = np.array([0.0, 1.0, 0.0])
    grad_lam = curv.grad_lambda_t * xihat
    grad_mu = curv.grad_mu_t * xihat
    # shape operator with <xihat, S xihat> = s22, trace trS, nu in its kernel
    S = np.diag([curv.s22, curv.trS - curv.s22, 0.0])
    div, cs = divXc_and_CS(nu, grad_lam, grad_mu, S, st.lam, st.mu)
    a1m = div + cs
    rot = np.column_stack([nu, xihat, perp])
    a1m_block = (rot.T @ a1m @ rot)[:2, :2]
    K = iso_blocks(st).iq11
    np.testing.assert_allclose(a1m_block @ K, y2, rtol=1e-12)


def test_divXc_zero_gradients():
    div, cs = divXc_and_CS(np.array([1.0, 0, 0]), np.zeros(3), np.zeros(3),
                           np.diag([1.0, 1.0, 0.0]), 1.0, 1.0)
    assert np.all(div == 0)
    np.testing.assert_allclose(cs, 2.0 * np.diag([1.0, 1.0, 0.0]) + 2.0 * np.eye(3))


def test_subprincipal_flat_is_zero():
    br = subprincipal_p(sigma_state(), CurvatureData.zero())
    assert br.psub_direct == 0.0
    assert br.psub_assembled == 0.0
    assert br.re_zminus_vv == 0.0 and br.im_trace == 0.0
    assert np.all(br.X == 0)


def test_subprincipal_two_routes_and_linearity():
    rng = np.random.default_rng(23)
    for _ in range(30):
        lam = rng.uniform(0.1, 100.0) * 1e9
        mu = rng.uniform(0.1, 100.0) * 1e9
        rho = rng.uniform(500.0, 12000.0)
        st = iso_state_on_sigma(lam, mu, rho)
        curv = CurvatureData(*rng.uniform(-1, 1, size=8))
        br = subprincipal_p(st, curv)
        assert np.linalg.norm(br.X - br.X.conj().T) <= 1e-12 * max(np.linalg.norm(br.X), 1e-30)
        assert abs(br.psub_direct - br.psub_assembled) <= 1e-9 * (1 + abs(br.psub_direct))
        hit = subprincipal_p(st, curv.scaled(2.0))
        assert hit.psub_direct == pytest.approx(2.0 * br.psub_direct, rel=1e-9)


def test_subprincipal_radial_slope_against_general_route(soft_iso, std_frame):
    # gamma^2 (zdot v | v) from the impedance route equals the closed form
    st = iso_state_on_sigma(2.0e9, 1.0e9, 1000.0)
    p = build_pencil(soft_iso, std_frame, st.xi_mag)
    data = impedance_tensor(p, spectral_factor(p))
    zdot = radial_derivative_z(data, soft_iso.density)
    rot = frame_rotation(std_frame)
    v = rot @ iso_kernel_vector(st.t)
    gamma = st.m * st.t / 2.0 * math.hypot(2.0 - st.t, 2.0 * math.sqrt(1.0 - st.t))
    lhs = gamma ** 2 * float(np.vdot(v, zdot @ v).real)
    br = subprincipal_p(st, CurvatureData.zero())
    assert lhs == pytest.approx(br.gamma2_lambda0dot, rel=1e-8)


def test_subprincipal_radial_slope_against_finite_difference():
    # gamma^2 lambda0dot equals the FD radial derivative of gamma^2 lambda0
    st = iso_state_on_sigma(3.7e9, 1.3e9, 2100.0)
    def lam0(scale):
        s = iso_state(st.lam, st.mu, st.rho, scale * st.xi_mag)
        z11 = iso_blocks(s).z11
        w = np.linalg.eigvalsh(z11)
        return w[np.argmin(np.abs(w))]
    blocks = iso_blocks(st)
    gamma2 = blocks.z11[0, 0].real ** 2 + blocks.z11[1, 0].imag ** 2
    h = 1e-6
    fd = gamma2 * (lam0(1 + h) - lam0(1 - h)) / (2 * h)
    br = subprincipal_p(st, CurvatureData.zero())
    assert fd == pytest.approx(br.gamma2_lambda0dot, rel=1e-8)


def test_zminus_block_route_matches_hermitian_solve():
    # assemble the frame-block right-hand side of the subprincipal relation,
    # solve the full equation, symmetrize, compare with the Hermitian solve
    st = sigma_state()
    curv = sample_curvature()
    br = subprincipal_p(st, curv)
    derivs = iso_scalar_derivatives(st)
    y1, y2, y3 = build_Y(st, curv, derivs)
    a2m_block = st.xi_mag * np.diag([curv.grad_mu_t,
                                     curv.grad_lambda_t + 2.0 * curv.grad_mu_t])
    y11 = 1j * (y1 + y2 - y3) - a2m_block
    y_full = np.zeros((3, 3), dtype=complex)
    y_full[:2, :2] = y11
    q_full = -1j * iso_iq_full(st)
    a_full = np.diag([st.lam + 2 * st.mu, st.mu, st.mu]).astype(complex)
    zm = solve_zminus(q_full, a_full, y_full)
    x_full = (zm + zm.conj().T)[:2, :2]
    np.testing.assert_allclose(x_full, br.X, rtol=1e-9, atol=1e-12 * np.linalg.norm(br.X))


def test_symbol_L_structure():
    xi = np.array([0.6, -0.2, 0.3])
    lam, mu, rho = 2.0e9, 1.0e9, 1200.0
    principal, sub = iso_symbol_L(lam, mu, rho, (np.zeros(3), np.zeros(3)), xi)
    assert np.all(sub == 0)
    mag2 = xi @ xi
    evs = np.sort(np.linalg.eigvalsh(principal))
    cs2, cp2 = mu / rho, (lam + 2 * mu) / rho
    expect = np.sort([rho * (cp2 * mag2 - 1), rho * (cs2 * mag2 - 1), rho * (cs2 * mag2 - 1)])
    np.testing.assert_allclose(evs, expect, rtol=1e-12)
    # the pressure branch vanishes exactly at c_p |xi| = 1
    xin = xi / math.sqrt(mag2) / math.sqrt(cp2)
    principal, _ = iso_symbol_L(lam, mu, rho, (np.zeros(3), np.zeros(3)), xin)
    proj = np.outer(xin, xin) / (xin @ xin)
    assert np.linalg.norm(principal @ proj) < 1e-6 * np.linalg.norm(principal)


def test_symbol_L_gradient_part():
    xi = np.array([1.0, 2.0, -0.5])
    gl = np.array([0.1, 0.2, 0.3])
    gm = np.array([-0.2, 0.05, 0.4])
    _, sub = iso_symbol_L(2.0, 1.0, 1.0, (gl, gm), xi)
    expected = -1j * (np.outer(gl, xi) + np.outer(xi, gm) + (xi @ gm) * np.eye(3))
    np.testing.assert_allclose(sub, expected, rtol=1e-14)
