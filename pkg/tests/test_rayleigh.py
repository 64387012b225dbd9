import math

import numpy as np
import pytest

from surfimp.material import SurfaceFrame
from surfimp.polyfactor import build_pencil, spectral_factor
from surfimp.rayleigh import (
    SCAN_CSV_HEADER,
    eval_p,
    kernel_phase_holonomy,
    limiting_speed,
    rayleigh_point,
    scan_directions,
    tangent_basis,
    _detz_at_speed,
)
from surfimp.isotropic import iso_kernel_vector, rayleigh_cubic_root
from surfimp.presets import isotropic_material, synthetic_anisotropic

from conftest import frame_rotation, random_frame

RAYLEIGH_RATIO_LAM_EQ_MU = 0.91940168676196612


def test_limiting_speed_isotropic(soft_iso, std_frame):
    cs = math.sqrt(1.0e9 / 1000.0)
    assert limiting_speed(soft_iso, std_frame) == pytest.approx(cs, rel=1e-9)


def test_limiting_speed_even(aniso, rng):
    frame = random_frame(rng)
    flipped = SurfaceFrame(frame.nu, -frame.tangent)
    a = limiting_speed(aniso, frame)
    b = limiting_speed(aniso, flipped)
    assert a == pytest.approx(b, rel=1e-9)


def test_rayleigh_point_poisson_ratio(poisson):
    frame = SurfaceFrame(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    pt = rayleigh_point(poisson, frame)
    cs = math.sqrt(30.0e9 / poisson.density)
    assert pt.exists
    assert pt.c_r / cs == pytest.approx(RAYLEIGH_RATIO_LAM_EQ_MU, rel=1e-9)
    assert 0 < pt.c_r < pt.c_lim
    assert pt.slope > 0


def test_rayleigh_point_kernel_structure(soft_iso, std_frame):
    pt = rayleigh_point(soft_iso, std_frame)
    p = build_pencil(soft_iso, std_frame, 1.0 / pt.c_r)
    q = spectral_factor(p).q
    z = 1j * (p.a @ q + p.a1)
    z = 0.5 * (z + z.conj().T)
    eigs = np.linalg.eigvalsh(z)
    scale = np.linalg.norm(z)
    assert min(abs(eigs)) < 1e-7 * scale
    assert np.sum(eigs > 1e-7 * scale) == 2
    assert pt.res_kernel < 1e-7


def test_rayleigh_point_even(aniso, rng):
    frame = random_frame(rng)
    flipped = SurfaceFrame(frame.nu, -frame.tangent)
    a = rayleigh_point(aniso, frame)
    b = rayleigh_point(aniso, flipped)
    assert a.exists and b.exists
    assert a.c_r == pytest.approx(b.c_r, rel=1e-10)


def test_kernel_matches_isotropic_section(soft_iso, std_frame):
    pt = rayleigh_point(soft_iso, std_frame)
    u = 2.0 / 4.0 * 0.5  # mu/(lam+2mu) = 1/4
    t = rayleigh_cubic_root(0.25)
    v_iso_frame = iso_kernel_vector(t)
    rot = frame_rotation(std_frame)
    v_iso_lab = rot @ v_iso_frame
    # both vectors carry the same phase convention (tangent component real > 0)
    np.testing.assert_allclose(pt.kernel, v_iso_lab, atol=1e-8)


def test_eval_p_homogeneity(soft_iso, std_frame):
    xi = 3.7 * std_frame.tangent
    p1 = eval_p(soft_iso, std_frame, xi)
    p2 = eval_p(soft_iso, std_frame, 2.0 * xi)
    assert p2 == pytest.approx(2.0 * p1, rel=1e-12)
    # p = c_r |xi|
    pt = rayleigh_point(soft_iso, std_frame)
    assert p1 == pytest.approx(pt.c_r * 3.7, rel=1e-10)


def test_eval_p_unit_on_variety(soft_iso, std_frame):
    pt = rayleigh_point(soft_iso, std_frame)
    xi = std_frame.tangent / pt.c_r
    assert eval_p(soft_iso, std_frame, xi) == pytest.approx(1.0, rel=1e-10)
    g = _detz_at_speed(soft_iso, std_frame, pt.c_r)
    p = build_pencil(soft_iso, std_frame, 1.0 / pt.c_r)
    z = 1j * (p.a @ spectral_factor(p).q + p.a1)
    assert abs(g) < 1e-6 * np.linalg.norm(z) ** 3


def test_scan_isotropic_constant(soft_iso):
    scan = scan_directions(soft_iso, np.array([0.0, 0.0, 1.0]), 32)
    assert scan.e1_satisfied
    spread = (scan.c_r.max() - scan.c_r.min()) / scan.c_r.min()
    assert spread < 1e-9
    assert np.all(scan.c_r < scan.c_lim)
    assert np.all(scan.slope > 0)
    assert np.all(scan.res_kernel < 1e-7)
    assert np.all(scan.res_riccati < 1e-8)


def test_scan_antipodal_symmetry(aniso):
    n = 16
    scan = scan_directions(aniso, np.array([0.0, 0.0, 1.0]), n)
    assert scan.e1_satisfied
    half = n // 2
    np.testing.assert_allclose(scan.c_r[half:], scan.c_r[:half], rtol=1e-9)


def test_scan_matches_scalar_api(aniso):
    nu = np.array([0.0, 0.0, 1.0])
    n = 8
    scan = scan_directions(aniso, nu, n)
    e1, e2 = tangent_basis(nu)
    for k in (0, 3, 5):
        th = scan.thetas[k]
        d = math.cos(th) * e1 + math.sin(th) * e2
        pt = rayleigh_point(aniso, SurfaceFrame(nu, d))
        assert pt.c_r == pytest.approx(scan.c_r[k], rel=1e-10)
        assert pt.c_lim == pytest.approx(scan.c_lim[k], rel=1e-8)
        assert pt.slope == pytest.approx(scan.slope[k], rel=1e-8)


def test_slope_matches_finite_difference(aniso, rng):
    # slope is d/dt det z(t xi) at t = 1 on the variety, xi = tangent / c_r
    frame = random_frame(rng)
    pt = rayleigh_point(aniso, frame)
    assert pt.exists
    ximag = 1.0 / pt.c_r
    h = 1e-6
    p_plus = build_pencil(aniso, frame, (1 + h) * ximag)
    p_minus = build_pencil(aniso, frame, (1 - h) * ximag)
    def detz(p):
        q = spectral_factor(p).q
        z = 1j * (p.a @ q + p.a1)
        return np.linalg.det(0.5 * (z + z.conj().T)).real
    fd = (detz(p_plus) - detz(p_minus)) / (2 * h)
    assert pt.slope == pytest.approx(fd, rel=1e-5)


def test_scan_csv_schema(soft_iso):
    scan = scan_directions(soft_iso, np.array([0.0, 0.0, 1.0]), 8)
    text = scan.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == SCAN_CSV_HEADER
    assert len(lines) == 9
    row = lines[1].split(",")
    assert len(row) == 13
    assert row[2] == "true"
    float(row[3])  # c_r parses


def test_scan_thread_determinism(aniso):
    nu = np.array([0.0, 0.0, 1.0])
    s1 = scan_directions(aniso, nu, 96, threads=1)
    s4 = scan_directions(aniso, nu, 96, threads=4)
    assert s1.to_csv() == s4.to_csv()


def test_scan_env_threads(aniso, monkeypatch):
    monkeypatch.setenv("RAYLEIGH_THREADS", "2")
    s = scan_directions(aniso, np.array([0.0, 0.0, 1.0]), 64)
    assert s.e1_satisfied


def test_holonomy_isotropic_trivial(soft_iso):
    res = kernel_phase_holonomy(soft_iso, np.array([0.0, 0.0, 1.0]), 64)
    assert abs(res.total_phase) < 1e-6
    res2 = kernel_phase_holonomy(soft_iso, np.array([0.0, 0.0, 1.0]), 128)
    assert abs(res2.total_phase - res.total_phase) < 1e-6
    assert res.max_gap == 0.0


def test_holonomy_overlap_improves(aniso):
    nu = np.array([0.0, 0.0, 1.0])
    worst = []
    for n in (256, 512, 1024):
        scan = scan_directions(aniso, nu, n)
        vs = scan.kernels
        overlaps = [abs(np.vdot(vs[k], vs[(k + 1) % n])) for k in range(n)]
        worst.append(min(overlaps))
    # simple-eigenvector continuity: the per-step overlap tends to 1
    assert worst[0] <= worst[1] + 1e-12 <= worst[2] + 2e-12
    assert worst[-1] > 0.9999


def test_monotone_determinant_along_rays():
    rng = np.random.default_rng(3)
    from surfimp.selftest import monotonicity_samples
    for mat in (isotropic_material(2.0, 1.0, 1000.0), synthetic_anisotropic(11)):
        for _ in range(4):
            frame = random_frame(rng)
            _, g, has_root = monotonicity_samples(mat, frame)
            assert np.all(np.diff(g) > 0)
            crossings = int(np.sum(np.sign(g[1:]) != np.sign(g[:-1])))
            assert crossings == (1 if has_root else 0)


def test_radial_sign_validation_sphere_collar():
    # model check for d_r |xi| = -s22 |xi|: great-circle covector on a sphere
    # of radius R, collar coordinate r (negative inward), metric pulled back
    # from the ball; |xi|^2(r) = 1/(R+r)^2 and s22 = 1/R at r=0
    R = 2.37
    def ximag2(r):
        return 1.0 / (R + r) ** 2
    h = 1e-6
    fd = (ximag2(h) - ximag2(-h)) / (2 * h)
    s22 = 1.0 / R
    assert fd == pytest.approx(-2.0 * s22 * ximag2(0.0), rel=1e-9)
