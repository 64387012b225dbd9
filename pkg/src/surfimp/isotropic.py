"""Closed forms for the isotropic elastic half-space.

Everything the general route computes numerically has an explicit expression
here — the impedance blocks in the (nu, xi-hat) frame, the Rayleigh cubic,
the kernel section — so this module doubles as the oracle for the anisotropic
machinery.  It also implements the curvature-driven subprincipal correction
of the scalar Rayleigh operator: boundary curvature and tangential/normal
material gradients enter through three 2x2 matrices Y1, Y2, Y3, a Hermitian
2x2 Sylvester solve, and two independently assembled scalar outputs that must
agree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dual import Dual, sqrt as dsqrt, derivative
from .impedance import sylvester_solve
from .polyfactor import NonEllipticError

ON_SIGMA_TOL = 1e-9


def rayleigh_cubic_root(u: float) -> float:
    """Unique root t in (0,1) of t^3 - 8t^2 + (24-16u)t - 16(1-u) = 0.

    This is Rayleigh's cubic: (t-2)^4 = 16(1-t)(1-ut) divided by the spurious
    root at t = 0.  The root also zeroes 4 sqrt((1-t)(1-ut)) - (2-t)^2, and
    c_r = c_s sqrt(t).
    """
    if not (0.0 < u < 0.5):
        raise ValueError(f"u must lie in (0, 1/2), got {u}")

    def h(t):
        return t * t * t - 8.0 * t * t + (24.0 - 16.0 * u) * t - 16.0 * (1.0 - u)

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class IsoSurfaceState:
    """Material + tangential frequency state; dimensionless shortcuts cached.

    t = (c_s |xi|)^-2 and u = (c_s/c_p)^2 drive every closed form;
    sigma_s, sigma_p, tau_s, tau_p and m = mu |xi| / b are the on-variety
    combinations (t = sigma_s^2 exactly when the state lies on it).
    """

    lam: float
    mu: float
    rho: float
    xi_mag: float
    t: float
    u: float
    b: float
    c_s: float
    c_p: float
    c_r: float
    sigma_s: float
    sigma_p: float
    tau_s: float
    tau_p: float
    m: float

    @property
    def ut(self) -> float:
        return self.u * self.t

    @property
    def elliptic(self) -> bool:
        return 0.0 < self.t < 1.0


def _state(lam, mu, rho, xi_mag, t) -> IsoSurfaceState:
    u = mu / (lam + 2.0 * mu)
    c_s = math.sqrt(mu / rho)
    c_p = math.sqrt((lam + 2.0 * mu) / rho)
    t_sigma = rayleigh_cubic_root(u)
    c_r = c_s * math.sqrt(t_sigma)
    sigma_s = c_r / c_s
    sigma_p = c_r / c_p
    if 0.0 < t < 1.0:
        b = (u * t + t - u * t * t) / (1.0 + math.sqrt(1.0 - u * t) * math.sqrt(1.0 - t))
    else:
        b = math.nan  # outside the elliptic range; block formulas refuse it
    return IsoSurfaceState(
        lam=float(lam), mu=float(mu), rho=float(rho), xi_mag=float(xi_mag),
        t=float(t), u=float(u), b=float(b),
        c_s=c_s, c_p=c_p, c_r=c_r,
        sigma_s=sigma_s, sigma_p=sigma_p,
        tau_s=math.sqrt(1.0 - sigma_s * sigma_s),
        tau_p=math.sqrt(1.0 - sigma_p * sigma_p),
        m=float(mu * xi_mag / b),
    )


def iso_state(lam: float, mu: float, rho: float, xi_mag: float) -> IsoSurfaceState:
    """State at tangential covector magnitude xi_mag (elliptic iff c_s xi > 1)."""
    if min(lam, mu, rho, xi_mag) <= 0.0:
        raise ValueError("lam, mu, rho, xi_mag must be positive")
    t = rho / (mu * xi_mag * xi_mag)
    return _state(lam, mu, rho, xi_mag, t)


def iso_state_on_sigma(lam: float, mu: float, rho: float) -> IsoSurfaceState:
    """State on the characteristic variety: |xi| = 1/c_r, t the cubic root.

    t is set to the cubic root to full precision rather than recomputed from
    |xi|; the subprincipal formulas contain removable singularities there and
    an exact-on-variety t avoids catastrophic cancellation.
    """
    u = mu / (lam + 2.0 * mu)
    t = rayleigh_cubic_root(u)
    c_r = math.sqrt(mu / rho) * math.sqrt(t)
    return _state(lam, mu, rho, 1.0 / c_r, t)


# --- scalar closed forms, generic over Dual/float --------------------------


def _zeta_forms(lam, mu, rho, xi):
    """zeta_1, zeta_2, zeta_3, zeta_perp of the impedance blocks."""
    t = rho / (mu * xi * xi)
    ut = rho / ((lam + 2.0 * mu) * xi * xi)
    st = dsqrt(1.0 - t)
    sut = dsqrt(1.0 - ut)
    b = (ut + t - ut * t) / (1.0 + sut * st)  # 1 - sqrt(1-ut) sqrt(1-t), cancellation-free
    m = mu * xi / b
    return m * t * st, m * (2.0 * b - t), m * t * sut, mu * xi * st


def _kappa_forms(cs, cp, xi):
    """kappa_11, kappa_12, kappa_21, kappa_22 of the decay-factor block (iq)_11."""
    t = 1.0 / (cs * cs * xi * xi)
    ut = 1.0 / (cp * cp * xi * xi)
    st = dsqrt(1.0 - t)
    sut = dsqrt(1.0 - ut)
    b = (ut + t - ut * t) / (1.0 + sut * st)  # 1 - sqrt(1-ut) sqrt(1-t), cancellation-free
    f = xi / b
    return f * ut * st, f * (b - ut), f * (b - t), f * t * sut


def _kappa_matrix(k11, k12, k21, k22) -> np.ndarray:
    return np.array([[k11, -1j * k12], [1j * k21, k22]])


def _zeta_matrix(z1, z2, z3) -> np.ndarray:
    return np.array([[z1, -1j * z2], [1j * z2, z3]])


@dataclass(frozen=True)
class IsoBlocks:
    iq11: np.ndarray      # 2x2 complex in the (nu, xi-hat) frame
    z11: np.ndarray       # 2x2 complex Hermitian
    detz11: float
    z22_scalar: float     # mu |xi| sqrt(1-t) on the out-of-plane line


def iso_blocks(st: IsoSurfaceState) -> IsoBlocks:
    """Impedance and decay-factor blocks in the (nu, xi-hat, perp) frame."""
    if not st.elliptic:
        raise NonEllipticError(f"state not elliptic: t = {st.t}")
    t, ut, b, xi, mu = st.t, st.ut, st.b, st.xi_mag, st.mu
    sq_t = math.sqrt(1.0 - t)
    sq_ut = math.sqrt(1.0 - ut)
    iq11 = np.array([[ut * sq_t, -1j * (b - ut)], [1j * (b - t), t * sq_ut]]) * (xi / b)
    z11 = np.array([[t * sq_t, -1j * (2.0 * b - t)], [1j * (2.0 * b - t), t * sq_ut]]) * st.m
    detz11 = mu * mu * xi * xi / b * (4.0 * sq_t * sq_ut - (2.0 - t) ** 2)
    return IsoBlocks(iq11=iq11, z11=z11, detz11=float(detz11), z22_scalar=float(mu * xi * sq_t))


def iso_iq_full(st: IsoSurfaceState) -> np.ndarray:
    """Full 3x3 iq = diag(iq11, |xi| sqrt(1-t)) in the (nu, xi-hat, perp) frame."""
    blocks = iso_blocks(st)
    out = np.zeros((3, 3), dtype=complex)
    out[:2, :2] = blocks.iq11
    out[2, 2] = st.xi_mag * math.sqrt(1.0 - st.t)
    return out


def iso_impedance_full(st: IsoSurfaceState) -> np.ndarray:
    """Full 3x3 impedance diag(z11, mu |xi| sqrt(1-t)) in the frame basis."""
    blocks = iso_blocks(st)
    out = np.zeros((3, 3), dtype=complex)
    out[:2, :2] = blocks.z11
    out[2, 2] = blocks.z22_scalar
    return out


def iso_kernel_vector(t_on_sigma: float) -> np.ndarray:
    """Unit kernel section (i(2-t) nu + 2 sqrt(1-t) xi-hat) / norm on the variety.

    The xi-hat component is real positive, matching the scan phase convention.
    """
    t = float(t_on_sigma)
    v = np.array([1j * (2.0 - t), 2.0 * math.sqrt(1.0 - t), 0.0])
    return v / np.linalg.norm(v)


# --- derivative records -----------------------------------------------------

_PARAMS = ("lam", "mu", "rho", "xi")


@dataclass(frozen=True)
class IsoDerivatives:
    """Forward-mode derivatives of the closed forms at one state.

    zeta_partials[j] holds d zeta_j / d(lam, mu, rho, |xi|); kappa_partials
    likewise for the four kappa entries.  Radial derivatives are
    |xi| * d/d|xi| at fixed material.  Ks, Kp differentiate the decay-factor
    block with respect to the wave speeds at fixed |xi|.
    """

    zeta_partials: np.ndarray   # (3, 4)
    zperp_partials: np.ndarray  # (4,)
    kappa_partials: np.ndarray  # (4, 4)
    zeta_dot: np.ndarray        # (3,) radial
    zperp_dot: float
    kappa_dot: np.ndarray       # (4,) radial
    Ks: np.ndarray              # (2, 2) complex, d(iq)_11 / d c_s
    Kp: np.ndarray              # (2, 2) complex, d(iq)_11 / d c_p
    Kdot: np.ndarray            # (2, 2) complex, radial derivative of (iq)_11


def iso_scalar_derivatives(st: IsoSurfaceState) -> IsoDerivatives:
    if not st.elliptic:
        raise NonEllipticError(f"state not elliptic: t = {st.t}")
    args = (st.lam, st.mu, st.rho, st.xi_mag)
    zp = np.empty((3, 4))
    zperp = np.empty(4)
    for j in range(4):
        seeded = [Dual.variable(a) if i == j else a for i, a in enumerate(args)]
        vals = _zeta_forms(*seeded)
        zp[:, j] = [derivative(v) for v in vals[:3]]
        zperp[j] = derivative(vals[3])
    kp = np.empty((4, 4))
    for j in range(4):
        seeded = [Dual.variable(a) if i == j else a for i, a in enumerate(args)]
        cs = dsqrt(seeded[1] / seeded[2])
        cp = dsqrt((seeded[0] + 2.0 * seeded[1]) / seeded[2])
        vals = _kappa_forms(cs, cp, seeded[3])
        kp[:, j] = [derivative(v) for v in vals]
    speed_args = (st.c_s, st.c_p, st.xi_mag)
    kspeed = np.empty((4, 3))
    for j in range(3):
        seeded = [Dual.variable(a) if i == j else a for i, a in enumerate(speed_args)]
        vals = _kappa_forms(*seeded)
        kspeed[:, j] = [derivative(v) for v in vals]
    return IsoDerivatives(
        zeta_partials=zp,
        zperp_partials=zperp,
        kappa_partials=kp,
        zeta_dot=st.xi_mag * zp[:, 3],
        zperp_dot=float(st.xi_mag * zperp[3]),
        kappa_dot=st.xi_mag * kp[:, 3],
        Ks=_kappa_matrix(*kspeed[:, 0]),
        Kp=_kappa_matrix(*kspeed[:, 1]),
        Kdot=_kappa_matrix(*(st.xi_mag * kspeed[:, 2])),
    )


# --- curvature / gradient data ----------------------------------------------


@dataclass(frozen=True)
class CurvatureData:
    """Boundary shape-operator entries and material gradients in the frame.

    s22 = <xi-hat, S xi-hat>, trS the full trace of the shape operator;
    grad_*_t are tangential xi-hat components of the material gradients,
    dn_* the normal derivatives.  The zero record is a flat homogeneous
    half-space.
    """

    s22: float = 0.0
    trS: float = 0.0
    grad_lambda_t: float = 0.0
    grad_mu_t: float = 0.0
    grad_rho_t: float = 0.0
    dn_lambda: float = 0.0
    dn_mu: float = 0.0
    dn_rho: float = 0.0

    @classmethod
    def zero(cls) -> "CurvatureData":
        return cls()

    def scaled(self, alpha: float) -> "CurvatureData":
        return CurvatureData(*(alpha * x for x in (
            self.s22, self.trS, self.grad_lambda_t, self.grad_mu_t,
            self.grad_rho_t, self.dn_lambda, self.dn_mu, self.dn_rho)))

    @classmethod
    def from_json(cls, text: str) -> "CurvatureData":
        doc = json.loads(text)
        grad = doc.get("grad_t", {})
        dn = doc.get("dn", {})
        return cls(
            s22=float(doc.get("s22", 0.0)),
            trS=float(doc.get("trS", 0.0)),
            grad_lambda_t=float(grad.get("lambda", 0.0)),
            grad_mu_t=float(grad.get("mu", 0.0)),
            grad_rho_t=float(grad.get("rho", 0.0)),
            dn_lambda=float(dn.get("lambda", 0.0)),
            dn_mu=float(dn.get("mu", 0.0)),
            dn_rho=float(dn.get("rho", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps({
            "s22": self.s22,
            "trS": self.trS,
            "grad_t": {"lambda": self.grad_lambda_t, "mu": self.grad_mu_t, "rho": self.grad_rho_t},
            "dn": {"lambda": self.dn_lambda, "mu": self.dn_mu, "rho": self.dn_rho},
        }, indent=2, sort_keys=True)


def build_Y(st: IsoSurfaceState, curv: CurvatureData, derivs: IsoDerivatives | None = None):
    """The three curvature/gradient source matrices of the subprincipal solve.

    Y1 collects tr(S) z11 plus the collar derivative of z11 (chain rule over
    normal material derivatives and the metric stretch d_r |xi| = -s22 |xi|);
    Y2 is the tangential first-order coefficient correction times (iq)_11;
    Y3 contracts vertical against horizontal derivatives of the decay factor.
    All three are jointly linear in the curvature data.
    """
    if derivs is None:
        derivs = iso_scalar_derivatives(st)
    lam, mu, xi = st.lam, st.mu, st.xi_mag
    t, ut, b = st.t, st.ut, st.b
    blocks = iso_blocks(st)
    K = blocks.iq11

    dn = np.array([curv.dn_lambda, curv.dn_mu, curv.dn_rho])
    dr_zeta = derivs.zeta_partials[:, :3] @ dn + derivs.zeta_partials[:, 3] * (-curv.s22 * xi)
    Y1 = curv.trS * blocks.z11 + _zeta_matrix(*dr_zeta)

    a1m = np.array([
        [mu * curv.trS, curv.grad_mu_t],
        [curv.grad_lambda_t, mu * curv.trS + (lam + mu) * curv.s22],
    ])
    Y2 = a1m @ K

    gcs = 0.5 * st.c_s * (curv.grad_mu_t / mu - curv.grad_rho_t / st.rho)
    gcp = 0.5 * st.c_p * ((curv.grad_lambda_t + 2.0 * curv.grad_mu_t) / (lam + 2.0 * mu)
                          - curv.grad_rho_t / st.rho)
    sq_t = math.sqrt(1.0 - t)
    sq_ut = math.sqrt(1.0 - ut)
    M = np.array([[0.0, (ut - b) * sq_t], [(ut - b) * sq_t, 1j * (ut - t)]])
    w1 = np.array([(ut - b) * sq_t, -1j * (b - ut)])
    w2 = np.array([1j * (b - t), sq_ut - sq_t])
    A = np.diag([lam + 2.0 * mu, mu])
    Y3 = 1j * (derivs.Kdot.conj().T @ A @ ((gcs / xi) * derivs.Ks + (gcp / xi) * derivs.Kp
                                           + (curv.s22 / b) * M)) \
        + 1j * (mu * xi / (b * b)) * (curv.trS - curv.s22) * np.outer(w2.conj(), w1)
    return Y1, Y2, Y3


@dataclass(frozen=True)
class SubprincipalBreakdown:
    """All intermediates of the subprincipal evaluation at one state."""

    Y1: np.ndarray
    Y2: np.ndarray
    Y3: np.ndarray
    K: np.ndarray
    A: np.ndarray
    M: np.ndarray
    Kdot: np.ndarray
    Ks: np.ndarray
    Kp: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    X: np.ndarray
    re_zminus_vv: float       # Re(z_minus w | w) with w the scaled kernel
    im_trace: float           # gamma^2-scaled imaginary trace term
    gamma2_lambda0dot: float  # gamma^2-scaled radial eigenvalue slope
    N: float
    psub_direct: float
    psub_assembled: float


def subprincipal_p(st: IsoSurfaceState, curv: CurvatureData) -> SubprincipalBreakdown:
    """Subprincipal symbol of the Rayleigh operator at an on-variety state.

    Two routes are evaluated and returned: the closed-form display
    (psub_direct) and the assembly Re(z_minus w|w) + imaginary-trace term over
    the radial eigenvalue slope (psub_assembled), with w = (mt/2)(i(2-t) nu +
    2 sqrt(1-t) xi-hat) the scaled kernel vector.  They agree to rounding;
    a gap signals broken ingredients.
    """
    T = rayleigh_cubic_root(st.u)
    if abs(st.t - T) > ON_SIGMA_TOL * (1.0 + T):
        raise ValueError(
            f"state must lie on the characteristic variety: t = {st.t}, root = {T}"
        )
    derivs = iso_scalar_derivatives(st)
    Y1, Y2, Y3 = build_Y(st, curv, derivs)
    blocks = iso_blocks(st)
    K = blocks.iq11
    rhs = -2.0 * Y1 - Y2 - Y2.conj().T + Y3 + Y3.conj().T
    X = sylvester_solve(K, rhs)

    t = st.t
    mu, c_r = st.mu, st.c_r
    m = st.m
    ss2 = st.sigma_s ** 2
    tau_s, tau_p = st.tau_s, st.tau_p
    zdot2, zdot3 = derivs.zeta_dot[1], derivs.zeta_dot[2]
    s22, trS = curv.s22, curv.trS

    w = (m * t / 2.0) * np.array([1j * (2.0 - t), 2.0 * math.sqrt(1.0 - t)])
    re_zminus_vv = 0.5 * float(np.vdot(w, X @ w).real)

    im_trace = (
        m ** 3 / mu * c_r ** 2 * ss2 ** 3 * (4.0 - ss2) * (2.0 - ss2)
        * (2.0 * tau_s * zdot3 - (2.0 - ss2) * zdot2) * s22
        + 2.0 * m ** 3 * c_r * ss2 ** 3 * (2.0 - ss2)
        * (5.0 * ss2 - 4.0 - ss2 * ss2) * (trS - s22)
    ) / 16.0

    N = tau_s * (tau_p / tau_s + st.u * tau_s / tau_p + ss2 - 2.0)
    gamma2_lambda0dot = m ** 3 * ss2 ** 3 * (4.0 - ss2) * N

    psub_assembled = (re_zminus_vv + im_trace) / gamma2_lambda0dot

    x11 = float(X[0, 0].real)
    x22 = float(X[1, 1].real)
    x12 = complex(X[0, 1])
    psub_direct = (
        (c_r / (2.0 * mu)) * (x11 * (2.0 - ss2) ** 2 + 4.0 * x22 * (1.0 - ss2)
                              + 4.0 * x12.imag * (2.0 - ss2) * tau_s)
        + (c_r ** 2 / mu) * (2.0 - ss2) * (2.0 * tau_s * zdot3 - (2.0 - ss2) * zdot2) * s22
        + 2.0 * c_r / (4.0 - ss2) * (2.0 - ss2) * (5.0 * ss2 - 4.0 - ss2 * ss2) * (trS - s22)
    ) / (16.0 * N)

    sq_t = math.sqrt(1.0 - t)
    sq_ut = math.sqrt(1.0 - st.ut)
    return SubprincipalBreakdown(
        Y1=Y1, Y2=Y2, Y3=Y3, K=K,
        A=np.diag([st.lam + 2.0 * mu, mu]),
        M=np.array([[0.0, (st.ut - st.b) * sq_t], [(st.ut - st.b) * sq_t, 1j * (st.ut - t)]]),
        Kdot=derivs.Kdot, Ks=derivs.Ks, Kp=derivs.Kp,
        w1=np.array([(st.ut - st.b) * sq_t, -1j * (st.b - st.ut)]),
        w2=np.array([1j * (st.b - t), sq_ut - sq_t]),
        X=X,
        re_zminus_vv=re_zminus_vv,
        im_trace=float(im_trace),
        gamma2_lambda0dot=float(gamma2_lambda0dot),
        N=float(N),
        psub_direct=float(psub_direct),
        psub_assembled=float(psub_assembled),
    )


# --- symbol-level helpers ----------------------------------------------------


def iso_symbol_L(lam: float, mu: float, rho: float, grads, xi) -> tuple[np.ndarray, np.ndarray]:
    """Principal and sub-leading symbol of the reduced isotropic wave operator.

    grads = (grad_lambda, grad_mu) as 3-vectors.  The principal part splits
    along the propagation projector P = xi-hat (x) xi-hat; the sub part is
    -i (grad_lambda (x) xi + (grad_mu (x) xi)^T + <xi, grad_mu> Id) and
    vanishes for homogeneous media.
    """
    xi = np.asarray(xi, dtype=float)
    mag2 = float(xi @ xi)
    if mag2 == 0.0:
        raise ValueError("xi must be nonzero")
    grad_lambda, grad_mu = (np.asarray(g, dtype=float) for g in grads)
    proj = np.outer(xi, xi) / mag2
    cs2 = mu / rho
    cp2 = (lam + 2.0 * mu) / rho
    principal = rho * (cp2 * mag2 - 1.0) * proj + rho * (cs2 * mag2 - 1.0) * (np.eye(3) - proj)
    sub = -1j * (np.outer(grad_lambda, xi) + np.outer(xi, grad_mu)
                 + float(xi @ grad_mu) * np.eye(3))
    return principal, sub


def divXc_and_CS(zeta, grad_lambda, grad_mu, S, lam: float, mu: float):
    """Tangential divergence of the acoustic tensor and the stiffness-shape
    contraction for an isotropic medium:

        (div_X c)(zeta) = grad_lambda (x) zeta + (grad_mu (x) zeta)^T
                          + <zeta, grad_mu> Id
        <C, S>          = (lam + mu) S + (mu tr S) Id
    """
    zeta = np.asarray(zeta, dtype=float)
    grad_lambda = np.asarray(grad_lambda, dtype=float)
    grad_mu = np.asarray(grad_mu, dtype=float)
    S = np.asarray(S, dtype=float)
    div = (np.outer(grad_lambda, zeta) + np.outer(zeta, grad_mu)
           + float(zeta @ grad_mu) * np.eye(3))
    cs = (lam + mu) * S + mu * np.trace(S) * np.eye(3)
    return div, cs
