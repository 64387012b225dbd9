"""Quadratic matrix pencil f(s) = a s^2 + (a1+a1^T) s + a2 - rho and its
spectral factorization f(s) = (s - q*) a (s - q), spec(q) in the lower
half-plane.

Two independent routes compute q: collecting the decaying eigenpairs of the
companion linearization (fast, primary), and a contour-free integral
representation a q f0 = -pi i Id + f1 built from quadrature of f(s)^{-1}
over the real line (derivative-free, robust fallback and cross-check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .material import Material, SurfaceFrame, acoustic_tensor

ELLIPTICITY_MARGIN = 1e-8
RESIDUAL_TOL = 1e-8
COND_LIMIT = 1e8
QUAD_RELTOL = 1e-10
QUAD_MAX_NODES = 4096


class NonEllipticError(ValueError):
    """Pencil has (near-)real spectrum or indefinite f(0); no factorization."""


class EigenSolverError(RuntimeError):
    """The dense eigensolver failed to converge on the companion matrix."""


class FactorizationError(RuntimeError):
    """Both factorization routes missed the residual tolerance."""


class QuadratureError(RuntimeError):
    """Panel-doubling quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class QuadraticPencil:
    """Coefficients a = c(nu), a1 = c(nu, xi), a2 = c(xi), and density rho."""

    a: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    rho: float

    def __post_init__(self):
        for name in ("a", "a1", "a2"):
            m = np.ascontiguousarray(getattr(self, name), dtype=float)
            m.flags.writeable = False
            object.__setattr__(self, name, m)

    @property
    def b(self) -> np.ndarray:
        """First-order coefficient a1 + a1^T."""
        return self.a1 + self.a1.T

    @property
    def c(self) -> np.ndarray:
        """Zeroth-order coefficient a2 - rho Id."""
        return self.a2 - self.rho * np.eye(3)

    def __call__(self, s) -> np.ndarray:
        """Evaluate f(s); selfadjoint with real coefficients for real s."""
        return self.a * s * s + self.b * s + self.c


def build_pencil(mat: Material, frame: SurfaceFrame, xi_mag: float) -> QuadraticPencil:
    """Pencil of the half-space problem at tangential covector xi = xi_mag * tangent."""
    if not xi_mag > 0:
        raise ValueError(f"xi_mag must be positive, got {xi_mag}")
    c4 = mat.tensor()
    xi = xi_mag * frame.tangent
    a = acoustic_tensor(c4, frame.nu)
    a = 0.5 * (a + a.T)
    if np.linalg.eigvalsh(a)[0] <= 0.0:
        raise ValueError("c(nu) is not positive definite; material is not strongly convex")
    a1 = acoustic_tensor(c4, frame.nu, xi)
    a2 = acoustic_tensor(c4, xi)
    return QuadraticPencil(a=a, a1=a1, a2=0.5 * (a2 + a2.T), rho=mat.density)


def companion_matrix(p: QuadraticPencil) -> np.ndarray:
    """First companion form of a^{-1} f(s); a is positive definite so this is stable."""
    top = np.hstack([np.zeros((3, 3)), np.eye(3)])
    bottom = -np.linalg.solve(p.a, np.hstack([p.c, p.b]))
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class PencilSpectrum:
    """Six eigenpairs of the pencil; values sorted by imaginary part."""

    values: np.ndarray       # (6,) complex
    vectors: np.ndarray      # (3, 6) complex, unit columns
    residuals: np.ndarray    # (6,) relative residuals |f(s)v| / (|f(s)| |v|)

    @property
    def margin(self) -> float:
        """min |Im s| / (1 + |s|) over the spectrum."""
        return float(np.min(np.abs(self.values.imag) / (1.0 + np.abs(self.values))))


def pencil_spectrum(p: QuadraticPencil) -> PencilSpectrum:
    """Eigenpairs of f via the companion linearization.

    For an elliptic pencil exactly three eigenvalues have Im s < 0 (the
    decaying partial waves).
    """
    try:
        vals, vecs = np.linalg.eig(companion_matrix(p))
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"companion eigensolver failed: {exc}") from exc
    order = np.argsort(vals.imag, kind="stable")
    vals = vals[order]
    v = vecs[:3, order]
    norms = np.linalg.norm(v, axis=0)
    # An eigenvector with vanishing top half can only occur for s = 0, which
    # needs singular a2 - rho; fall back to the bottom half in that case.
    bad = norms < 1e-12
    if np.any(bad):
        v[:, bad] = vecs[3:, order][:, bad]
        norms = np.linalg.norm(v, axis=0)
    v = v / norms
    res = np.array(
        [np.linalg.norm(p(s) @ v[:, k]) / max(np.linalg.norm(p(s)), 1e-300)
         for k, s in enumerate(vals)]
    )
    return PencilSpectrum(values=vals, vectors=v, residuals=res)


@dataclass(frozen=True)
class EllipticityResult:
    elliptic: bool
    margin: float


def is_elliptic(p: QuadraticPencil) -> EllipticityResult:
    """f(s) positive definite for all real s, with a relative spectral margin.

    Equivalent check: the pencil spectrum stays off the real axis (margin
    above 1e-8) and f(0) is positive definite.
    """
    spec = pencil_spectrum(p)
    margin = spec.margin
    f0_pd = bool(np.linalg.eigvalsh(0.5 * (p.c + p.c.T))[0] > 0.0)
    return EllipticityResult(elliptic=bool(margin > ELLIPTICITY_MARGIN) and f0_pd, margin=margin)


@dataclass(frozen=True)
class SpectralFactor:
    """Factor q with spec(q) in the lower half-plane, plus residual diagnostics."""

    q: np.ndarray
    method: str                      # "eigen" or "integral"
    residual_solvency: float
    residual_factorization: float
    spectral_margin: float
    eigvec_condition: float = field(default=float("nan"), compare=False)


@dataclass(frozen=True)
class FactorResiduals:
    solvency: float
    factor_max: float


def factor_residuals(p: QuadraticPencil, q: np.ndarray) -> FactorResiduals:
    """Residuals of the solvency equation and of the factorization identity.

    solvency   = |a q^2 + (a1+a1^T) q + a2 - rho| / |a2|
    factor_max = max over s in {-3,-1,0,1,3} * scale of
                 |f(s) - (s-q*) a (s-q)| / |f(s)|
    """
    solvency = np.linalg.norm(p.a @ q @ q + p.b @ q + p.c) / np.linalg.norm(p.a2)
    scale = math.sqrt(np.linalg.norm(p.c) / np.linalg.norm(p.a))
    worst = 0.0
    eye = np.eye(3)
    for s in (-3.0, -1.0, 0.0, 1.0, 3.0):
        s *= scale
        lhs = p(s)
        rhs = (s * eye - q.conj().T) @ p.a @ (s * eye - q)
        worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))
    return FactorResiduals(solvency=float(solvency), factor_max=float(worst))


def _tan_panel(scale: float, theta_lo: float, theta_hi: float, n: int):
    """Gauss-Legendre nodes/weights for s = scale * tan(theta) on one panel."""
    x, w = leggauss(n)
    half = 0.5 * (theta_hi - theta_lo)
    theta = theta_lo + half * (x + 1.0)
    tan = np.tan(theta)
    s = scale * tan
    jac = half * scale * (1.0 + tan * tan) * w  # ds = scale sec^2(theta) dtheta
    return s, jac


def _integrate_f0_f1(p: QuadraticPencil, n: int):
    eye = np.eye(3)
    f0 = np.zeros((3, 3))
    f1 = np.zeros((3, 3))
    quarter = 0.25 * math.pi
    # The integration variable is rescaled to the pencil's spectral magnitude
    # so the near-poles of f(s)^{-1} (width ~ spectral margin) occupy an O(1)
    # fraction of the panels.  f1's split moves from |s|=1 to |s|=scale; the
    # two split integrands differ by Id/s, which integrates to zero over any
    # symmetric annulus, so the computed f1 is the |s|=1-split value exactly.
    scale = math.sqrt(np.linalg.norm(p.c) / np.linalg.norm(p.a))
    for lo, hi, outer in ((-2 * quarter, -quarter, True),
                          (-quarter, quarter, False),
                          (quarter, 2 * quarter, True)):
        s, jac = _tan_panel(scale, lo, hi, n)
        fs = (p.a[None, :, :] * (s * s)[:, None, None]
              + p.b[None, :, :] * s[:, None, None] + p.c[None, :, :])
        finv = np.linalg.solve(fs, np.broadcast_to(eye, fs.shape).copy())
        f0 += np.einsum("m,mik->ik", jac, finv)
        if outer:
            g = -(p.b[None, :, :] + p.c[None, :, :] / s[:, None, None])  # (s^2 a - f)/s
            f1 += np.einsum("m,mik->ik", jac, g @ finv)
        else:
            f1 += np.einsum("m,mik->ik", jac * s, p.a[None, :, :] @ finv)
    return f0, f1


@dataclass(frozen=True)
class IntegralFactor:
    f0: np.ndarray
    f1: np.ndarray
    q: np.ndarray
    nodes: int


def factor_integral(p: QuadraticPencil, check: bool = True) -> IntegralFactor:
    """Integral route: f0 = int f(s)^{-1} ds (Hermitian positive definite),
    f1 its |s|=1-split companion, and q = a^{-1} (-pi i Id + f1) f0^{-1}.

    Panels double (64, 128, ...) until the combined relative change drops
    below 1e-10.
    """
    if check and not is_elliptic(p).elliptic:
        raise NonEllipticError("integral factor requires an elliptic pencil")
    n = 64
    f0_prev = f1_prev = None
    while n <= QUAD_MAX_NODES:
        f0, f1 = _integrate_f0_f1(p, n)
        if f0_prev is not None:
            change = (np.linalg.norm(f0 - f0_prev) + np.linalg.norm(f1 - f1_prev)) / (
                np.linalg.norm(f0) + np.linalg.norm(f1)
            )
            if change < QUAD_RELTOL:
                break
        f0_prev, f1_prev = f0, f1
        n *= 2
    else:
        raise QuadratureError(
            f"f0/f1 quadrature did not converge below {QUAD_RELTOL} with {QUAD_MAX_NODES} nodes"
        )
    q = np.linalg.solve(p.a, (-1j * math.pi * np.eye(3) + f1) @ np.linalg.inv(f0))
    return IntegralFactor(f0=f0, f1=f1, q=q, nodes=n)


def spectral_factor(p: QuadraticPencil) -> SpectralFactor:
    """Unique q with f(s) = (s - q*) a (s - q) and spec(q) in Im < 0.

    Primary route: q V = V diag(S) on the three decaying eigenpairs.  Falls
    back to the integral representation when the eigenvector basis is
    ill-conditioned (cond > 1e8) or the residuals miss 1e-8.
    """
    ell = is_elliptic(p)
    if not ell.elliptic:
        raise NonEllipticError(f"pencil is not elliptic (margin {ell.margin:.3e})")
    spec = pencil_spectrum(p)
    neg = spec.values.imag < 0.0
    method = "eigen"
    cond = float("inf")
    q = None
    if np.count_nonzero(neg) == 3:
        v = spec.vectors[:, neg]
        s = spec.values[neg]
        cond = float(np.linalg.cond(v))
        if cond <= COND_LIMIT:
            q = (v * s[None, :]) @ np.linalg.inv(v)
            res = factor_residuals(p, q)
            if max(res.solvency, res.factor_max) > RESIDUAL_TOL:
                q = None
    if q is None:
        method = "integral"
        q = factor_integral(p, check=False).q
        res = factor_residuals(p, q)
        if max(res.solvency, res.factor_max) > RESIDUAL_TOL:
            raise FactorizationError(
                f"both routes exceeded residual tolerance: solvency {res.solvency:.3e}, "
                f"factorization {res.factor_max:.3e}"
            )
    return SpectralFactor(
        q=q,
        method=method,
        residual_solvency=res.solvency,
        residual_factorization=res.factor_max,
        spectral_margin=ell.margin,
        eigvec_condition=cond,
    )
