"""Surface impedance tensor z = i(a q + a1), its identity diagnostics, and
small dense Sylvester solves.

On the elliptic region z is Hermitian with positive definite real part; it
satisfies the Riccati identity (z + i a1*) a^{-1} (z - i a1) = a2 - rho and
the Barnett-Lothe relation Re z = pi f0^{-1}.  Both are exposed as relative
residuals rather than assumptions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyfactor import (
    QuadraticPencil,
    SpectralFactor,
    FactorizationError,
    factor_integral,
)

HERMITICITY_FAIL = 1e-6
NONPOSITIVE_EIG_TOL = 1e-9  # lambda <= tol * |z| counts as non-positive
SEPARATION_TOL = 1e-10


class SpectralSeparationError(RuntimeError):
    """Sylvester operator is (near-)singular: spectra are not separated."""


@dataclass(frozen=True)
class ImpedanceDiagnostics:
    """Relative residuals of the impedance identities at one elliptic point."""

    hermiticity: float
    riccati: float
    barnett_lothe: float
    solvency: float
    re_z_min_eigenvalue: float
    re_z_positive_definite: bool
    nonpositive_eigenvalues: int  # of z itself; uniqueness needs <= 1

    def to_dict(self) -> dict:
        return {
            "hermiticity": self.hermiticity,
            "riccati": self.riccati,
            "barnett_lothe": self.barnett_lothe,
            "solvency": self.solvency,
            "re_z_min_eigenvalue": self.re_z_min_eigenvalue,
            "re_z_positive_definite": self.re_z_positive_definite,
            "nonpositive_eigenvalues": self.nonpositive_eigenvalues,
        }


@dataclass(frozen=True)
class ImpedanceData:
    """Hermitian-symmetrized impedance with its ingredients and diagnostics."""

    z: np.ndarray          # (3,3) complex, Hermitian part of i(aq + a1)
    q: np.ndarray
    f0: np.ndarray
    diagnostics: ImpedanceDiagnostics


def riccati_residual(z: np.ndarray, p: QuadraticPencil) -> float:
    """|(z + i a1^T) a^{-1} (z - i a1) - (a2 - rho)| / |a2 - rho|."""
    lhs = (z + 1j * p.a1.T) @ np.linalg.solve(p.a, z - 1j * p.a1)
    return float(np.linalg.norm(lhs - p.c) / np.linalg.norm(p.c))


def impedance_tensor(p: QuadraticPencil, sf: SpectralFactor, f0: np.ndarray | None = None) -> ImpedanceData:
    """Impedance z = i(a q + a1), Hermitian-symmetrized.

    The raw hermiticity defect is kept as a diagnostic; a defect above 1e-6
    signals a broken factorization upstream and raises.  f0 is integrated by
    quadrature when not supplied (it feeds the Barnett-Lothe residual).
    """
    z_raw = 1j * (p.a @ sf.q + p.a1)
    scale = np.linalg.norm(z_raw)
    defect = float(np.linalg.norm(z_raw - z_raw.conj().T) / scale)
    if defect > HERMITICITY_FAIL:
        raise FactorizationError(
            f"impedance hermiticity defect {defect:.3e} exceeds {HERMITICITY_FAIL}; "
            "spectral factorization is unreliable at this point"
        )
    z = 0.5 * (z_raw + z_raw.conj().T)
    if f0 is None:
        f0 = factor_integral(p, check=False).f0
    eig_z = np.linalg.eigvalsh(z)
    re_eigs = np.linalg.eigvalsh(0.5 * (z.real + z.real.T))
    diag = ImpedanceDiagnostics(
        hermiticity=defect,
        riccati=riccati_residual(z, p),
        barnett_lothe=float(
            np.linalg.norm(z.real - np.pi * np.linalg.inv(f0)) / scale
        ),
        solvency=sf.residual_solvency,
        re_z_min_eigenvalue=float(re_eigs[0]),
        re_z_positive_definite=bool(re_eigs[0] > 0.0),
        nonpositive_eigenvalues=int(np.sum(eig_z <= NONPOSITIVE_EIG_TOL * scale)),
    )
    return ImpedanceData(z=z, q=sf.q, f0=f0, diagnostics=diag)


def impedance_diagnostics(data: ImpedanceData, p: QuadraticPencil) -> ImpedanceDiagnostics:
    """Recompute the identity residuals for given impedance data."""
    z = data.z
    scale = np.linalg.norm(z)
    eig_z = np.linalg.eigvalsh(z)
    re_eigs = np.linalg.eigvalsh(0.5 * (z.real + z.real.T))
    solvency = float(
        np.linalg.norm(p.a @ data.q @ data.q + p.b @ data.q + p.c) / np.linalg.norm(p.a2)
    )
    return ImpedanceDiagnostics(
        hermiticity=float(np.linalg.norm(z - z.conj().T) / scale),
        riccati=riccati_residual(z, p),
        barnett_lothe=float(np.linalg.norm(z.real - np.pi * np.linalg.inv(data.f0)) / scale),
        solvency=solvency,
        re_z_min_eigenvalue=float(re_eigs[0]),
        re_z_positive_definite=bool(re_eigs[0] > 0.0),
        nonpositive_eigenvalues=int(np.sum(eig_z <= NONPOSITIVE_EIG_TOL * scale)),
    )


def sylvester_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A* X + X A = B by the dense Kronecker system.

    Requires the spectra of A and -A* to be separated; for A = i q with
    spec(q) in the lower half-plane the separation is automatic and the
    integral representation X = int_0^inf exp(-rA)* B exp(-rA) dr applies,
    so Hermitian positive definite B yields Hermitian positive definite X.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = a.shape[0]
    lam = np.linalg.eigvals(a)
    sep = np.min(np.abs(lam[:, None] + lam.conj()[None, :]))
    if sep <= SEPARATION_TOL * np.linalg.norm(a):
        raise SpectralSeparationError(
            f"spec(A) and spec(-A*) too close: separation {sep:.3e}"
        )
    eye = np.eye(n)
    # Row-major vec: vec(A* X) = (A* x I) vec X, vec(X A) = (I x A^T) vec X.
    op = np.kron(a.conj().T, eye) + np.kron(eye, a.T)
    return np.linalg.solve(op, b.reshape(-1)).reshape(n, n)


def radial_derivative_z(data: ImpedanceData, rho: float) -> np.ndarray:
    """Radial derivative zdot = (d/dt)|_{t=1} z(t xi).

    zdot - z solves (iq)*(zdot - z) + (zdot - z)(iq) = 2 rho Id and is
    therefore positive definite; in particular det z is strictly increasing
    through its zero along each radial line.
    """
    x = sylvester_solve(1j * data.q, 2.0 * rho * np.eye(3, dtype=complex))
    return data.z + x


def solve_zminus(q: np.ndarray, a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve the subprincipal-impedance relation z_minus q - q* z_minus = rhs.

    The right-hand side carries boundary curvature and material-gradient data
    assembled by the caller.  The map X -> Xq - q*X is invertible because
    spec(q) and spec(q*) lie in opposite half-planes; `a` (the normal acoustic
    tensor) only sets the physical scale of the ingredients and is accepted
    for interface symmetry with z = i(a q + a1).
    """
    q = np.asarray(q, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    n = q.shape[0]
    lam = np.linalg.eigvals(q)
    sep = np.min(np.abs(lam[:, None] - lam.conj()[None, :]))
    if sep <= SEPARATION_TOL * np.linalg.norm(q):
        raise SpectralSeparationError(
            f"spec(q) and spec(q*) too close: separation {sep:.3e}"
        )
    eye = np.eye(n)
    # Row-major vec: vec(X q) = (I x q^T) vec X, vec(q* X) = (q* x I) vec X.
    op = np.kron(eye, q.T) - np.kron(q.conj().T, eye)
    return np.linalg.solve(op, rhs.reshape(-1)).reshape(n, n)
