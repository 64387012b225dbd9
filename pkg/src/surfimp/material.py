"""Elasticity tensors, acoustic (Christoffel) tensors, and material I/O.

Stiffness is stored in Voigt 6x6 form with pair order (11, 22, 33, 23, 13, 12)
in the stress-strain convention (no factor-of-2 weighting).  Internal units are
SI (Pa, kg/m^3); file I/O accepts GPa and converts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

GPA = 1.0e9

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# Kelvin/Mandel weights: sqrt(2) on the shear pairs makes the 6x6 matrix
# represent C as a quadratic form on symmetric tensors (tensor inner product).
_MANDEL_W = np.diag([1.0, 1.0, 1.0, math.sqrt(2.0), math.sqrt(2.0), math.sqrt(2.0)])

SYMMETRY_TOL = 1e-12
FRAME_TOL = 1e-12


class MaterialError(ValueError):
    """Invalid material input.  ``code`` distinguishes the failure mode."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StiffnessTensor:
    """Rank-4 elasticity tensor in Voigt 6x6 storage (Pa)."""

    voigt: np.ndarray
    symmetry_defect: float = field(default=0.0, compare=False)

    def __post_init__(self):
        v = np.asarray(self.voigt, dtype=float)
        if v.shape != (6, 6):
            raise MaterialError("schema", f"voigt matrix must be 6x6, got {v.shape}")
        scale = np.linalg.norm(v)
        defect = np.linalg.norm(v - v.T) / scale if scale > 0 else 0.0
        if defect > SYMMETRY_TOL:
            raise MaterialError(
                "asymmetric_stiffness",
                f"voigt matrix asymmetric: relative defect {defect:.3e} > {SYMMETRY_TOL}",
            )
        object.__setattr__(self, "voigt", _readonly(0.5 * (v + v.T)))
        object.__setattr__(self, "symmetry_defect", float(defect))

    def tensor(self) -> np.ndarray:
        """Full C^{ijkl} with minor symmetries restored from the Voigt packing."""
        c = np.empty((3, 3, 3, 3))
        for a, (i, j) in enumerate(VOIGT_PAIRS):
            for b, (k, l) in enumerate(VOIGT_PAIRS):
                v = self.voigt[a, b]
                c[i, j, k, l] = c[j, i, k, l] = c[i, j, l, k] = c[j, i, l, k] = v
        return c

    def mandel(self) -> np.ndarray:
        """Kelvin/Mandel-weighted 6x6; its spectrum is the tensor spectrum."""
        return _MANDEL_W @ self.voigt @ _MANDEL_W

    @property
    def voigt_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.voigt)

    @property
    def is_convex(self) -> bool:
        """Strong convexity: all six Voigt eigenvalues strictly positive."""
        return bool(np.all(self.voigt_eigenvalues > 0.0))


def stiffness_from_tensor(c: np.ndarray) -> StiffnessTensor:
    v = np.empty((6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            v[a, b] = c[i, j, k, l]
    return StiffnessTensor(v)


def isotropic_stiffness(lam: float, mu: float) -> StiffnessTensor:
    """Isotropic stiffness with C11 = lam + 2 mu, C12 = lam, C44 = mu (Pa)."""
    v = np.zeros((6, 6))
    v[:3, :3] = lam
    v[0, 0] = v[1, 1] = v[2, 2] = lam + 2.0 * mu
    v[3, 3] = v[4, 4] = v[5, 5] = mu
    return StiffnessTensor(v)


@dataclass(frozen=True)
class Material:
    """Stiffness plus mass density (SI units)."""

    stiffness: StiffnessTensor
    density: float
    name: str = ""

    def __post_init__(self):
        if not (self.density > 0.0):
            raise MaterialError("nonpositive_density", f"density must be > 0, got {self.density}")

    def tensor(self) -> np.ndarray:
        return self.stiffness.tensor()


@dataclass(frozen=True)
class SurfaceFrame:
    """Unit exterior conormal ``nu`` and unit tangent ``tangent``, orthogonal."""

    nu: np.ndarray
    tangent: np.ndarray
    orthonormalization_defect: float = field(default=0.0, compare=False)

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float)
        tg = np.asarray(self.tangent, dtype=float)
        if abs(np.linalg.norm(nu) - 1.0) > FRAME_TOL or abs(np.linalg.norm(tg) - 1.0) > FRAME_TOL:
            raise MaterialError("frame", "frame vectors must be unit length")
        if abs(float(nu @ tg)) > FRAME_TOL:
            raise MaterialError("frame", "frame vectors must be orthogonal")
        object.__setattr__(self, "nu", _readonly(nu))
        object.__setattr__(self, "tangent", _readonly(tg))

    @property
    def perp(self) -> np.ndarray:
        """Completes (nu, tangent) to a right-handed orthonormal triple."""
        return np.cross(self.nu, self.tangent)

    @classmethod
    def from_vectors(cls, normal, tangent) -> "SurfaceFrame":
        """Build a frame from raw vectors, re-orthonormalizing the tangent.

        The projection defect is recorded on the result; a tangent (anti)parallel
        to the normal is rejected as degenerate.
        """
        n = np.asarray(normal, dtype=float)
        t = np.asarray(tangent, dtype=float)
        nn = np.linalg.norm(n)
        tn = np.linalg.norm(t)
        if nn == 0.0 or tn == 0.0:
            raise MaterialError("frame", "zero-length frame vector")
        nu = n / nn
        t = t / tn
        proj = t - (t @ nu) * nu
        pn = np.linalg.norm(proj)
        if pn < 1e-10:
            raise MaterialError("degenerate_frame", "tangent is parallel to the normal")
        defect = float(np.linalg.norm(t - proj / pn))
        frame = cls(nu, proj / pn)
        object.__setattr__(frame, "orthonormalization_defect", defect)
        return frame


def acoustic_tensor(stiffness: StiffnessTensor | np.ndarray, xi, eta=None) -> np.ndarray:
    """Acoustic tensor c(xi, eta) with entries C^{ijkl} xi_j eta_l.

    With eta omitted returns c(xi) = c(xi, xi), the Christoffel matrix whose
    eigenvalues are rho * (phase speed)^2 for propagation along xi.
    """
    c4 = stiffness.tensor() if isinstance(stiffness, StiffnessTensor) else np.asarray(stiffness)
    xi = np.asarray(xi, dtype=float)
    eta = xi if eta is None else np.asarray(eta, dtype=float)
    return np.einsum("ijkl,j,l->ik", c4, xi, eta)


def fibonacci_sphere(n: int) -> np.ndarray:
    """n roughly equidistributed unit vectors (golden-angle spiral)."""
    k = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * k + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


@dataclass(frozen=True)
class StiffnessReport:
    """validate_stiffness output: flags, never exceptions."""

    symmetry_defect: float
    voigt_eigenvalues: np.ndarray
    min_voigt_eigenvalue: float
    convex: bool
    ellipticity_constant: float  # min over sampled unit eta of min eig c(eta)
    elliptic: bool

    def to_dict(self) -> dict:
        return {
            "symmetry_defect": self.symmetry_defect,
            "voigt_eigenvalues": [float(x) for x in self.voigt_eigenvalues],
            "min_voigt_eigenvalue": self.min_voigt_eigenvalue,
            "convex": self.convex,
            "ellipticity_constant": self.ellipticity_constant,
            "elliptic": self.elliptic,
        }


N_ELLIPTICITY_SAMPLES = 50


def validate_stiffness(stiffness: StiffnessTensor) -> StiffnessReport:
    """Symmetry, convexity, and ellipticity diagnostics for a stiffness tensor.

    The ellipticity constant delta is the minimum eigenvalue of c(eta) over
    50 Fibonacci-sphere directions; for strongly convex C it is positive and
    bounds c(eta) >= delta |eta|^2 from below (up to sampling).
    """
    c4 = stiffness.tensor()
    dirs = fibonacci_sphere(N_ELLIPTICITY_SAMPLES)
    acoustic = np.einsum("ijkl,mj,ml->mik", c4, dirs, dirs)
    acoustic = 0.5 * (acoustic + acoustic.transpose(0, 2, 1))
    delta = float(np.min(np.linalg.eigvalsh(acoustic)))
    eigs = stiffness.voigt_eigenvalues
    return StiffnessReport(
        symmetry_defect=stiffness.symmetry_defect,
        voigt_eigenvalues=eigs,
        min_voigt_eigenvalue=float(eigs[0]),
        convex=bool(eigs[0] > 0.0),
        ellipticity_constant=delta,
        elliptic=bool(delta > 0.0),
    )


ROTATION_TOL = 1e-10


def rotate_stiffness(stiffness: StiffnessTensor, rotation: np.ndarray) -> StiffnessTensor:
    """Rotate the material frame: C'^{ijkl} = R^i_p R^j_q R^k_r R^l_s C^{pqrs}."""
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3) or np.linalg.norm(r @ r.T - np.eye(3)) > ROTATION_TOL:
        raise MaterialError("rotation", "rotation must be orthogonal 3x3")
    if abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
        raise MaterialError("rotation", "rotation must be proper (det = 1)")
    c4 = np.einsum("ip,jq,kr,ls,pqrs->ijkl", r, r, r, r, stiffness.tensor())
    return stiffness_from_tensor(c4)


# --- JSON I/O -------------------------------------------------------------
#
# Schema (keys bit-exact):
#   {"name": str, "density_kg_m3": num,
#    "stiffness": {"format": "voigt_gpa", "matrix": [[6x6]]}}
# or
#   {"name": str, "density_kg_m3": num,
#    "isotropic": {"lambda_gpa": num, "mu_gpa": num}}


def parse_material(text: str) -> Material:
    """Parse the material JSON schema into SI units."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MaterialError("schema", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MaterialError("schema", "material document must be a JSON object")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise MaterialError("schema", "'name' must be a string")
    if "density_kg_m3" not in doc:
        raise MaterialError("schema", "missing 'density_kg_m3'")
    density = doc["density_kg_m3"]
    if not isinstance(density, (int, float)) or isinstance(density, bool):
        raise MaterialError("schema", "'density_kg_m3' must be a number")
    if not density > 0:
        raise MaterialError("nonpositive_density", f"nonpositive density {density}")

    if "isotropic" in doc:
        iso = doc["isotropic"]
        if not isinstance(iso, dict) or set(iso) != {"lambda_gpa", "mu_gpa"}:
            raise MaterialError("schema", "'isotropic' needs exactly lambda_gpa and mu_gpa")
        stiff = isotropic_stiffness(float(iso["lambda_gpa"]) * GPA, float(iso["mu_gpa"]) * GPA)
    elif "stiffness" in doc:
        st = doc["stiffness"]
        if not isinstance(st, dict) or st.get("format") != "voigt_gpa":
            raise MaterialError("schema", "'stiffness.format' must be 'voigt_gpa'")
        try:
            matrix = np.asarray(st["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise MaterialError("schema", f"bad stiffness matrix: {exc}") from exc
        if matrix.shape != (6, 6):
            raise MaterialError("schema", f"stiffness matrix must be 6x6, got {matrix.shape}")
        stiff = StiffnessTensor(matrix * GPA)
    else:
        raise MaterialError("schema", "need 'isotropic' or 'stiffness' section")
    return Material(stiffness=stiff, density=float(density), name=name)


def material_to_json(mat: Material) -> str:
    """Serialize a material to the voigt_gpa schema (round-trips parse_material)."""
    doc = {
        "name": mat.name,
        "density_kg_m3": mat.density,
        "stiffness": {"format": "voigt_gpa", "matrix": (mat.stiffness.voigt / GPA).tolist()},
    }
    return json.dumps(doc, indent=2, sort_keys=True)
