"""Rayleigh-wave speeds on the characteristic variety det z = 0.

Along each radial line in the elliptic region the impedance determinant
crosses zero at most once, transversally; the crossing speed c_r is the
Rayleigh speed, strictly below the limiting speed at the boundary of the
elliptic region.  Direction scans run a vectorized engine (batched companion
eigensolves) and parallelize over directions via RAYLEIGH_THREADS.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .material import Material, SurfaceFrame, acoustic_tensor, validate_stiffness
from .impedance import riccati_residual, sylvester_solve
from .polyfactor import QuadraticPencil, build_pencil, is_elliptic, spectral_factor

C_LIM_RTOL = 1e-10
ROOT_RTOL = 1e-12
WALK_FACTOR = 0.99
WALK_MAX_STEPS = 2000
C_FLOOR_FRACTION = 1e-3
START_OFFSET = 1e-6
KERNEL_PHASE_CUTOFF = 1e-6
HOLONOMY_OVERLAP = 0.9

SCAN_CSV_HEADER = (
    "theta_rad,c_lim_mps,exists,c_r_mps,slope,"
    "v_re_0,v_im_0,v_re_1,v_im_1,v_re_2,v_im_2,res_kernel,res_riccati"
)


class BracketError(RuntimeError):
    """No valid ellipticity bracket; the material is not strongly convex."""


class SamplingInadequacyError(RuntimeError):
    """Kernel transport gaps persist at high direction counts."""


@dataclass(frozen=True)
class RayleighPoint:
    """Rayleigh-root data along one radial line (exists=False is a result)."""

    direction: np.ndarray
    c_lim: float
    exists: bool
    c_r: float | None = None
    kernel: np.ndarray | None = None
    slope: float | None = None
    res_kernel: float | None = None
    res_riccati: float | None = None


def _hermitian_impedance(p: QuadraticPencil, q: np.ndarray) -> np.ndarray:
    z = 1j * (p.a @ q + p.a1)
    return 0.5 * (z + z.conj().T)


def _detz_at_speed(mat: Material, frame: SurfaceFrame, c: float) -> float:
    p = build_pencil(mat, frame, 1.0 / c)
    z = _hermitian_impedance(p, spectral_factor(p).q)
    return float(np.linalg.det(z).real)


def limiting_speed(mat: Material, frame: SurfaceFrame) -> float:
    """Largest speed c with an elliptic pencil at xi = tangent / c.

    Bisection on the ellipticity predicate to relative 1e-10.  The upper
    bracket sqrt(max Kelvin eigenvalue / rho) bounds every body-wave speed,
    so the pencil there is never elliptic.
    """
    c0 = math.sqrt(np.linalg.eigvalsh(mat.stiffness.mandel())[-1] / mat.density)
    lo = 1e-6 * c0
    if not is_elliptic(build_pencil(mat, frame, 1.0 / lo)).elliptic:
        raise BracketError(
            "pencil not elliptic even at tiny speed; material is not strongly convex"
        )
    hi = c0
    if is_elliptic(build_pencil(mat, frame, 1.0 / hi)).elliptic:
        raise BracketError("upper bracket unexpectedly elliptic")
    while (hi - lo) / hi > C_LIM_RTOL:
        mid = 0.5 * (lo + hi)
        if is_elliptic(build_pencil(mat, frame, 1.0 / mid)).elliptic:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _kernel_of(z: np.ndarray, tangent: np.ndarray):
    """Unit vector of the smallest-|lambda| eigenspace, phase-fixed.

    The tangent component is made real positive when it is not tiny;
    otherwise the largest-magnitude component is.
    """
    w, u = np.linalg.eigh(z)
    v = u[:, np.argmin(np.abs(w))]
    comp = complex(v @ tangent)
    if abs(comp) <= KERNEL_PHASE_CUTOFF:
        comp = complex(v[np.argmax(np.abs(v))])
    v = v * (comp.conjugate() / abs(comp))
    res = float(np.linalg.norm(z @ v) / np.linalg.norm(z))
    return v, res


def _adjugate_hermitian(z: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(z)
    cof = np.array([w[1] * w[2], w[0] * w[2], w[0] * w[1]])
    return (u * cof[None, :]) @ u.conj().T


def rayleigh_point(mat: Material, frame: SurfaceFrame) -> RayleighPoint:
    """Root of det z(tangent / c) on (0, c_lim), with kernel and radial slope.

    Brackets by walking down from (1 - 1e-6) c_lim in geometric steps of 0.99
    until the determinant changes sign, then polishes with Brent to relative
    1e-12.  No sign change above the floor 1e-3 c_lim reports exists=False.
    """
    c_lim = limiting_speed(mat, frame)
    floor = C_FLOOR_FRACTION * c_lim
    c_hi = (1.0 - START_OFFSET) * c_lim
    g_hi = _detz_at_speed(mat, frame, c_hi)
    bracket = None
    c_prev, g_prev = c_hi, g_hi
    for _ in range(WALK_MAX_STEPS):
        c_next = WALK_FACTOR * c_prev
        if c_next < floor:
            break
        g_next = _detz_at_speed(mat, frame, c_next)
        if g_prev * g_next <= 0.0:
            bracket = (c_next, c_prev)
            break
        c_prev, g_prev = c_next, g_next
    if bracket is None:
        return RayleighPoint(direction=frame.tangent, c_lim=c_lim, exists=False)
    c_r = float(
        brentq(lambda c: _detz_at_speed(mat, frame, c), *bracket, rtol=ROOT_RTOL)
    )
    p = build_pencil(mat, frame, 1.0 / c_r)
    q = spectral_factor(p).q
    z = _hermitian_impedance(p, q)
    v, res_kernel = _kernel_of(z, frame.tangent)
    zdot = z + sylvester_solve(1j * q, 2.0 * mat.density * np.eye(3, dtype=complex))
    slope = float(np.trace(_adjugate_hermitian(z) @ zdot).real)
    return RayleighPoint(
        direction=frame.tangent,
        c_lim=c_lim,
        exists=True,
        c_r=c_r,
        kernel=v,
        slope=slope,
        res_kernel=res_kernel,
        res_riccati=riccati_residual(z, p),
    )


def eval_p(mat: Material, frame: SurfaceFrame, xi) -> float:
    """Degree-one homogeneous p with p = 1 exactly on the variety det z = 0.

    p(xi) = |xi| * c_r(xi / |xi|); raises when no Rayleigh root exists along
    the ray.
    """
    xi = np.asarray(xi, dtype=float)
    mag = float(np.linalg.norm(xi))
    if mag == 0.0:
        raise ValueError("xi must be nonzero")
    pt = rayleigh_point(mat, SurfaceFrame(frame.nu, xi / mag))
    if not pt.exists:
        raise BracketError("no Rayleigh root along this ray (E1 fails here)")
    return mag * pt.c_r


# --- vectorized direction-scan engine --------------------------------------


class _Engine:
    """Batched det z evaluations for a fixed normal and many tangents."""

    def __init__(self, mat: Material, nu: np.ndarray):
        self.c4 = mat.tensor()
        self.rho = mat.density
        self.nu = np.asarray(nu, dtype=float)
        a = acoustic_tensor(self.c4, self.nu)
        self.a = 0.5 * (a + a.T)
        self.a_inv = np.linalg.inv(self.a)
        report = validate_stiffness(mat.stiffness)
        if not (report.convex and report.elliptic):
            raise BracketError("direction scan requires a strongly convex material")
        self.delta = report.ellipticity_constant
        self.lam_max = float(np.linalg.eigvalsh(mat.stiffness.mandel())[-1])

    def prepare(self, dirs: np.ndarray) -> dict:
        c_ee = np.einsum("ijkl,mj,ml->mik", self.c4, dirs, dirs)
        c_ee = 0.5 * (c_ee + c_ee.transpose(0, 2, 1))
        c_ne = np.einsum("ijkl,j,ml->mik", self.c4, self.nu, dirs)
        return {"dirs": dirs, "c_ee": c_ee, "c_ne": c_ne,
                "mid": c_ne + c_ne.transpose(0, 2, 1)}

    def _eigmin_along(self, pre: dict, sigma: np.ndarray) -> np.ndarray:
        """Smallest eigenvalue of c(e + sigma nu) per row; sigma shape (m,)."""
        mats = (pre["c_ee"] + sigma[:, None, None] * pre["mid"]
                + (sigma * sigma)[:, None, None] * self.a[None, :, :])
        return np.linalg.eigvalsh(mats)[:, 0]

    def limiting_speeds(self, pre: dict) -> np.ndarray:
        """c_lim per direction from min over real sigma of eig_min c(e + sigma nu).

        The minimum value over the line equals rho * c_lim^2: smaller speeds
        keep c(xi + s nu) - rho |xi|^-2-scaled positive definite for all real s.
        """
        m = pre["dirs"].shape[0]
        sigma_max = math.sqrt(self.lam_max / (0.5 * self.delta)) + 1.0
        grid = np.linspace(-sigma_max, sigma_max, 97)
        vals = np.empty((m, grid.size))
        for j, s in enumerate(grid):
            vals[:, j] = self._eigmin_along(pre, np.full(m, s))
        best = np.argmin(vals, axis=1)
        # refine the best and runner-up grid minima; eig crossings can hide a
        # second local valley between grid nodes
        masked = vals.copy()
        cols = np.arange(grid.size)
        near = np.abs(cols[None, :] - best[:, None]) <= 2
        masked[near] = np.inf
        second = np.argmin(masked, axis=1)
        out = vals[np.arange(m), best]
        h = grid[1] - grid[0]
        for idx in (best, second):
            lo = grid[idx] - h
            hi = grid[idx] + h
            out = np.minimum(out, self._golden_min(pre, lo, hi))
        return np.sqrt(out / self.rho)

    def _golden_min(self, pre, lo, hi, iters=60):
        invphi = 0.5 * (math.sqrt(5.0) - 1.0)
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        f1 = self._eigmin_along(pre, x1)
        f2 = self._eigmin_along(pre, x2)
        for _ in range(iters):
            left = f1 < f2
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            x1n = np.where(left, hi - invphi * (hi - lo), x2)
            x2n = np.where(left, x1, lo + invphi * (hi - lo))
            xeval = np.where(left, x1n, x2n)
            feval = self._eigmin_along(pre, xeval)
            f1, f2 = np.where(left, feval, f2), np.where(left, f1, feval)
            x1, x2 = x1n, x2n
        return np.minimum(f1, f2)

    def impedance_at(self, pre: dict, speeds: np.ndarray, rows=None):
        """Batched q, a1, a2, z (Hermitian part) at xi = e / c for given rows."""
        if rows is None:
            c_ee, c_ne = pre["c_ee"], pre["c_ne"]
        else:
            c_ee, c_ne = pre["c_ee"][rows], pre["c_ne"][rows]
        m = c_ee.shape[0]
        inv_c = 1.0 / speeds
        a1 = c_ne * inv_c[:, None, None]
        a2 = c_ee * (inv_c * inv_c)[:, None, None]
        b1 = a1 + a1.transpose(0, 2, 1)
        cc = a2 - self.rho * np.eye(3)[None, :, :]
        comp = np.zeros((m, 6, 6))
        comp[:, :3, 3:] = np.eye(3)
        comp[:, 3:, :3] = -self.a_inv[None] @ cc
        comp[:, 3:, 3:] = -self.a_inv[None] @ b1
        vals, vecs = np.linalg.eig(comp)
        order = np.argsort(vals.imag, axis=1)[:, :3]
        s3 = np.take_along_axis(vals, order, axis=1)
        v = np.take_along_axis(vecs, order[:, None, :], axis=2)[:, :3, :]
        q = (v * s3[:, None, :]) @ np.linalg.inv(v)
        z = 1j * (self.a[None] @ q + a1)
        z = 0.5 * (z + z.conj().transpose(0, 2, 1))
        return q, a1, a2, z

    def detz(self, pre: dict, speeds: np.ndarray, rows=None) -> np.ndarray:
        _, _, _, z = self.impedance_at(pre, speeds, rows)
        return np.linalg.det(z).real


def _bracket_walk(engine: _Engine, pre: dict, c_lim: np.ndarray):
    """Walk each ray down from just below c_lim until det z changes sign."""
    m = c_lim.shape[0]
    floor = C_FLOOR_FRACTION * c_lim
    c_cur = (1.0 - START_OFFSET) * c_lim
    g_cur = engine.detz(pre, c_cur)
    lo = np.full(m, np.nan)
    hi = np.full(m, np.nan)
    glo = np.empty(m)
    ghi = np.empty(m)
    active = np.ones(m, dtype=bool)
    for _ in range(WALK_MAX_STEPS):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        c_next = WALK_FACTOR * c_cur[idx]
        stop = c_next < floor[idx]
        active[idx[stop]] = False
        idx = idx[~stop]
        if idx.size == 0:
            continue
        c_next = WALK_FACTOR * c_cur[idx]
        g_next = engine.detz(pre, c_next, rows=idx)
        crossed = g_cur[idx] * g_next <= 0.0
        hit = idx[crossed]
        lo[hit] = c_next[crossed]
        glo[hit] = g_next[crossed]
        hi[hit] = c_cur[hit]
        ghi[hit] = g_cur[hit]
        active[hit] = False
        rest = idx[~crossed]
        c_cur[rest] = c_next[~crossed]
        g_cur[rest] = g_next[~crossed]
    exists = ~np.isnan(lo)
    return exists, lo, glo, hi, ghi


def _chandrupatla(engine: _Engine, pre: dict, rows, lo, flo, hi, fhi, max_iter=90):
    """Vectorized bracketing root polish (inverse-quadratic + bisection).

    Same guarantees as Brent: the bracket never widens and shrinks at least
    geometrically; converges to relative 1e-12 on the speed.
    """
    a = lo.copy()
    fa = flo.copy()
    b = hi.copy()
    fb = fhi.copy()
    c = hi.copy()
    fc = fhi.copy()
    t = np.full(a.shape, 0.5)
    root = np.where(np.abs(fa) < np.abs(fb), a, b)
    live = np.ones(a.shape[0], dtype=bool)
    for _ in range(max_iter):
        if not np.any(live):
            break
        xt = a[live] + t[live] * (b[live] - a[live])
        ft = engine.detz(pre, xt, rows=rows[live])
        same = np.sign(ft) == np.sign(fa[live])
        li = np.nonzero(live)[0]
        # same sign as a: a <- xt, c <- old a ; else shift (b,c) <- (a, b)
        si = li[same]
        oi = li[~same]
        c[si] = a[si]
        fc[si] = fa[si]
        c[oi] = b[oi]
        fc[oi] = fb[oi]
        b[oi] = a[oi]
        fb[oi] = fa[oi]
        a[li] = xt
        fa[li] = ft
        better_a = np.abs(fa[li]) < np.abs(fb[li])
        root[li] = np.where(better_a, a[li], b[li])
        tol = 2.0 * ROOT_RTOL * np.abs(root[li]) + 1e-300
        tlim = tol / np.abs(b[li] - c[li])
        done = tlim > 0.5
        done |= fa[li] == 0.0
        live[li[done]] = False
        li = li[~done]
        tol = tol[~done]
        if li.size == 0:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = (a[li] - b[li]) / (c[li] - b[li])
            phi = (fa[li] - fb[li]) / (fc[li] - fb[li])
            use_iqi = (phi * phi < xi) & ((1 - phi) ** 2 < 1 - xi)
            t_iqi = (fa[li] / (fb[li] - fa[li])) * (fc[li] / (fb[li] - fc[li])) + (
                (c[li] - a[li]) / (b[li] - a[li])
            ) * (fa[li] / (fc[li] - fa[li])) * (fb[li] / (fc[li] - fb[li]))
        tnew = np.where(use_iqi & np.isfinite(t_iqi), t_iqi, 0.5)
        tl = tol / np.abs(b[li] - c[li])
        t[li] = np.clip(tnew, tl, 1.0 - tl)
    return root


@dataclass(frozen=True)
class DirectionScan:
    """Per-direction Rayleigh data over a circle of tangents."""

    thetas: np.ndarray
    c_lim: np.ndarray
    exists: np.ndarray
    c_r: np.ndarray          # nan where exists is False
    slope: np.ndarray
    kernels: np.ndarray      # (n, 3) complex, nan rows where absent
    res_kernel: np.ndarray
    res_riccati: np.ndarray
    directions: np.ndarray = field(repr=False, default=None)

    @property
    def e1_satisfied(self) -> bool:
        return bool(np.all(self.exists))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCAN_CSV_HEADER + "\n")
        for k in range(self.thetas.size):
            if self.exists[k]:
                v = self.kernels[k]
                fields = [
                    f"{self.thetas[k]:.17g}",
                    f"{self.c_lim[k]:.17g}",
                    "true",
                    f"{self.c_r[k]:.17g}",
                    f"{self.slope[k]:.17g}",
                    *(f"{comp:.17g}" for pair in ((v[i].real, v[i].imag) for i in range(3)) for comp in pair),
                    f"{self.res_kernel[k]:.17g}",
                    f"{self.res_riccati[k]:.17g}",
                ]
            else:
                fields = [f"{self.thetas[k]:.17g}", f"{self.c_lim[k]:.17g}", "false"] + [""] * 10
            buf.write(",".join(fields) + "\n")
        return buf.getvalue()


def tangent_basis(nu: np.ndarray):
    """Right-handed orthonormal (e1, e2) spanning the plane orthogonal to nu."""
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    pick = np.argmin(np.abs(nu))
    e1 = np.zeros(3)
    e1[pick] = 1.0
    e1 -= (e1 @ nu) * nu
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(nu, e1)


def _scan_chunk(engine: _Engine, dirs: np.ndarray):
    pre = engine.prepare(dirs)
    c_lim = engine.limiting_speeds(pre)
    exists, lo, glo, hi, ghi = _bracket_walk(engine, pre, c_lim)
    m = dirs.shape[0]
    c_r = np.full(m, np.nan)
    slope = np.full(m, np.nan)
    kernels = np.full((m, 3), np.nan, dtype=complex)
    res_kernel = np.full(m, np.nan)
    res_riccati = np.full(m, np.nan)
    rows = np.nonzero(exists)[0]
    if rows.size:
        c_r[rows] = _chandrupatla(engine, pre, rows, lo[rows], glo[rows], hi[rows], ghi[rows])
        q, a1, a2, z = engine.impedance_at(pre, c_r[rows], rows=rows)
        w, u = np.linalg.eigh(z)
        kmin = np.argmin(np.abs(w), axis=1)
        v = np.take_along_axis(u, kmin[:, None, None], axis=2)[:, :, 0]
        comp = np.einsum("mi,mi->m", v, dirs[rows].astype(complex))
        small = np.abs(comp) <= KERNEL_PHASE_CUTOFF
        if np.any(small):
            jmax = np.argmax(np.abs(v[small]), axis=1)
            comp[small] = v[small, jmax]
        v = v * (comp.conj() / np.abs(comp))[:, None]
        kernels[rows] = v
        znorm = np.linalg.norm(z, axis=(1, 2))
        res_kernel[rows] = np.linalg.norm((z @ v[:, :, None])[:, :, 0], axis=1) / znorm
        # Riccati residual, batched
        cc = a2 - engine.rho * np.eye(3)[None]
        lhs = (z + 1j * a1.transpose(0, 2, 1)) @ (engine.a_inv[None] @ (z - 1j * a1))
        res_riccati[rows] = np.linalg.norm(lhs - cc, axis=(1, 2)) / np.linalg.norm(cc, axis=(1, 2))
        # radial slope of det z via the Sylvester-derived radial derivative
        iq = 1j * q
        eye = np.eye(3)
        op = (np.einsum("mij,kl->mikjl", iq.conj().transpose(0, 2, 1), eye)
              + np.einsum("ij,mkl->mikjl", eye, iq.transpose(0, 2, 1))).reshape(-1, 9, 9)
        rhs = np.broadcast_to((2.0 * engine.rho * eye).reshape(9, 1), (rows.size, 9, 1)).astype(complex)
        x = np.linalg.solve(op, rhs).reshape(-1, 3, 3)
        zdot = z + x
        cof = np.stack([w[:, 1] * w[:, 2], w[:, 0] * w[:, 2], w[:, 0] * w[:, 1]], axis=1)
        adj = (u * cof[:, None, :]) @ u.conj().transpose(0, 2, 1)
        slope[rows] = np.einsum("mij,mji->m", adj, zdot).real
    return c_lim, exists, c_r, slope, kernels, res_kernel, res_riccati


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("RAYLEIGH_THREADS", "1"))
    return max(1, threads)


def scan_directions(mat: Material, nu, n: int, threads: int | None = None) -> DirectionScan:
    """Rayleigh data for n equally spaced tangential directions.

    Rows are ordered by theta regardless of worker count; execution is
    chunked over threads (numpy releases the GIL inside LAPACK).
    """
    if n < 4:
        raise ValueError("direction scan needs at least 4 directions")
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    e1, e2 = tangent_basis(nu)
    thetas = 2.0 * np.pi * np.arange(n) / n
    dirs = np.cos(thetas)[:, None] * e1[None, :] + np.sin(thetas)[:, None] * e2[None, :]
    engine = _Engine(mat, nu)
    threads = resolve_threads(threads)
    if threads == 1 or n < 64:
        parts = [_scan_chunk(engine, dirs)]
        bounds = [(0, n)]
    else:
        edges = np.linspace(0, n, threads + 1, dtype=int)
        bounds = [(edges[i], edges[i + 1]) for i in range(threads) if edges[i] < edges[i + 1]]
        with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
            parts = list(pool.map(lambda be: _scan_chunk(engine, dirs[be[0]:be[1]]), bounds))
    out = [np.concatenate([p[k] for p in parts], axis=0) for k in range(7)]
    return DirectionScan(
        thetas=thetas,
        c_lim=out[0],
        exists=out[1],
        c_r=out[2],
        slope=out[3],
        kernels=out[4],
        res_kernel=out[5],
        res_riccati=out[6],
        directions=dirs,
    )


@dataclass(frozen=True)
class HolonomyResult:
    total_phase: float
    max_gap: float
    n: int


def kernel_phase_holonomy(mat: Material, nu, n: int, threads: int | None = None) -> HolonomyResult:
    """Transport the kernel section around the direction circle.

    total_phase is the argument mismatch after closing the loop; zero (mod
    sampling error) is necessary for the kernel bundle over this circle to
    admit a global phase choice.  max_gap flags steps whose alignment overlap
    drops below 0.9; persisting at n >= 1024 raises, as refinement should
    restore continuity of a simple eigenvector.
    """
    scan = scan_directions(mat, nu, n, threads=threads)
    if not scan.e1_satisfied:
        raise BracketError("holonomy transport needs a Rayleigh root in every direction")
    vs = scan.kernels
    gap_flag = False
    w = vs[0]
    for k in range(1, n + 1):
        nxt = vs[k % n]
        d = complex(np.vdot(w, nxt))
        if abs(d) < HOLONOMY_OVERLAP:
            gap_flag = True
        w = nxt * (d.conjugate() / abs(d))
    total = float(np.angle(np.vdot(vs[0], w)))
    max_gap = 2.0 * math.pi / n if gap_flag else 0.0
    if gap_flag and n >= 1024:
        raise SamplingInadequacyError(
            f"kernel transport overlap below {HOLONOMY_OVERLAP} at n={n}"
        )
    return HolonomyResult(total_phase=total, max_gap=max_gap, n=n)
