"""Command-line surface: validate, rayleigh, scan, subprincipal, selftest.

Exit codes: 0 success, 1 input error, 2 numerical failure (residual or
tolerance breach), 3 existence failure (no Rayleigh root where one was
demanded).  Single-point commands print JSON; scans write CSV plus a JSON
summary.  Randomized commands take --seed and are bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import selftest as _selftest_mod
from .material import Material, MaterialError, SurfaceFrame, parse_material, validate_stiffness
from .isotropic import (
    CurvatureData,
    iso_state_on_sigma,
    subprincipal_p,
)
from .material import isotropic_stiffness
from .rayleigh import (
    BracketError,
    SCAN_CSV_HEADER,
    rayleigh_point,
    scan_directions,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_EXISTENCE = 3

RES_KERNEL_TOL = 1e-7
RES_RICCATI_TOL = 1e-8
TWO_ROUTE_TOL = 1e-9


def _complex_pair(x: complex):
    return [float(np.real(x)), float(np.imag(x))]


def _matrix_pairs(m: np.ndarray):
    return [[_complex_pair(x) for x in row] for row in np.asarray(m)]


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fail(message: str, code: int) -> int:
    sys.stderr.write(f"error: {message}\n")
    return code


def _read_file(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _parse_vector(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise MaterialError("schema", f"expected 'x,y,z', got {text!r}")
    return np.array([float(x) for x in parts])


def _load_material(path: str) -> Material:
    return parse_material(_read_file(path))


def cmd_validate(args) -> int:
    try:
        mat = _load_material(args.material)
    except (OSError, MaterialError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    report = validate_stiffness(mat.stiffness)
    payload = report.to_dict()
    payload["density_kg_m3"] = mat.density
    payload["density_positive"] = mat.density > 0
    payload["name"] = mat.name
    _emit(payload)
    return EXIT_OK


def _point_payload(pt, frame: SurfaceFrame) -> dict:
    payload = {
        "direction": [float(x) for x in pt.direction],
        "normal": [float(x) for x in frame.nu],
        "frame_defect": frame.orthonormalization_defect,
        "c_lim_mps": pt.c_lim,
        "exists": bool(pt.exists),
    }
    if pt.exists:
        payload.update({
            "c_r_mps": pt.c_r,
            "slope": pt.slope,
            "kernel": [_complex_pair(x) for x in pt.kernel],
            "res_kernel": pt.res_kernel,
            "res_riccati": pt.res_riccati,
        })
    return payload


def _point_csv(pt) -> str:
    v = pt.kernel
    fields = [
        "0", f"{pt.c_lim:.17g}", "true", f"{pt.c_r:.17g}", f"{pt.slope:.17g}",
        *(f"{c:.17g}" for i in range(3) for c in (v[i].real, v[i].imag)),
        f"{pt.res_kernel:.17g}", f"{pt.res_riccati:.17g}",
    ]
    return SCAN_CSV_HEADER + "\n" + ",".join(fields) + "\n"


def cmd_rayleigh(args) -> int:
    try:
        mat = _load_material(args.material)
        normal = _parse_vector(args.normal)
        tangent = _parse_vector(args.tangent)
        frame = SurfaceFrame.from_vectors(normal, tangent)
    except (OSError, MaterialError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    try:
        pt = rayleigh_point(mat, frame)
    except BracketError as exc:
        return _fail(str(exc), EXIT_NUMERICAL)
    if not pt.exists:
        _emit(_point_payload(pt, frame))
        return _fail("no Rayleigh root along this direction (E1 fails)", EXIT_EXISTENCE)
    if args.csv:
        sys.stdout.write(_point_csv(pt))
    else:
        _emit(_point_payload(pt, frame))
    if pt.res_kernel > RES_KERNEL_TOL or pt.res_riccati > RES_RICCATI_TOL:
        return _fail(
            f"residuals exceed tolerance: kernel {pt.res_kernel:.3e}, "
            f"riccati {pt.res_riccati:.3e}",
            EXIT_NUMERICAL,
        )
    return EXIT_OK


def _holonomy_from_scan(scan) -> float | None:
    if not scan.e1_satisfied:
        return None
    vs = scan.kernels
    n = scan.thetas.size
    w = vs[0]
    for k in range(1, n + 1):
        nxt = vs[k % n]
        d = complex(np.vdot(w, nxt))
        if abs(d) == 0.0:
            return None
        w = nxt * (d.conjugate() / abs(d))
    return float(np.angle(np.vdot(vs[0], w)))


def cmd_scan(args) -> int:
    if args.count < 4:
        return _fail("--count must be at least 4", EXIT_INPUT)
    try:
        mat = _load_material(args.material)
        normal = _parse_vector(args.normal)
    except (OSError, MaterialError, ValueError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    try:
        scan = scan_directions(mat, normal, args.count)
    except BracketError as exc:
        return _fail(str(exc), EXIT_NUMERICAL)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(scan.to_csv())
    exists = scan.exists
    summary = {
        "e1_satisfied": bool(scan.e1_satisfied),
        "c_r_min": float(np.nanmin(scan.c_r)) if exists.any() else None,
        "c_r_max": float(np.nanmax(scan.c_r)) if exists.any() else None,
        "holonomy_phase": _holonomy_from_scan(scan),
    }
    _emit(summary)
    if args.require_e1 and not scan.e1_satisfied:
        return _fail("some directions carry no Rayleigh root (E1 fails)", EXIT_EXISTENCE)
    return EXIT_OK


def _isotropic_parameters(mat: Material):
    """Fit (lam, mu) and reject materials that are not isotropic."""
    v = mat.stiffness.voigt
    mu = float(np.mean([v[3, 3], v[4, 4], v[5, 5]]))
    lam = float(np.mean([v[0, 1], v[0, 2], v[1, 2]]))
    model = isotropic_stiffness(lam, mu).voigt
    rel = np.linalg.norm(v - model) / np.linalg.norm(v)
    if rel > 1e-8:
        return None
    return lam, mu


def cmd_subprincipal(args) -> int:
    try:
        mat = _load_material(args.material)
        curv = CurvatureData.from_json(_read_file(args.curvature))
        xi_dir = _parse_vector(args.xi_dir)
        if np.linalg.norm(xi_dir) == 0.0:
            raise MaterialError("schema", "xi-dir must be nonzero")
    except (OSError, MaterialError, ValueError, KeyError) as exc:
        return _fail(str(exc), EXIT_INPUT)
    params = _isotropic_parameters(mat)
    if params is None:
        return _fail("anisotropic subprincipal unsupported", EXIT_INPUT)
    lam, mu = params
    st = iso_state_on_sigma(lam, mu, mat.density)
    br = subprincipal_p(st, curv)
    payload = {
        "xi_dir": [float(x) for x in xi_dir / np.linalg.norm(xi_dir)],
        "lam_pa": lam,
        "mu_pa": mu,
        "density_kg_m3": mat.density,
        "c_r_mps": st.c_r,
        "psub_direct": br.psub_direct,
        "psub_assembled": br.psub_assembled,
        "re_zminus_vv": br.re_zminus_vv,
        "im_trace": br.im_trace,
        "gamma2_lambda0dot": br.gamma2_lambda0dot,
        "N": br.N,
        "X": _matrix_pairs(br.X),
        "Y1": _matrix_pairs(br.Y1),
        "Y2": _matrix_pairs(br.Y2),
        "Y3": _matrix_pairs(br.Y3),
        "K": _matrix_pairs(br.K),
        "Kdot": _matrix_pairs(br.Kdot),
        "Ks": _matrix_pairs(br.Ks),
        "Kp": _matrix_pairs(br.Kp),
        "M": _matrix_pairs(br.M),
        "A": _matrix_pairs(br.A),
        "w1": [_complex_pair(x) for x in br.w1],
        "w2": [_complex_pair(x) for x in br.w2],
    }
    _emit(payload)
    if abs(br.psub_direct - br.psub_assembled) > TWO_ROUTE_TOL * (1.0 + abs(br.psub_direct)):
        return _fail(
            f"two-route disagreement: direct {br.psub_direct!r} vs assembled "
            f"{br.psub_assembled!r}",
            EXIT_NUMERICAL,
        )
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = _selftest_mod.run_selftest(seed=args.seed, strict=args.strict)
    payload = {
        "seed": args.seed,
        "strict": bool(args.strict),
        "criteria": [r.to_dict() for r in results],
        "all_passed": bool(all(r.passed for r in results)),
    }
    _emit(payload)
    return EXIT_OK if payload["all_passed"] else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfimp",
        description="Surface impedance, Rayleigh speeds, and subprincipal symbols "
                    "for elastic half-spaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a material file")
    p.add_argument("--material", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rayleigh", help="single-direction Rayleigh solve")
    p.add_argument("--material", required=True)
    p.add_argument("--normal", required=True, metavar="x,y,z")
    p.add_argument("--tangent", required=True, metavar="x,y,z")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", default=True)
    fmt.add_argument("--csv", action="store_true", default=False)
    p.set_defaults(func=cmd_rayleigh)

    p = sub.add_parser("scan", help="Rayleigh scan over tangential directions")
    p.add_argument("--material", required=True)
    p.add_argument("--normal", required=True, metavar="x,y,z")
    p.add_argument("--count", required=True, type=int, metavar="N")
    p.add_argument("--out", metavar="FILE.csv")
    p.add_argument("--require-e1", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("subprincipal", help="isotropic subprincipal symbol")
    p.add_argument("--material", required=True)
    p.add_argument("--curvature", required=True)
    p.add_argument("--xi-dir", required=True, metavar="x,y,z")
    p.set_defaults(func=cmd_subprincipal)

    p = sub.add_parser("selftest", help="run the identity suite on built-in materials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true",
                   help="tighten every tolerance by a factor of 100")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
