"""Command-line front end.

Subcommands: det, heat-trace, torsion, kuranishi, wp, sweep, and
verify {kronecker|bochner|iz|var|ak-const|psh}.  Exit codes: 0 on
success or pass, 1 on verification failure, 2 on usage error, 3 on
numerical non-convergence.  Identical configuration produces
byte-identical output files.
"""

import argparse
import json
import math
import os
import re
import sys

import numpy as np

from . import deformation, hodge, moduli
from ._format import FORMAT_VERSION, to_canonical_json, write_csv, write_json
from .errors import InvalidInputError, NonConvergenceError
from .heat import abks_for_torus, epstein_zeta_det, heat_trace_rows
from .lattice import ComplexTorus, cached_spectrum
from .moduli import (
    logdet_of_modulus,
    verify_ak_const,
    verify_bochner,
    verify_iz,
    verify_kronecker,
    verify_psh,
    verify_var,
)


def parse_tau(text):
    """Parse a modulus like 'i', '2i', '1+i', '0.5+0.866i'."""
    s = text.strip().lower().replace(" ", "")
    s = re.sub(r"(?<![\d.])i", "1i", s)
    s = s.replace("i", "j")
    try:
        tau = complex(s)
    except ValueError:
        raise InvalidInputError(f"cannot parse modulus {text!r}") from None
    if tau.imag <= 0:
        raise InvalidInputError(f"Im tau must be positive, got {text!r}")
    return tau


def parse_tau_list(text):
    return [parse_tau(part) for part in text.split(",") if part.strip()]


def _emit_json(args, obj, default_name):
    path = getattr(args, "out", None)
    if path == "-":
        sys.stdout.write(to_canonical_json(dict(obj, format_version=FORMAT_VERSION)) + "\n")
    elif path:
        write_json(path, obj)
    return path


def _emit_report(args, report):
    obj = report.to_json_obj()
    _emit_json(args, obj, report.name)
    csv_path = getattr(args, "csv", None)
    if csv_path:
        header, rows = report.csv_rows()
        write_csv(csv_path, header, rows)
    print(f"verify {report.name}: {'PASS' if report.passed else 'FAIL'} "
          f"(tolerance {report.tolerance:g})")
    return 0 if report.passed else 1


def _torus_from_args(args):
    taus = getattr(args, "taus", None)
    if taus:
        lst = parse_tau_list(taus)
        if len(lst) == 1:
            return ComplexTorus.from_modulus(lst[0], unit_volume=args.unit_volume)
        return ComplexTorus.product(lst, unit_volume=args.unit_volume)
    return ComplexTorus.from_modulus(parse_tau(args.tau), unit_volume=args.unit_volume)


def _cache_dir(args):
    return getattr(args, "cache_dir", None) or os.environ.get("TORUSLAB_CACHE")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_det(args):
    torus = _torus_from_args(args)
    cache = _cache_dir(args)
    stream = None
    if cache:
        stream = cached_spectrum(cache, torus, args.convention, args.q, 60.0)
    eps = epstein_zeta_det(torus, args.convention, args.q, stream=stream)
    abk = abks_for_torus(torus, args.convention, args.q)
    gap = abs(eps.zeta_prime_at_0 - abk.zeta_prime_at_0)
    obj = eps.to_json_obj()
    obj["cross_check"] = abk.to_json_obj()
    obj["route_gap"] = gap
    _emit_json(args, obj, "det")
    print(f"det: zeta0={eps.zeta_at_0:.12g} zeta'(0)={eps.zeta_prime_at_0:.12g} "
          f"det={eps.det:.12g} route_gap={gap:.3e}")
    if gap > args.route_tol:
        raise NonConvergenceError("determinant routes disagree", achieved=gap)
    return 0


def _cmd_heat_trace(args):
    torus = _torus_from_args(args)
    ts = np.geomspace(args.t_min, args.t_max, args.points)
    rows = heat_trace_rows(torus, args.convention, args.q, ts, tol=args.tol)
    if args.csv:
        write_csv(args.csv, ("t", "value", "abs_error", "route"), rows)
    print(f"heat-trace: {len(rows)} samples in [{args.t_min:g}, {args.t_max:g}]"
          f" ({sum(1 for r in rows if r[3] == 'direct')} direct)")
    return 0


def _cmd_torsion(args):
    model = hodge.HodgeModel(args.model, args.n)
    d = logdet_of_modulus(parse_tau(args.tau), args.convention,
                          unit_volume=args.unit_volume)
    obj = hodge.torsion_pair_json(model, d)
    obj["log_det0"] = d
    _emit_json(args, obj, "torsion")
    s = obj["shifted"]["log_torsion"]
    k = obj["koszul"]["log_torsion"]
    print(f"torsion n={args.n}: shifted={s:.12g} koszul={k:.12g} "
          f"closed_form={obj['shifted']['closed_form']:.12g}")
    return 0


def _cmd_kuranishi(args):
    if args.seed == "synthetic":
        torus, basis = deformation.synthetic_seed(eps=args.eps)
        require = False
    else:
        torus = ComplexTorus.product([1j, 2j])
        basis = [
            deformation.TensorField.constant_beltrami(
                torus, np.eye(2, dtype=complex)
            ),
            deformation.TensorField.constant_beltrami(
                torus, np.array([[0.0, 1.0], [1.0, 0.0]])
            ),
        ]
        require = True
    sol = deformation.picard_solve(basis, K=args.order, R=args.radius,
                                   tol=args.tol, require_harmonic=require)
    obj = sol.to_json_obj()
    _emit_json(args, obj, "kuranishi")
    print(f"kuranishi: order {sol.order}, final residual "
          f"{sol.residual_norms[-1]:.3e}")
    return 0


def _cmd_wp(args):
    torus = _torus_from_args(args)
    n = torus.n
    basis = []
    for a in range(n):
        for v in range(n):
            m = np.zeros((n, n), dtype=complex)
            m[a, v] = 1.0
            basis.append(deformation.TensorField.constant_beltrami(torus, m))
    gram = deformation.wp_gram(basis)
    if args.csv:
        write_csv(args.csv, ("i", "j", "re", "im"), gram.csv_rows())
    eig = np.linalg.eigvalsh(gram.gram)
    print(f"wp: {gram.basis_size}x{gram.basis_size} Gram, "
          f"eigenvalues in [{eig.min():.6g}, {eig.max():.6g}]")
    return 0


def _cmd_sweep(args):
    taus = parse_tau_list(args.taus)
    rows = []
    for tau in taus:
        ld = logdet_of_modulus(tau, args.convention, unit_volume=args.unit_volume)
        rows.append((tau.real, tau.imag, ld, math.exp(ld)))
    if args.csv:
        write_csv(args.csv, ("tau_re", "tau_im", "log_det", "det"), rows)
    print(f"sweep: {len(rows)} moduli")
    return 0


def _cmd_verify(args):
    which = args.which
    if which == "kronecker":
        taus = parse_tau_list(args.taus) if args.taus else [
            1j, 2j, parse_tau("0.5+0.8660254037844386i"), 0.3 + 1.7j
        ]
        report = verify_kronecker(taus, tol=args.tol or 1e-6)
    elif which == "bochner":
        report = verify_bochner(tol=args.tol or 1e-12)
    elif which == "iz":
        report = verify_iz(tol=args.tol or 1e-10)
    elif which == "var":
        report = verify_var(tol=args.tol or 1e-3)
    elif which == "ak-const":
        report = verify_ak_const(tol=args.tol or 1e-6)
    elif which == "psh":
        report = verify_psh(tol=args.tol or 1e-6)
    else:
        raise InvalidInputError(f"unknown verification {which!r}")
    return _emit_report(args, report)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="toruslab",
        description="Spectral laboratory for flat complex tori: heat traces, "
                    "zeta determinants, torsion bookkeeping, deformation "
                    "series, and moduli audits.",
    )
    p.add_argument("--config", help="JSON config file (flags win over it)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tau=True):
        if tau:
            sp.add_argument("--tau", default="i", help="modulus, e.g. i, 2i, 0.3+1.7i")
            sp.add_argument("--taus", help="comma-separated moduli (product torus)")
            sp.add_argument("--unit-volume", action="store_true", dest="unit_volume")
        sp.add_argument("--convention", default="de-rham",
                        choices=["de-rham", "dolbeault", "raw-epstein"])
        sp.add_argument("--out", help="JSON output path ('-' for stdout)")
        sp.add_argument("--cache-dir", dest="cache_dir",
                        help="spectrum cache directory (or TORUSLAB_CACHE)")

    sp = sub.add_parser("det", help="two-route zeta determinant")
    common(sp)
    sp.add_argument("--q", type=int, default=0)
    sp.add_argument("--route-tol", type=float, default=1e-6, dest="route_tol")
    sp.set_defaults(func=_cmd_det)

    sp = sub.add_parser("heat-trace", help="heat-trace sweep to CSV")
    common(sp)
    sp.add_argument("--q", type=int, default=0)
    sp.add_argument("--t-min", type=float, default=0.01, dest="t_min")
    sp.add_argument("--t-max", type=float, default=2.0, dest="t_max")
    sp.add_argument("--points", type=int, default=25)
    sp.add_argument("--tol", type=float, default=1e-13)
    sp.add_argument("--csv", help="CSV output path")
    sp.set_defaults(func=_cmd_heat_trace)

    sp = sub.add_parser("torsion", help="torsion assembly under both conventions")
    common(sp)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--model", default="torus", choices=["torus", "strict_cy"])
    sp.set_defaults(func=_cmd_torsion, convention="dolbeault", unit_volume=True)

    sp = sub.add_parser("kuranishi", help="deformation power-series solve")
    sp.add_argument("--seed", default="synthetic", choices=["synthetic", "constant"])
    sp.add_argument("--order", type=int, default=6)
    sp.add_argument("--radius", type=int, default=12)
    sp.add_argument("--eps", type=float, default=1e-2)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", help="JSON output path ('-' for stdout)")
    sp.set_defaults(func=_cmd_kuranishi)

    sp = sub.add_parser("wp", help="Weil-Petersson Gram matrix of constant fields")
    common(sp)
    sp.add_argument("--csv", help="CSV output path")
    sp.set_defaults(func=_cmd_wp)

    sp = sub.add_parser("sweep", help="log det over a grid of moduli")
    sp.add_argument("--taus", required=True, help="comma-separated moduli")
    sp.add_argument("--convention", default="dolbeault",
                    choices=["de-rham", "dolbeault", "raw-epstein"])
    sp.add_argument("--unit-volume", action="store_true", dest="unit_volume")
    sp.add_argument("--csv", help="CSV output path")
    sp.add_argument("--out", help="JSON output path")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("verify", help="run one audit")
    sp.add_argument("which", choices=["kronecker", "bochner", "iz", "var",
                                      "ak-const", "psh"])
    sp.add_argument("--taus", help="moduli for kronecker")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--out", help="JSON report path ('-' for stdout)")
    sp.add_argument("--csv", help="CSV table path")
    sp.set_defaults(func=_cmd_verify)

    return p


def run(argv):
    parser = build_parser()
    try:
        # --config supplies defaults; explicit flags win
        if "--config" in argv:
            idx = argv.index("--config")
            with open(argv[idx + 1]) as f:
                cfg = json.load(f)
            parser.set_defaults(**cfg)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:  # argparse usage errors
        return 2 if e.code not in (0, None) else 0
    except InvalidInputError as e:
        sys.stderr.write(to_canonical_json(
            {"error": str(e), "type": "invalid-input"}) + "\n")
        return 2
    except NonConvergenceError as e:
        sys.stderr.write(to_canonical_json(
            {"error": str(e), "type": "non-convergence"}) + "\n")
        return 3
    except FileNotFoundError as e:
        sys.stderr.write(to_canonical_json(
            {"error": str(e), "type": "invalid-input"}) + "\n")
        return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
