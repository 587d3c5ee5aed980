"""Command-line front end.

Exit codes: 0 ok / consistent / associated, 1 input error, 2 geometric
degeneracy, 3 negative verdict.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import models
from .connection import compare_structures
from .contact import (r5_example, r5_table_crosscheck, search_associated_form, verify_existence)
from .errors import (ContactDegeneracy, DegenerateMap, EvaluationError, ParseError, SpecError,
                     StencilError)
from .reduction import usable_points, adapted_coframe
from .report import (REPORT_TOL, StageError, _fmt_list, fmt, run_invariants, table,
                     to_json_lines, to_table)
from .specfile import Options, SpecFile, default_tol, load_map, load_points, load_spec

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_NEGATIVE = 0, 1, 2, 3


def _load(path: str) -> SpecFile:
    if path.startswith("builtin:"):
        try:
            return models.load(path.split(":", 1)[1])
        except KeyError as exc:
            raise SpecError(str(exc.args[0])) from None
    return load_spec(path)


def _points(args, sf: SpecFile):
    if args.points:
        return load_points(args.points, sf.spec.dim)
    return list(sf.points)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _tol(args, sf: SpecFile) -> float:
    return args.tol if args.tol is not None else sf.options.tol


def _fd(args, sf: SpecFile) -> float:
    return args.fd_step if args.fd_step is not None else sf.options.fd_step


def cmd_invariants(args) -> int:
    sf = _load(args.spec)
    report = run_invariants(sf, _points(args, sf), _tol(args, sf), _fd(args, sf))
    _emit(args, to_json_lines(report) if args.format == "json" else to_table(report))
    return EXIT_OK


def cmd_compare(args) -> int:
    sa, sb = _load(args.spec_a), _load(args.spec_b)
    mapping = load_map(args.map, sa.spec.chart)
    cf = adapted_coframe(sa.spec)
    pts = usable_points(sa.spec, _points(args, sa), cf)
    if not pts:
        raise SpecError("no sample point evaluates")
    v = compare_structures(sa.spec, sb.spec, mapping, pts, _fd(args, sa), _tol(args, sa),
                           args.report_tol)
    names = ("mu", "lambda_scale", "b_shift", "rotation", "torsion", "curvature")
    if args.format == "json":
        head = {"type": "verdict", "verdict": v.verdict, "tolerance": v.tolerance,
                "first_failure": None if v.first_failure is None else
                {"component": v.first_failure[0], "point": list(v.first_failure[1]),
                 "difference": v.first_failure[2]},
                "note": "agreement is necessary-condition evidence, not a proof"}
        lines = [json.dumps(head)] + [json.dumps({"type": "row", "point": list(r["point"]),
                                                  **{k: r[k] for k in names}}) for r in v.rows]
        text = "\n".join(lines) + "\n"
    else:
        body = [[str(i), _fmt_list(r["point"])] + [fmt(r[k]) for k in names]
                for i, r in enumerate(v.rows)]
        text = table(["#", "point", *names], body) + "\n"
        text += f"\nverdict: {v.verdict} (report tolerance {fmt(v.tolerance)}; necessary-condition evidence)\n"
        if v.first_failure is not None:
            name, point, diff = v.first_failure
            text += f"first failing component: {name} at {_fmt_list(point)} (difference {fmt(diff)})\n"
    _emit(args, text)
    return EXIT_OK if v.consistent else EXIT_NEGATIVE


def cmd_check_associated(args) -> int:
    if args.r5:
        try:
            vals = [Fraction(x) for x in args.r5]
            spec = r5_example(*vals)
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"--r5: {exc}") from None
        sf = models.load("r5_unit")
        sf = SpecFile(spec, sf.points, Options(tol=default_tol()), f"r5 {' '.join(args.r5)}")
    elif args.spec:
        sf = _load(args.spec)
        vals = None
    else:
        raise SpecError("give a spec file or --r5 p q r s")
    tol = _tol(args, sf)
    pts = usable_points(sf.spec, _points(args, sf))
    if not pts:
        raise SpecError("no sample point evaluates")
    res = search_associated_form(sf.spec, pts, tol)
    out = {"type": "associated", "structure": sf.spec.name or sf.source,
           "exists": res.exists, "points": len(pts)}
    if res.exists:
        ver = verify_existence(sf.spec, res)
        out["f"] = list(res.f_values)
        out["verified"] = ver.associated
        out["max_violations"] = ver.max_violations
    else:
        out["certificate"] = [float(f"{x:.12g}") for x in res.certificate]
        out["certificate_point"] = list(res.certificate_point)
    if vals is not None:
        check = r5_table_crosscheck(*vals)
        out["phi_table"] = {**check, "matched": sorted(
            (k for k, d in check.items() if d < 1e-9)) or None}
    if args.format == "json":
        text = json.dumps(out) + "\n"
    else:
        lines = [f"structure: {out['structure']}", f"sample points: {len(pts)}"]
        if res.exists:
            lines.append("associated metric: exists (f = 1/lambda_1 at every point)")
            lines.append("f values: " + _fmt_list(res.f_values))
            lines.append("identities verified: " + fmt(out["verified"]))
        else:
            lines.append("associated metric: obstructed")
            lines.append("certificate: required f^2 values " + _fmt_list(out["certificate"])
                         + " at " + _fmt_list(res.certificate_point))
        if vals is not None:
            lines.append("phi table convention matched: " + ", ".join(out["phi_table"]["matched"] or ["none"]))
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    return EXIT_OK if res.exists else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="absolute tolerance (default: $SRCARTAN_TOL or 1e-9)")
    common.add_argument("--fd-step", type=float, default=None, help="finite-difference step")
    common.add_argument("--points", default=None, help="JSON file with sample points")
    common.add_argument("--format", choices=("json", "table"), default="table")
    common.add_argument("--out", default=None, help="write the report to this file")

    parser = argparse.ArgumentParser(prog="srcartan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invariants", parents=[common], help="reduce and report invariants")
    p.add_argument("spec", help="spec file, or builtin:<name>")
    p.set_defaults(func=cmd_invariants)

    p = sub.add_parser("compare", parents=[common], help="compare two structures under a map")
    p.add_argument("spec_a")
    p.add_argument("spec_b")
    p.add_argument("--map", required=True, help="JSON file with the coordinate map A -> B")
    p.add_argument("--report-tol", type=float, default=REPORT_TOL)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check-associated", parents=[common],
                       help="decide whether an associated contact metric exists")
    p.add_argument("spec", nargs="?")
    p.add_argument("--r5", nargs=4, metavar=("P", "Q", "R", "S"),
                   help="built-in R^5 example with metric p dx1^2 + q dy1^2 + r dx2^2 + s dy2^2")
    p.set_defaults(func=cmd_check_associated)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ParseError) as exc:
        print(f"srcartan: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StageError, ContactDegeneracy, DegenerateMap, StencilError, EvaluationError) as exc:
        print(f"srcartan: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
