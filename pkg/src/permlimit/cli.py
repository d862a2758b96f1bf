"""Command-line interface: ``permlimit <command> [options]``.

Results go to stdout, preceded by the resolved configuration as '#' lines
(text and csv) or a ``config`` object (json).  Errors go to stderr as one
JSON object and set the exit code: 2 bad arguments, 3 infeasible sizes or
exceeded guards, 4 validation failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from math import comb
from typing import Sequence

from . import __version__
from ._kernels import set_threads
from .convergence import build_report, distances_csv, report_json, trajectories_csv
from .errors import ArgumentError, PermLimitError, ValidationError
from .metric import (
    discrepancy,
    discrepancy_brute,
    dist_perm_vs_permuton,
    dist_permutations,
    dist_permutations_brute,
    dist_permutons,
    dist_weighted,
    dist_weighted_brute,
)
from .perm_core import (
    count_occurrences,
    count_occurrences_brute,
    density_vector,
    format_permutation,
    iter_occurrences,
    read_permutations,
)
from .permuton import (
    density_bounds,
    exact_density,
    load_permuton,
    mc_density,
    uniform_permuton,
    validate_limit_permutation,
)
from .sampler import RandomStream, rank_compose, sample_subpermutation, sample_z_random
from .weighted import format_value, parse_matrix, weak_regular_partition

FORMAT_VERSION = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _read_text(value: str) -> str:
    if os.path.isfile(value):
        with open(value, encoding="utf-8") as fh:
            return fh.read()
    return value


def _perm(value: str):
    perms = read_permutations(_read_text(value).splitlines())
    if len(perms) != 1:
        raise ArgumentError(f"expected exactly one permutation in {value!r}, found {len(perms)}")
    return perms[0]


def _permuton(value: str):
    if value == "uniform":
        return uniform_permuton()
    return load_permuton(_read_text(value))


def _reals(value: str) -> list[float]:
    try:
        return [float(Fraction(tok)) for tok in value.replace(",", " ").split()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ArgumentError(f"cannot parse numbers from {value!r}") from exc


def _fmt(v, places):
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, Fraction):
        if places is None:
            return format_value(v)
        scaled = round(v * 10**places)
        sign = "-" if scaled < 0 else ""
        whole, frac = divmod(abs(scaled), 10**places)
        return f"{sign}{whole}.{frac:0{places}d}" if places else f"{sign}{whole}"
    if isinstance(v, float):
        return f"{v:.{places}f}" if places is not None else repr(v)
    if isinstance(v, (list, tuple)):
        return [_fmt(x, places) for x in v]
    if isinstance(v, dict):
        return {key: _fmt(x, places) for key, x in v.items()}
    return v


class Output:
    """Collects one command's result and renders it in the chosen format."""

    def __init__(self, command: str, config: dict, fmt: str, places: int | None):
        self.command = command
        self.config = config
        self.fmt = fmt
        self.places = places
        self.fields: dict = {}
        self.rows: list[list] | None = None
        self.lines: list[str] | None = None
        self.raw: str | None = None
        self.failure: PermLimitError | None = None

    def header(self) -> str:
        out = [f"# permlimit {self.command}"]
        out += [f"# {key} = {json.dumps(self.config[key])}" for key in self.config]
        return "\n".join(out) + "\n"

    def render(self) -> str:
        if self.raw is not None:
            return self.raw
        fields = _fmt(self.fields, self.places)
        if self.fmt == "json":
            doc = {"format_version": FORMAT_VERSION, "command": self.command, "config": self.config}
            doc.update(fields)
            if self.rows is not None:
                doc["table"] = _fmt(self.rows, self.places)
            return json.dumps(doc, indent=2) + "\n"
        text = self.header()
        if self.fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf)
            if self.rows is not None:
                for row in _fmt(self.rows, self.places):
                    w.writerow(row)
            else:
                w.writerow(["field", "value"])
                for key, v in fields.items():
                    w.writerow([key, json.dumps(v) if isinstance(v, (list, dict)) else v])
            return text + buf.getvalue()
        if self.lines is not None:
            return text + "".join(line + "\n" for line in self.lines)
        body = []
        for key, v in fields.items():
            body.append(f"{key}: {json.dumps(v) if isinstance(v, (list, dict)) else v}")
        if self.rows is not None:
            body += [" ".join(str(c) for c in row) for row in _fmt(self.rows, self.places)]
        return text + "".join(line + "\n" for line in body)


def _witness_fields(w) -> dict:
    return {"witness_x": list(w.x), "witness_y": list(w.y), "witness_y_side": list(w.y_side)}


def cmd_count(args, out: Output):
    tau, sigma = _perm(args.pattern), _perm(args.perm)

    lam = count_occurrences_brute(tau, sigma) if args.brute_force else count_occurrences(tau, sigma)
    m, n = len(tau), len(sigma)
    out.fields["count"] = lam
    out.fields["density"] = Fraction(lam, comb(n, m)) if m <= n else Fraction(0)
    if args.witnesses:
        occ = [list(x) for x in iter_occurrences(tau, sigma)]
        out.fields["occurrences"] = occ


def cmd_densities(args, out: Output):
    sigma = _perm(args.perm)
    vec = density_vector(args.k, sigma, brute_force=args.brute_force)
    out.rows = [["pattern", "density"]] + [[format_permutation(t), v] for t, v in vec.items()]
    out.fields["total"] = sum(vec.values(), Fraction(0))


def cmd_dist(args, out: Output):
    modes = {
        "perm": (args.perm_a, args.perm_b),
        "matrix": (args.matrix_a, args.matrix_b),
        "permuton": (args.permuton_a, args.permuton_b),
        "mixed": (args.perm, args.permuton),
    }
    chosen = [name for name, (a, b) in modes.items() if a is not None or b is not None]
    if len(chosen) != 1 or None in modes[chosen[0]]:
        raise ArgumentError("give exactly one pair: --perm-a/--perm-b, --matrix-a/--matrix-b, "
                            "--permuton-a/--permuton-b or --perm/--permuton")
    kind = chosen[0]
    a, b = modes[kind]
    if args.brute_force and kind not in ("perm", "matrix"):
        raise ArgumentError("--brute-force is available for permutation and matrix pairs")
    if kind == "perm":
        s1, s2 = _perm(a), _perm(b)
        value, w = dist_permutations(s1, s2)
        if args.brute_force:
            value = dist_permutations_brute(s1, s2)
    elif kind == "matrix":
        Q1, Q2 = parse_matrix(_read_text(a)), parse_matrix(_read_text(b))
        value, w = dist_weighted(Q1, Q2)
        if args.brute_force:
            value = dist_weighted_brute(Q1, Q2)
    elif kind == "permuton":
        value, w = dist_permutons(_permuton(a), _permuton(b))
    else:
        value, w = dist_perm_vs_permuton(_perm(a), _permuton(b))
    out.fields["kind"] = kind
    out.fields["distance"] = value
    if not args.brute_force:
        out.fields.update(_witness_fields(w))


def cmd_discrepancy(args, out: Output):
    sigma = _perm(args.perm)
    if args.brute_force:
        out.fields["discrepancy"] = discrepancy_brute(sigma)
        return
    value, w = discrepancy(sigma)
    out.fields["discrepancy"] = value
    out.fields.update(_witness_fields(w))


def cmd_partition(args, out: Output):
    res = weak_regular_partition(_perm(args.perm), args.epsilon)
    out.fields["k"] = res.k
    out.fields["epsilon"] = res.epsilon
    out.fields["achieved_distance"] = res.achieved
    out.fields["verified"] = res.verified
    out.fields["sizes"] = list(res.partition.sizes)
    out.fields["matrix"] = res.matrix.fractions()


def cmd_permuton(args, out: Output):
    if args.action == "validate":
        Z = _permuton(args.permuton)
        rep = validate_limit_permutation(Z)
        out.fields.update(kind=Z.kind, k=Z.k, cdf_rows_ok=rep.cdf_rows_ok, top_value_ok=rep.top_value_ok,
                          mass_violation=rep.mass_violation, valid=rep.valid)
        if args.require_valid and not rep.valid:
            out.failure = ValidationError("permuton is not a limit permutation")
    elif args.action == "density":
        Z = _permuton(args.permuton)
        tau = _perm(args.pattern)
        if args.mc:
            res = mc_density(tau, Z, args.n, args.reps, RandomStream(args.seed))
            out.fields.update(method=res.method, value=res.value, error_bound=res.error_bound,
                              std_error=res.std_error, clt_bound=res.clt_bound, reps=res.reps, n=res.n)
        else:
            res = exact_density(tau, Z)
            out.fields.update(method=res.method, value=res.exact if res.exact is not None else res.value,
                              error_bound=res.error_bound)
    else:
        Q = parse_matrix(_read_text(args.matrix))
        lo, hi = density_bounds(_perm(args.pattern), Q)
        out.fields.update(lower=lo, upper=hi)


def cmd_sample(args, out: Output):
    if args.x is not None or args.a is not None:
        if args.x is None or args.a is None:
            raise ArgumentError("rank composition needs both --x and --a")
        X, a = _reals(args.x), _reals(args.a)
        if len(X) != len(a):
            raise ArgumentError("--x and --a need the same number of values")
        perms = [rank_compose(list(zip(X, a)))]
    else:
        stream = RandomStream(args.seed)
        if args.permuton is not None:
            if args.n is None:
                raise ArgumentError("sampling from a permuton needs --n")
            Z = _permuton(args.permuton)
            perms = [sample_z_random(Z, args.n, stream.substream(i)) if args.count > 1
                     else sample_z_random(Z, args.n, stream) for i in range(args.count)]
        elif args.perm is not None:
            if args.k is None:
                raise ArgumentError("subpermutation sampling needs --k")
            sigma = _perm(args.perm)
            perms = [sample_subpermutation(sigma, args.k, stream.substream(i)) if args.count > 1
                     else sample_subpermutation(sigma, args.k, stream) for i in range(args.count)]
        else:
            raise ArgumentError("give --permuton, --perm or --x/--a")
    text = [format_permutation(p) for p in perms]
    out.fields["permutations"] = text
    out.lines = text
    out.rows = [["index", "permutation"]] + [[i + 1, t] for i, t in enumerate(text)]


def cmd_converge(args, out: Output):
    seq = read_permutations(_read_text(args.seq).splitlines())
    report = build_report(seq, max_m=args.max_m, epsilon=args.epsilon, window=args.window,
                          k=args.k, tail=args.tail)
    if args.format == "json":
        doc = json.loads(report_json(report, args.decimal))
        doc = {"format_version": doc.pop("format_version"), "command": "converge", "config": out.config, **doc}
        out.raw = json.dumps(doc, indent=2) + "\n"
    elif args.format == "csv" and args.table == "distances":
        out.raw = out.header() + distances_csv(report, args.decimal)
    else:
        out.raw = out.header() + trajectories_csv(report, args.decimal)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("--decimal", type=int, metavar="PLACES", help="print exact values as decimals")
    common.add_argument("--threads", type=int, help="cap worker threads of the distance kernels")

    parser = _Parser(prog="permlimit", description="Permutation patterns, distances and permutons.")
    parser.add_argument("--version", action="version", version=f"permlimit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", parents=[common], help="occurrences and density of a pattern")
    p.add_argument("--pattern", required=True)
    p.add_argument("--perm", required=True)
    p.add_argument("--witnesses", action="store_true", help="list every occurrence")
    p.add_argument("--brute-force", action="store_true")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("densities", parents=[common], help="densities of all patterns of length k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--perm", required=True)
    p.add_argument("--brute-force", action="store_true")
    p.set_defaults(func=cmd_densities)

    p = sub.add_parser("dist", parents=[common], help="rectangular distance with a witness")
    for name in ("perm-a", "perm-b", "matrix-a", "matrix-b", "permuton-a", "permuton-b", "perm", "permuton"):
        p.add_argument(f"--{name}")
    p.add_argument("--brute-force", action="store_true")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("discrepancy", parents=[common], help="discrepancy of a permutation")
    p.add_argument("--perm", required=True)
    p.add_argument("--brute-force", action="store_true")
    p.set_defaults(func=cmd_discrepancy)

    p = sub.add_parser("partition", parents=[common], help="weak-regular equitable partition")
    p.add_argument("--perm", required=True)
    p.add_argument("--epsilon", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("permuton", parents=[common], help="validate a permuton, densities, bounds")
    p.add_argument("action", choices=("validate", "density", "bounds"))
    p.add_argument("--permuton")
    p.add_argument("--matrix")
    p.add_argument("--pattern")
    p.add_argument("--require-valid", action="store_true")
    p.add_argument("--mc", action="store_true", help="Monte Carlo instead of exact enumeration")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_permuton)

    p = sub.add_parser("sample", parents=[common], help="Z-random permutation, subpermutation or rank composition")
    p.add_argument("--permuton")
    p.add_argument("--perm")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x", help="X coordinates for rank composition")
    p.add_argument("--a", help="a coordinates for rank composition")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("converge", parents=[common], help="sequence report")
    p.add_argument("--seq", required=True, help="file with one permutation per line")
    p.add_argument("--max-m", type=int, default=3)
    p.add_argument("--epsilon")
    p.add_argument("--window", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--tail", type=int)
    p.add_argument("--table", choices=("trajectories", "distances"), default="trajectories")
    p.set_defaults(func=cmd_converge)
    return parser


def _check_options(args):
    if args.decimal is not None and args.decimal < 0:
        raise ArgumentError("--decimal needs a non-negative number of places")
    if args.threads is not None and args.threads < 1:
        raise ArgumentError("--threads must be at least 1")
    if args.command == "permuton":
        need = {"validate": ("permuton",), "density": ("permuton", "pattern"), "bounds": ("matrix", "pattern")}
        missing = [f"--{o}" for o in need[args.action] if getattr(args, o) is None]
        if missing:
            raise ArgumentError(f"permuton {args.action} needs {' '.join(missing)}")
    if args.command == "sample" and args.count < 1:
        raise ArgumentError("--count must be at least 1")


def _config(args) -> dict:
    skip = {"func", "command"}
    return {key: value for key, value in sorted(vars(args).items()) if key not in skip}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        _check_options(args)
        set_threads(args.threads)
        out = Output(args.command, _config(args), args.format, args.decimal)
        args.func(args, out)
        stdout.write(out.render())
        if out.failure is not None:
            raise out.failure
        return 0
    except PermLimitError as exc:
        stderr.write(json.dumps({"error": exc.code, "exit_code": exc.exit_code, "message": str(exc)}) + "\n")
        return exc.exit_code
    except OSError as exc:
        stderr.write(json.dumps({"error": "io", "exit_code": 2, "message": str(exc)}) + "\n")
        return 2


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
