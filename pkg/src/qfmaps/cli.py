"""Command-line entry point: ``qfmaps density|approximate|check|stats|converge``.

Exit codes: 0 success, 1 parse or input error, 2 resource guard,
3 failed hypothesis or failed check.  Messages go to standard error.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .approx import ApproxParams, approximate
from .density import DensityReport, converge, density, density_mc
from .errors import HypothesisError, ParseError, ResourceLimitError
from .interval import IntervalMapping, check_cycle_preservation, parse_interval
from .local import ball_histogram, dispersion, residuality
from .logic import (
    arity,
    format_formula,
    function_symbol_count,
    parse_battery,
    parse_formula,
)
from .mapping import check_fmtp, check_image_monotone, parse_mapping, serialize_mapping

DEFAULT_SEED = 20240101
INTERVAL_SUFFIXES = {".imap", ".interval"}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def load_structure(path: str):
    """Finite mapping or interval mapping, chosen by suffix then by content."""
    text = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix in INTERVAL_SUFFIXES:
        return parse_interval(text)
    try:
        return parse_mapping(text)
    except ParseError as first:
        try:
            return parse_interval(text)
        except ParseError:
            raise first from None


def _show(x: Fraction, decimal: bool) -> str:
    return f"{float(x):.12g}" if decimal else str(x)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _element_set(text: str, n: int) -> set[int]:
    text = text.strip()
    if text == "all":
        return set(range(n))
    if text in ("", "none"):
        return set()
    out = set()
    for tok in text.split(","):
        tok = tok.strip()
        if "-" in tok:
            a, b = tok.split("-", 1)
            out.update(range(int(a), int(b) + 1))
        else:
            out.add(int(tok))
    bad = [v for v in out if not 0 <= v < n]
    if bad:
        raise ValueError(f"elements {sorted(bad)} outside domain of size {n}")
    return out


def natural_key(path: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", path)]


def _formulas(args) -> list[tuple[str, object]]:
    out = [(s, parse_formula(s)) for s in args.formula or []]
    if getattr(args, "formulas", None):
        out.extend(parse_battery(Path(args.formulas).read_text(encoding="utf-8")))
    if not out:
        raise ValueError("no formulas given (use --formula or --formulas)")
    return out


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_density(args) -> int:
    S = load_structure(args.structure)
    lines = ["formula\tp\tq\tvalue\tradius\tmethod"]
    for text, phi in _formulas(args):
        if args.mc is not None:
            rep = density_mc(phi, S, args.mc, args.delta, seed=args.seed)
            rep = DensityReport(text, rep.p, rep.q, rep.method, estimate=rep.estimate,
                                radius=rep.radius, samples=rep.samples)
        else:
            kw = {} if isinstance(S, IntervalMapping) else {"threads": args.threads}
            value = density(phi, S, **kw)
            rep = DensityReport(text, arity(phi), function_symbol_count(phi), "exact", value=value)
        lines.append(rep.tsv(args.decimal))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_approximate(args) -> int:
    limit_text = Path(args.limit).read_bytes()
    L = parse_interval(limit_text.decode("utf-8"))
    params = ApproxParams(args.p, args.q, args.eps, args.N, seed=args.seed, nsamples=args.nsamples)
    report = check_cycle_preservation(L, params.q)
    cert_path = Path(args.cert) if args.cert else Path(str(args.out) + ".cert.jsonl")
    records: list[dict] = [{
        "record": "params", "p": params.p, "q": params.q, "eps": str(params.eps),
        "N": params.N, "seed": params.seed, "nsamples": args.nsamples,
    }, {
        "record": "hypothesis", "check": "cycle_preservation", "holds": report.holds,
        "detail": report.describe(),
    }]
    if not report:
        cert_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records),
                             encoding="utf-8")
        raise HypothesisError(report.describe())
    result = approximate(L, params)
    data = serialize_mapping(result.structure).encode("utf-8")
    Path(args.out).write_bytes(data)
    records.append({"record": "sizes", "sampled": result.source.n, "blown": result.structure.n})
    records.append({"record": "bound", "value": str(result.bound),
                    "decimal": f"{float(result.bound):.12g}"})
    records.append({
        "record": "manifest", "command": "approximate", "version": __version__,
        "inputs": {str(args.limit): _sha256(limit_text)},
        "parameters": {"p": params.p, "q": params.q, "eps": str(params.eps), "N": params.N,
                       "nsamples": args.nsamples},
        "seed": params.seed,
        "outputs": {str(args.out): _sha256(data)},
    })
    cert_path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records),
                         encoding="utf-8")
    print(f"wrote {args.out} ({result.structure.n} elements from {result.source.n} sampled); "
          f"bound {_show(result.bound, args.decimal)}")
    return 0


def cmd_check(args) -> int:
    if args.cycles:
        if not args.limit:
            raise ValueError("--cycles needs --limit")
        L = parse_interval(Path(args.limit).read_text(encoding="utf-8"))
        rep = check_cycle_preservation(L, args.q)
        print(("holds: " if rep else "fails: ") + rep.describe())
        return 0 if rep else 3
    if not args.structure:
        raise ValueError("--fmtp and --image need --structure")
    F = parse_mapping(Path(args.structure).read_text(encoding="utf-8"))
    A = _element_set(args.A, F.n)
    if args.image:
        ok = check_image_monotone(F, A)
        print("holds" if ok else "fails")
        return 0 if ok else 3
    B = _element_set(args.B, F.n)
    rep = check_fmtp(F, A, B)
    lhs, rhs = _show(rep.lhs, args.decimal), _show(rep.rhs, args.decimal)
    print(f"holds: {lhs} = {rhs}" if rep else f"fails: {lhs} != {rhs}")
    return 0 if rep else 3


def cmd_stats(args) -> int:
    F = load_structure(args.structure)
    if isinstance(F, IntervalMapping):
        raise ValueError("stats needs a finite mapping file")
    lines = ["code\tprobability"]
    for code, prob in ball_histogram(F, args.radius).items():
        lines.append(f"{code.decode('ascii')}\t{_show(prob, args.decimal)}")
    lines.append(f"residuality\t{_show(residuality(F, args.radius), args.decimal)}")
    if args.root is not None:
        lines.append(f"dispersion\t{_show(dispersion(F, args.root, args.radius), args.decimal)}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_converge(args) -> int:
    paths = sorted(glob.glob(args.structures), key=natural_key)
    if len(paths) < 2:
        raise ValueError(f"pattern {args.structures!r} matched {len(paths)} file(s); need at least 2")
    structures = [load_structure(p) for p in paths]
    formulas = [phi for _, phi in _formulas(args)]
    names = [t for t, _ in _formulas(args)]
    rep = converge(formulas, structures, window=args.window, threshold=args.threshold)
    rep = type(rep)(tuple(names), rep.table, rep.differences, rep.tail_deviation,
                    rep.flagged, rep.window, rep.threshold)
    out = "# structures: " + " ".join(paths) + "\n" + rep.tsv(args.decimal)
    _emit(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--decimal", action="store_true", help="print 12 significant digits")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=None)

    parser = argparse.ArgumentParser(prog="qfmaps", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", parents=[common], help="satisfaction densities")
    p.add_argument("--structure", required=True)
    p.add_argument("--formula", action="append")
    p.add_argument("--formulas", help="battery file, one formula per line")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact value (default)")
    mode.add_argument("--mc", type=int, metavar="N", help="Monte Carlo with N samples")
    p.add_argument("--delta", type=float, default=0.01)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("approximate", parents=[common], help="finite approximation of a limit")
    p.add_argument("--limit", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--eps", type=_fraction, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--nsamples", type=int, default=None)
    p.add_argument("--cert", default=None, help="certificate path (default <out>.cert.jsonl)")
    p.set_defaults(func=cmd_approximate)

    p = sub.add_parser("check", parents=[common], help="structural checks")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--fmtp", action="store_true")
    which.add_argument("--image", action="store_true")
    which.add_argument("--cycles", action="store_true")
    p.add_argument("--structure")
    p.add_argument("--limit")
    p.add_argument("--A", default="all")
    p.add_argument("--B", default="all")
    p.add_argument("--q", type=int, default=3)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("stats", parents=[common], help="ball-type statistics")
    p.add_argument("--structure", required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--root", type=int, default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("converge", parents=[common], help="density table over a sequence")
    p.add_argument("--structures", required=True, help="glob, naturally sorted")
    p.add_argument("--formula", action="append")
    p.add_argument("--formulas")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--threshold", type=_fraction, default=Fraction(1, 10))
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 1
    except ResourceLimitError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return 2
    except HypothesisError as e:
        print(f"hypothesis failed: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
