"""Command-line interface.

Subcommands::

    renyi-rot test INPUT --K 8 [--tables FILE] [--strict|--lenient] [--json]
    renyi-rot calibrate --kstar 1,2,4 --n 1000000 --seed 7 --out FILE
    renyi-rot power-bench SCENARIO.json [--out results.csv]

Exit codes: 0 success, 2 input, parse or scenario-config error, 3 invalid
K, kstar or missing calibration table, 4 numeric domain error (e.g. a zero
p-value in strict mode), 5 file could not be written.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .bench import load_scenario, run_power_bench, write_results_csv
from .calibration import (
    TableFormatError,
    TableSet,
    default_table_set,
    fit_table,
    load_table_set,
    save_table_set,
    simulate_null,
)
from .pipeline import MissingTableError, rot_test
from .specfun import DomainError
from .transform import LogPValueVector, PriorWeights

EXIT_PARSE = 2
EXIT_PARAM = 3
EXIT_DOMAIN = 4
EXIT_IO = 5

_LN10 = math.log(10.0)


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Input files


@dataclass(frozen=True)
class InputRecord:
    id: str
    logp: float
    pi: float = 1.0
    eta: float = 1.0


def _float(text, what, line):
    try:
        return float(text)
    except ValueError:
        raise CliError(f"line {line}: {what} {text!r} is not a number", EXIT_PARSE) from None


def parse_records(text):
    """Parse delimited text (tab or comma, sniffed) into :class:`InputRecord` rows.

    A header row is required with exactly one of ``p`` / ``logp`` and
    optional ``id``, ``pi``, ``eta`` columns.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise CliError("input is empty", EXIT_PARSE)
    try:
        dialect = csv.Sniffer().sniff(lines[0], delimiters=",\t")
    except csv.Error:
        dialect = csv.excel
    reader = csv.reader(lines, dialect)
    header = [h.strip() for h in next(reader)]
    if len(set(header)) != len(header):
        raise CliError("duplicate column names in header", EXIT_PARSE)
    has_p, has_logp = "p" in header, "logp" in header
    if has_p == has_logp:
        raise CliError("header must contain exactly one of 'p' or 'logp'", EXIT_PARSE)
    col = {name: i for i, name in enumerate(header)}
    records = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise CliError(f"line {lineno}: expected {len(header)} fields, got {len(row)}", EXIT_PARSE)
        row = [v.strip() for v in row]
        rid = row[col["id"]] if "id" in col else str(lineno - 1)
        if has_p:
            p = _float(row[col["p"]], "p", lineno)
            if not 0.0 <= p <= 1.0:
                raise CliError(f"line {lineno}: p-value {p} outside [0, 1]", EXIT_PARSE)
            logp = math.log(p) if p > 0 else -math.inf
        else:
            logp = _float(row[col["logp"]], "logp", lineno)
            if math.isnan(logp) or logp > 0:
                raise CliError(f"line {lineno}: logp {logp} must be <= 0", EXIT_PARSE)
        pi = _float(row[col["pi"]], "pi", lineno) if "pi" in col else 1.0
        eta = _float(row[col["eta"]], "eta", lineno) if "eta" in col else 1.0
        for name, v in (("pi", pi), ("eta", eta)):
            if not (math.isfinite(v) and v > 0):
                raise CliError(f"line {lineno}: {name} must be finite and > 0", EXIT_PARSE)
        records.append(InputRecord(rid, logp, pi, eta))
    if not records:
        raise CliError("input has a header but no rows", EXIT_PARSE)
    return records


def read_records(path):
    try:
        if path == "-":
            return parse_records(sys.stdin.read())
        with open(path, encoding="utf-8") as fh:
            return parse_records(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_PARSE) from None


def format_records(records, delimiter="\t"):
    """Inverse of :func:`parse_records`, always writing the ``logp`` column."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["id", "logp", "pi", "eta"])
    for r in records:
        w.writerow([r.id, repr(float(r.logp)), repr(float(r.pi)), repr(float(r.eta))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# test


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    p: int
    K: int
    Kstar: int
    rho: float
    components: dict
    argmax_i: int
    log10_pvalue: float
    pvalue: float
    extrapolated: bool
    top_ids: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_json(self):
        d = asdict(self)
        d["components"] = {str(k): v for k, v in self.components.items()}
        return json.dumps(d, indent=2)

    def to_text(self):
        out = [
            f"p-values tested     {self.p}",
            f"K / K*              {self.K} / {self.Kstar}",
            f"rho                 {self.rho:.6f}",
            f"argmax i            {self.argmax_i}",
            f"log10 p-value       {self.log10_pvalue:.6f}",
            f"p-value             {self.pvalue:.6g}",
            f"extrapolated        {'yes' if self.extrapolated else 'no'}",
            "components:",
        ]
        out += [f"  i={i:<5d} {v:.6f}" for i, v in self.components.items()]
        if self.top_ids:
            out.append("top elements: " + ", ".join(self.top_ids))
        out += [f"warning: {w}" for w in self.warnings]
        return "\n".join(out)


def run_test(records, K, tables=None, strict=True):
    """Run the pipeline on parsed records and build a :class:`TestReport`."""
    ids = [r.id for r in records]
    try:
        logp = LogPValueVector.from_logp([r.logp for r in records], ids=ids, strict=strict)
        weights = PriorWeights([r.pi for r in records], [r.eta for r in records])
    except DomainError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    try:
        res = rot_test(logp, K, weights=weights, tables=tables, strict=strict)
    except MissingTableError as exc:
        raise CliError(exc.args[0], EXIT_PARAM) from None
    except DomainError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    log10p = res.p_value_log / _LN10
    # order the top argmax_i elements by descending score
    z = np.asarray(weights.eta) * (-logp.logp + np.log(weights.pi))
    top = np.argsort(-z, kind="stable")[:res.argmax_i]
    return TestReport(
        p=len(records), K=int(K), Kstar=res.kstar, rho=res.rho,
        components=dict(res.components), argmax_i=res.argmax_i,
        log10_pvalue=log10p, pvalue=10.0 ** log10p, extrapolated=res.extrapolated,
        top_ids=[ids[i] for i in top], warnings=list(res.warnings),
    )


def _load_tables(path):
    try:
        return default_table_set() if path is None else load_table_set(path)
    except OSError as exc:
        raise CliError(f"cannot read tables {path}: {exc.strerror}", EXIT_PARAM) from None
    except TableFormatError as exc:
        raise CliError(f"bad table file {path}: {exc}", EXIT_PARAM) from None


def cmd_test(args):
    if args.K < 1:
        raise CliError(f"--K must be >= 1, got {args.K}", EXIT_PARAM)
    records = read_records(args.input)
    tables = _load_tables(args.tables)
    report = run_test(records, args.K, tables=tables, strict=args.strict)
    print(report.to_json() if args.json else report.to_text())
    return 0


# ---------------------------------------------------------------------------
# calibrate / power-bench


def _parse_kstars(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            k = int(tok)
        except ValueError:
            raise CliError(f"invalid kstar {tok!r}", EXIT_PARAM) from None
        if k < 1 or k & (k - 1):
            raise CliError(f"kstar {k} is not a power of two", EXIT_PARAM)
        out.append(k)
    if not out:
        raise CliError("no kstar values given", EXIT_PARAM)
    return sorted(set(out))


def build_table_set(kstars, n, seed, threads=1):
    return TableSet({k: fit_table(simulate_null(k, n, seed, threads=threads), k, seed) for k in kstars})


def cmd_calibrate(args):
    kstars = _parse_kstars(args.kstar)
    if args.n < 10_000:
        raise CliError("--n must be at least 10000", EXIT_PARAM)
    if not 0 <= args.seed < 2 ** 64:
        raise CliError("--seed must lie in [0, 2**64)", EXIT_PARAM)
    try:
        ts = build_table_set(kstars, args.n, args.seed, threads=args.threads)
    except DomainError as exc:
        raise CliError(str(exc), EXIT_DOMAIN) from None
    try:
        save_table_set(ts, args.out)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc.strerror}", EXIT_IO) from None
    for k in kstars:
        t = ts.tables[k]
        print(f"K*={k:<4d} n={t.n_sims} tail_cut={t.tail_cut:.4f} tail_slope={t.tail_slope:.4f}",
              file=sys.stderr)
    return 0


def cmd_power_bench(args):
    try:
        scenario = load_scenario(args.config)
    except OSError as exc:
        raise CliError(f"cannot read {args.config}: {exc.strerror}", EXIT_PARSE) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {args.config}: {exc}", EXIT_PARSE) from None
    except DomainError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    tables = _load_tables(args.tables)
    try:
        rows = run_power_bench(scenario, tables=tables, threads=args.threads)
    except KeyError as exc:
        raise CliError(exc.args[0], EXIT_PARAM) from None
    if args.out in (None, "-"):
        write_results_csv(rows, sys.stdout)
    else:
        try:
            with open(args.out, "w", newline="") as fh:
                write_results_csv(rows, fh)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc.strerror}", EXIT_IO) from None
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="renyi-rot", description="Renyi outlier test for p-values.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a file of p-values for outliers")
    t.add_argument("input", help="delimited file with columns id, p|logp[, pi, eta]; '-' for stdin")
    t.add_argument("--K", type=int, required=True, help="upper bound on the number of outliers")
    t.add_argument("--tables", help="ROTTAB calibration file (default: packaged tables)")
    mode = t.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True,
                      help="reject p-values equal to 0 (default)")
    mode.add_argument("--lenient", dest="strict", action="store_false",
                      help="clamp p-values equal to 0 to 1e-320")
    t.add_argument("--json", action="store_true", help="print a JSON report")
    t.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the test is deterministic")
    t.add_argument("--threads", type=int, default=1, help="accepted for symmetry; no effect on results")
    t.set_defaults(func=cmd_test)

    c = sub.add_parser("calibrate", help="simulate null tables")
    c.add_argument("--kstar", default="1,2,4,8,16,32,64,128", help="comma-separated powers of two")
    c.add_argument("--n", type=int, default=1_000_000, help="null replicates per K*")
    c.add_argument("--seed", type=int, default=1)
    c.add_argument("--out", required=True, help="output ROTTAB file")
    c.add_argument("--threads", type=int, default=1)
    c.set_defaults(func=cmd_calibrate)

    b = sub.add_parser("power-bench", help="compare rejection rates by simulation")
    b.add_argument("config", help="scenario JSON file")
    b.add_argument("--out", help="CSV destination (default stdout)")
    b.add_argument("--tables", help="ROTTAB calibration file (default: packaged tables)")
    b.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    b.add_argument("--threads", type=int, default=1)
    b.set_defaults(func=cmd_power_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"renyi-rot: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
