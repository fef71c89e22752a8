"""Convergence studies: problem registry, self-convergence tables, rendering
and INI experiment files.

Errors are e_N = ||u^N - u^{2N}|| at t = 1 in the Clenshaw--Curtis weighted
discrete L2 norm, and the rate of a row is log2(e_{N/2} / e_N) taken from the
finest adjacent pair whose cells are not flagged as round-off limited.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources

import numpy as np

from .errors import ConfigError, RateUndefinedError
from .precision import DOUBLE, Extended, get_precision
from .smoothing import SourceDescriptor, TemporalExpr
from .spatial import Constant, Indicator, SqrtCap, discrete_l2, laplacian_dirichlet
from .stepper import ProblemSpec, SchemeKind, run
from .symbols import SchemeOrder, as_fraction

FLAG_FACTOR = 100
AUTO_EXTENDED_FROM_M = 4
EXTENDED_DIGITS = 50


# --- problems ---------------------------------------------------------------


@dataclass(frozen=True)
class ProblemCase:
    id: str
    v: object
    f: SourceDescriptor
    T: Fraction = Fraction(1)
    description: str = ""

    def problem(self) -> ProblemSpec:
        return ProblemSpec(self.v, self.f, self.T, self.id)


def star_case(v=None, D=(Fraction(-1, 2), Fraction(1, 2))) -> ProblemCase:
    """f = chi_D (time independent); v defaults to 0."""
    v = Constant(0) if v is None else v
    a, b = (as_fraction(x) for x in D)
    f = SourceDescriptor.separable(TemporalExpr.constant(1), Indicator(a, b))
    return ProblemCase("star", v, f, Fraction(1), f"f = chi_({a}, {b})")


def _case_b_source():
    return SourceDescriptor.separable(TemporalExpr.cos(1), Constant(1) + Indicator(0, 1))


CASES = {
    "a": ProblemCase("a", SqrtCap(), SourceDescriptor.zero(), Fraction(1), "v = sqrt(1 - x^2), f = 0"),
    "example21": ProblemCase("example21", SqrtCap(), SourceDescriptor.zero(), Fraction(1),
                             "v = sqrt(1 - x^2), f = 0"),
    "b": ProblemCase("b", SqrtCap(), _case_b_source(), Fraction(1),
                     "v = sqrt(1 - x^2), f = cos(t) (1 + chi_(0,1)(x))"),
    "star": star_case(),
}


def get_case(case) -> ProblemCase:
    if isinstance(case, ProblemCase):
        return case
    try:
        return CASES[str(case).lower()]
    except KeyError:
        raise ConfigError(f"unknown case {case!r}; choose from {', '.join(CASES)}") from None


# --- rates and tables -------------------------------------------------------


def rate(e_coarse, e_fine) -> float:
    """log2(e_coarse / e_fine)."""
    e_coarse, e_fine = float(e_coarse), float(e_fine)
    if not (e_coarse > 0 and e_fine > 0) or not (math.isfinite(e_coarse) and math.isfinite(e_fine)):
        raise RateUndefinedError(f"rate needs two positive errors, got {e_coarse!r}, {e_fine!r}")
    return math.log2(e_coarse / e_fine)


@dataclass
class TableRow:
    key: int
    errors: list
    flags: list
    eps: float
    precision: str = "double"
    rate: float | None = None
    rate_pair: tuple | None = None

    def finest_rate(self, Ns):
        """Rate from the finest adjacent pair with both cells unflagged."""
        for i in range(len(self.errors) - 1, 0, -1):
            if self.flags[i] or self.flags[i - 1]:
                continue
            try:
                return rate(self.errors[i - 1], self.errors[i]), (Ns[i - 1], Ns[i])
            except RateUndefinedError:
                continue
        return None, None


@dataclass
class ConvergenceTable:
    Ns: list
    rows: list = field(default_factory=list)
    row_label: str = "m"
    title: str = ""

    def row(self, key) -> TableRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)


def check_ladder(Ns) -> list:
    Ns = [int(n) for n in Ns]
    if any(n < 1 for n in Ns):
        raise ConfigError(f"ladder entries must be positive, got {Ns}")
    for a, b in zip(Ns, Ns[1:]):
        if b != 2 * a:
            raise ConfigError(f"ladder entries must double successively, got {Ns}")
    return Ns


def resolve_precision(spec, m: int, kind):
    """'auto' selects 50-digit arithmetic for smoothing order >= 4."""
    if isinstance(spec, str) and spec.strip().lower() == "auto":
        if SchemeKind.parse(kind) is not SchemeKind.PLAIN and m >= AUTO_EXTENDED_FROM_M:
            return Extended.from_digits(EXTENDED_DIGITS)
        return DOUBLE
    return get_precision(spec)


def _terminal(args):
    case, order, kind, N, P, prec = args
    op = laplacian_dirichlet(P, prec)
    traj = run(get_case(case).problem(), order, kind, N, op)
    return N, traj.u


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def max_workers() -> int:
    raw = os.environ.get("CQSTEP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"CQSTEP_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def terminal_states(case, order, kind, Ns, P=32, precision="double", workers=None) -> dict:
    """u^N at t = 1 for every N in Ns and 2 * Ns[-1], one run each."""
    Ns = check_ladder(Ns)
    prec = resolve_precision(precision, order.m, kind)
    needed = Ns + [2 * Ns[-1]] if Ns else []
    jobs = [(get_case(case), order, kind, N, P, prec) for N in needed]
    return dict(_map(_terminal, jobs, max_workers() if workers is None else workers)), prec


def errors_from_states(states: dict, Ns, op):
    out = []
    with op.prec:
        for N in Ns:
            out.append(float(op.prec.to_float(discrete_l2(states[N] - states[2 * N], op))))
    return out


def self_convergence(case, order: SchemeOrder, kind, Ns, P: int = 32, precision="double",
                     key=None, workers=None) -> ConvergenceTable:
    """One-row table of ||u^N - u^{2N}|| over the ladder."""
    kind = SchemeKind.parse(kind)
    Ns = check_ladder(Ns)
    row = convergence_row(case, order, kind, Ns, P, precision, key, workers)
    label = "k" if key == order.k and kind is SchemeKind.PLAIN else "m"
    return ConvergenceTable(Ns, [row], label)


def convergence_row(case, order, kind, Ns, P=32, precision="double", key=None, workers=None) -> TableRow:
    kind = SchemeKind.parse(kind)
    if not Ns:
        return TableRow(order.m if key is None else key, [], [], DOUBLE.eps)
    states, prec = terminal_states(case, order, kind, Ns, P, precision, workers)
    op = laplacian_dirichlet(P, prec)
    errs = errors_from_states(states, Ns, op)
    flags = [e < FLAG_FACTOR * prec.eps for e in errs]
    row = TableRow(order.m if key is None else key, errs, flags, prec.eps,
                   "double" if prec == DOUBLE else f"{prec.digits} digits")
    row.rate, row.rate_pair = row.finest_rate(Ns)
    return row


# --- experiments ------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    name: str
    case: str = "a"
    scheme: str = "corrected"
    k: tuple = (7,)
    m: tuple = (0,)
    beta: Fraction = Fraction(3)
    Ns: tuple = (100, 200, 400, 800, 1600)
    nodes: int = 32
    precision: str = "auto"
    out: str | None = None
    format: str = "markdown"

    @property
    def row_label(self) -> str:
        return "k" if len(self.k) > 1 else "m"

    def configurations(self):
        """(row key, SchemeOrder, kind) per table row."""
        kind = SchemeKind.parse(self.scheme)
        out = []
        if len(self.k) > 1 and len(self.m) > 1:
            raise ConfigError(f"[{self.name}] vary k or m, not both")
        for k in self.k:
            for m in self.m:
                if m > k:
                    raise ConfigError(f"[{self.name}] m={m} exceeds k={k}")
                # m = 0 of a smoothed or corrected table is the plain scheme
                row_kind = SchemeKind.PLAIN if m == 0 else kind
                order = SchemeOrder(k, m, self.beta)
                out.append((k if self.row_label == "k" else m, order, row_kind))
        return out


def run_experiment(exp: Experiment, workers=None, progress=None) -> ConvergenceTable:
    table = ConvergenceTable(list(check_ladder(exp.Ns)), [], exp.row_label, exp.name)
    for key, order, kind in exp.configurations():
        row = convergence_row(exp.case, order, kind, list(exp.Ns), exp.nodes, exp.precision, key, workers)
        table.rows.append(row)
        if progress is not None:
            progress(exp, row)
    return table


def _parse_list(raw, name) -> tuple:
    out = []
    for part in str(raw).replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out and name != "Ns":
        raise ConfigError(f"{name} must list at least one integer")
    return tuple(out)


def parse_ladder(raw) -> tuple:
    try:
        return tuple(check_ladder(_parse_list(raw, "Ns")))
    except ValueError as exc:
        raise ConfigError(f"bad N ladder {raw!r}: {exc}") from None


_KEYS = {"case", "scheme", "k", "m", "beta", "ns", "nodes", "precision", "out", "format"}


def experiment_from_section(name, sec, overrides=None) -> Experiment:
    data = {key.lower(): value for key, value in sec.items()}
    data.update({key.lower(): value for key, value in (overrides or {}).items() if value is not None})
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    try:
        exp = Experiment(
            name=name,
            case=get_case(data.get("case", "a")).id,
            scheme=SchemeKind.parse(data.get("scheme", "corrected")).value,
            k=_parse_list(data.get("k", "7"), "k"),
            m=_parse_list(data.get("m", "0"), "m"),
            beta=as_fraction(data.get("beta", "3")),
            Ns=parse_ladder(data.get("ns", "100,200,400,800,1600")),
            nodes=int(data.get("nodes", "32")),
            precision=str(data.get("precision", "auto")),
            out=data.get("out") or None,
            format=str(data.get("format", "markdown")).lower(),
        )
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[{name}] {exc}") from None
    if exp.format not in ("csv", "markdown"):
        raise ConfigError(f"[{name}] format must be csv or markdown, got {exp.format!r}")
    if exp.nodes < 4:
        raise ConfigError(f"[{name}] nodes must be >= 4, got {exp.nodes}")
    if not (exp.precision.lower() == "auto"):
        get_precision(exp.precision)
    exp.configurations()  # validates k, m, beta
    return exp


def load_config(text_or_path, overrides=None) -> list:
    """Experiments from an INI file (path) or INI text."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        if isinstance(text_or_path, str) and "\n" not in text_or_path and os.path.exists(text_or_path):
            with open(text_or_path) as fh:
                parser.read_file(fh)
        else:
            parser.read_string(str(text_or_path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse experiment file: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read experiment file: {exc}") from None
    if not parser.sections():
        raise ConfigError("experiment file has no sections")
    return [experiment_from_section(name, parser[name], overrides) for name in parser.sections()]


PRESETS = ("table2.1", "table2.2", "table6.1", "table6.3")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("cqstep.presets").joinpath(f"{name}.ini").read_text()


# --- rendering --------------------------------------------------------------


def _cell(row: TableRow, i: int) -> str:
    e = row.errors[i]
    return f"{e:.4e}" + ("*" if row.flags[i] else "")


def _rate_cell(row: TableRow) -> str:
    return "" if row.rate is None else f"{row.rate:.2f}"


def render(table: ConvergenceTable, fmt: str = "markdown") -> str:
    """Deterministic text rendering; '*' marks round-off flagged cells."""
    header = [table.row_label] + [f"N={N}" for N in table.Ns] + ["Rate"]
    body = [[str(r.key)] + [_cell(r, i) for i in range(len(table.Ns))] + [_rate_cell(r)] for r in table.rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt != "markdown":
        raise ConfigError(f"format must be csv or markdown, got {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(cells) + " |" for cells in body]
    return "\n".join(lines) + "\n"
