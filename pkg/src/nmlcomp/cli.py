"""Command-line front end.

Exit status: 0 on success, 1 when a computation fails, 2 on configuration
errors (bad flags, unknown models, malformed config files).
"""

import argparse
import csv
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import _accel, __version__
from .cases import CASES, case_ids, verify_coarea
from .continuous import (
    CompReport,
    EstimatorPdfSource,
    comp_bruteforce_continuous,
    g_curve,
    lmc_gfunction,
    nml_code_length,
    select_model,
)
from .discrete import DiscreteCompResult, discrete_comp
from .errors import ConfigError, NmlcompError, NoClosedFormError
from .luckiness import Luckiness
from .models import ZOO, default_base, make_model, model_from_block, model_ids, param_schema
from .quadrature import QuadratureSpec

COMMANDS = ("comp", "nml", "select", "verify")
CONT_METHODS = ("gfunction", "brute", "both")
DISC_METHODS = ("all", "brute", "pushforward", "sufficient-stat")
THREADS_ENV = "NMLCOMP_THREADS"

CATALOG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["models"],
    "properties": {
        "models": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind", "schema"],
                "properties": {
                    "id": {"type": "string"},
                    "kind": {"enum": ["discrete", "continuous"]},
                    "schema": {"type": "object"},
                },
                "additionalProperties": False,
            },
        }
    },
    "additionalProperties": False,
}


# -- config ----------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    models: list = field(default_factory=list)
    luckiness: str = "one"
    method: Optional[str] = None
    source: str = "closed-form"
    quadrature: dict = field(default_factory=dict)
    base: Optional[float] = None
    data: Optional[str] = None
    case: Optional[str] = None
    output: Optional[str] = None
    curves: Optional[str] = None
    seed: int = 0

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"must be one of {list(COMMANDS)}", "command")
        if not isinstance(self.models, list):
            raise ConfigError("must be a list of model blocks", "models")
        for i, block in enumerate(self.models):
            if not isinstance(block, dict) or "id" not in block:
                raise ConfigError("model block needs an 'id'", f"models[{i}]")
            if block["id"] not in ZOO:
                raise ConfigError(f"unknown model: {block['id']}", f"models[{i}].id")
        if self.command in ("comp", "nml") and len(self.models) != 1:
            raise ConfigError(f"{self.command} takes exactly one model", "models")
        if self.command == "select" and len(self.models) < 1:
            raise ConfigError("select needs at least one model", "models")
        if self.command in ("nml", "select") and not self.data:
            raise ConfigError("a data file is required", "data")
        if self.command == "verify" and self.case not in (*case_ids(), "all"):
            raise ConfigError(f"unknown coarea case: {self.case}", "case")
        if self.method is not None and self.method not in CONT_METHODS + DISC_METHODS:
            raise ConfigError(f"unknown method {self.method!r}", "method")
        if self.source not in ("closed-form", "coarea-chart"):
            raise ConfigError("must be closed-form or coarea-chart", "source")
        if self.base is not None and not (isinstance(self.base, (int, float)) and self.base > 1):
            raise ConfigError("log base must be > 1", "base")
        self.quad_spec()
        Luckiness.parse(self.luckiness)
        return self

    def quad_spec(self):
        known = {f.name for f in fields(QuadratureSpec)}
        bad = sorted(set(self.quadrature) - known)
        if bad:
            raise ConfigError(f"unknown field(s) {bad}", "quadrature")
        try:
            return QuadratureSpec(**self.quadrature)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "quadrature") from None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", "$")
        known = {f.name for f in fields(cls)}
        bad = sorted(set(data) - known)
        if bad:
            raise ConfigError(f"unknown field(s) {bad}", "$")
        if "command" not in data:
            raise ConfigError("missing", "command")
        return cls(**data)


# -- serialization ---------------------------------------------------------------

def _clean(obj, diagnostics, path="$"):
    """JSON-safe copy: non-finite floats become strings, never NaN."""
    if isinstance(obj, dict):
        return {str(k): _clean(v, diagnostics, f"{path}.{k}") for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, diagnostics, f"{path}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            diagnostics.append(f"{path}: not a number")
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(report):
    diagnostics = list(report.get("diagnostics", []))
    body = _clean({k: v for k, v in report.items() if k != "diagnostics"}, diagnostics)
    body["diagnostics"] = diagnostics
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _table(rows):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def _fmt(x):
    if isinstance(x, str):
        return x
    if x is None:
        return "-"
    return "inf" if math.isinf(x) else f"{x:.10g}"


# -- commands --------------------------------------------------------------------

def _model(cfg, i=0):
    block = {k: v for k, v in cfg.models[i].items() if k != "luckiness"}
    return model_from_block(block)


def _luckiness(cfg, i=0):
    return Luckiness.parse(cfg.models[i].get("luckiness", cfg.luckiness) if cfg.models else cfg.luckiness)


def compute_comp(model, v, method, source, quad, base, truncation=None):
    """Complexity reports keyed by method name."""
    if model.discrete:
        methods = ("brute", "pushforward", "sufficient-stat") if method in (None, "all") else (method,)
        if any(m not in DISC_METHODS for m in methods):
            raise ConfigError(f"method {method!r} does not apply to discrete models", "method")
        if "sufficient-stat" in methods and not model.has_sufficient_stat:
            methods = tuple(m for m in methods if m != "sufficient-stat")
        return {"discrete": discrete_comp(model, v, methods, base=base)}
    method = method or "both"
    if method not in CONT_METHODS:
        raise ConfigError(f"method {method!r} does not apply to continuous models", "method")
    out = {}
    if method in ("gfunction", "both"):
        try:
            out["gfunction"] = lmc_gfunction(model, v, EstimatorPdfSource(source), base=base)
        except NoClosedFormError:
            if method == "gfunction":
                raise
    if method in ("brute", "both"):
        data_quad = None if quad == QuadratureSpec() else quad
        out["brute"] = comp_bruteforce_continuous(model, v, data_quad, base=base)
    if "gfunction" in out and "brute" in out and out["gfunction"].finite and out["brute"].finite:
        g, b = out["gfunction"], out["brute"]
        g.residual = b.residual = abs(g.value - b.value) / max(b.value, 1e-300)
    return out


def _comp_for_nml(reports):
    if "discrete" in reports:
        return reports["discrete"]
    return reports.get("gfunction") or reports["brute"]


def _report_rows(reports):
    rows = [("method", "comp", "log_comp", "error", "residual")]
    for name, r in reports.items():
        if isinstance(r, DiscreteCompResult):
            for m, val in r.values.items():
                rows.append((m, _fmt(float(val)), _fmt(r.log_comp), "0 (exact)", _fmt(r.discrepancy)))
        else:
            rows.append((name, _fmt(r.value), _fmt(r.log_value), _fmt(r.error_estimate), _fmt(r.residual)))
    return rows


def _reports_json(reports):
    return {k: r.to_dict() for k, r in reports.items()}


def cmd_comp(cfg, out):
    model = _model(cfg)
    v = _luckiness(cfg)
    base = cfg.base or default_base(model)
    reports = compute_comp(model, v, cfg.method, cfg.source, cfg.quad_spec(), base)
    report = {"command": "comp", "config": cfg.to_dict(), "result": _reports_json(reports)}
    report["diagnostics"] = [r.diagnostic for r in reports.values()
                             if isinstance(r, CompReport) and r.diagnostic]
    if cfg.curves:
        if model.discrete:
            raise ConfigError("curves exist only for continuous models", "curves")
        rows = g_curve(model, v)
        with open(cfg.curves, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "g"])
            for t, g in rows:
                w.writerow([repr(float(t)), repr(float(g))])
    out.append(_table(_report_rows(reports)))
    return report


def read_data(path, D=None):
    """CSV, one data point per row; blank lines and lines starting with # are skipped."""
    rows = []
    try:
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    raise ConfigError(f"line {lineno}: non-numeric entry", "data") from None
    except OSError as exc:
        raise ConfigError(str(exc), "data") from None
    if not rows:
        raise ConfigError("no data rows", "data")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("rows have different lengths", "data")
    X = np.array(rows)
    if D is not None and X.shape[1] != D:
        raise ConfigError(f"expected {D} columns, got {X.shape[1]}", "data")
    return X


def _as_point(model, row):
    return tuple(int(v) for v in row) if model.discrete else row


def cmd_nml(cfg, out):
    model = _model(cfg)
    v = _luckiness(cfg)
    base = cfg.base or default_base(model)
    X = read_data(cfg.data, model.D)
    reports = compute_comp(model, v, cfg.method, cfg.source, cfg.quad_spec(), base)
    comp = _comp_for_nml(reports)
    results = [nml_code_length(model, _as_point(model, row) if model.discrete else row, comp, base)
               for row in X]
    rows = [("row", "l_ML", "log_comp", "l_NML")]
    rows += [(i, _fmt(r.l_ML), _fmt(r.log_comp), _fmt(r.l_NML)) for i, r in enumerate(results)]
    out.append(_table(rows))
    return {"command": "nml", "config": cfg.to_dict(), "comp": _reports_json(reports),
            "result": [r.to_dict() for r in results]}


def cmd_select(cfg, out):
    X = read_data(cfg.data)
    candidates, comps = [], []
    for i in range(len(cfg.models)):
        model = _model(cfg, i)
        if model.D != X.shape[1]:
            raise ConfigError(f"model expects {model.D} columns, data has {X.shape[1]}", f"models[{i}]")
        base = cfg.base or default_base(model)
        reports = compute_comp(model, _luckiness(cfg, i), cfg.method, cfg.source, cfg.quad_spec(), base)
        comp = _comp_for_nml(reports)
        candidates.append((model, comp))
        comps.append({"model": model.describe(), "comp": comp.value, "luckiness": _luckiness(cfg, i).ident})
    base = cfg.base or (2.0 if all(m.discrete for m, _ in candidates) else math.e)
    picks = []
    rows = [("row", "selected", "l_NML per candidate")]
    for r, row in enumerate(X):
        points = [_as_point(m, row) for m, _ in candidates]
        lengths = [nml_code_length(m, p, c, base).l_NML for (m, c), p in zip(candidates, points)]
        idx = select_model(candidates, points, base)
        picks.append({"row": r, "selected": idx, "l_NML": lengths})
        rows.append((r, f"{idx} ({candidates[idx][0].id})", ", ".join(_fmt(l) for l in lengths)))
    out.append(_table(rows))
    return {"command": "select", "config": cfg.to_dict(), "candidates": comps, "base": base,
            "result": picks}


def cmd_verify(cfg, out):
    names = case_ids() if cfg.case == "all" else [cfg.case]
    reports = [verify_coarea(n) for n in names]
    rows = [("case", "lhs", "rhs", "rel_residual", "tolerance", "passed")]
    for r in reports:
        rows.append((r.case, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.rel_residual),
                     "negative" if r.kind == "negative" else _fmt(r.tolerance), str(r.passed).lower()))
    out.append(_table(rows))
    report = {"command": "verify", "config": cfg.to_dict(),
              "result": [r.to_dict() for r in reports]}
    report["all_passed"] = all(r.passed for r in reports)
    return report


def catalog():
    return {"models": [
        {"id": mid, "kind": "discrete" if ZOO[mid][0].discrete else "continuous",
         "schema": param_schema(mid)}
        for mid in model_ids()]}


# -- argument parsing -------------------------------------------------------------

def _model_flags(p, repeat=False):
    if repeat:
        p.add_argument("--model", action="append",
                       help="zoo model id; repeat for each candidate (size flags are shared)")
    else:
        p.add_argument("--model", help="zoo model id")
    p.add_argument("--N", type=int, help="sample size")
    p.add_argument("--m", type=int, help="number of categories (multinomial)")
    p.add_argument("--a", type=float, help="lower clamp (exponential-clamped)")
    p.add_argument("--b", type=float, help="upper clamp (exponential-clamped)")
    p.add_argument("--truncation", type=float, help="data-box truncation")


def _common_flags(p):
    p.add_argument("--config", help="RunConfig JSON file; flags given on the command line override it")
    p.add_argument("--luckiness", help="one | box:lo,hi")
    p.add_argument("--method", help="gfunction|brute|both (continuous), all|brute|pushforward|sufficient-stat (discrete)")
    p.add_argument("--source", choices=("closed-form", "coarea-chart"), help="estimator density source")
    p.add_argument("--base", type=float, help="logarithm base (default 2 discrete, e continuous)")
    p.add_argument("--quad-method", dest="quad_method", choices=("grid", "adaptive-1d", "iterated", "qmc", "auto"))
    p.add_argument("--resolution", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o", help="write the JSON report here ('-' for stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="nmlcomp", description="NML code lengths and model complexity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("comp", help="model complexity")
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--emit-curves", dest="curves", help="CSV of (theta, g(theta))")
    p = sub.add_parser("nml", help="NML code length of each data row")
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--data", help="CSV file, one data point per row")
    p = sub.add_parser("select", help="pick the model with the shortest NML code")
    _model_flags(p, repeat=True)
    _common_flags(p)
    p.add_argument("--data", help="CSV file, one data point per row")
    p = sub.add_parser("verify", help="coarea identity checks")
    p.add_argument("--case", default="all", help=f"one of {', '.join(CASES)} or all")
    p.add_argument("--config")
    p.add_argument("--output", "-o")
    p = sub.add_parser("list-models", help="zoo catalog")
    p.add_argument("--schema", action="store_true", help="print the catalog's JSON schema instead")
    p.add_argument("--output", "-o")
    return parser


def config_from_args(args):
    base = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(str(exc), "config") from None
        if isinstance(base, dict) and "command" not in base:
            base = {**base, "command": args.command}
    cfg = RunConfig.from_dict(base or {"command": args.command})
    cfg.command = args.command
    if getattr(args, "model", None):
        shared = {key: getattr(args, key) for key in ("N", "m", "a", "b", "truncation")
                  if getattr(args, key, None) is not None}
        ids = args.model if isinstance(args.model, list) else [args.model]
        cfg.models = [{"id": mid, **shared} for mid in ids]
    for key in ("luckiness", "method", "source", "base", "seed", "data", "case", "output", "curves"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    quad = dict(cfg.quadrature)
    for flag, key in (("quad_method", "method"), ("resolution", "resolution"),
                      ("tolerance", "tolerance"), ("budget", "budget")):
        val = getattr(args, flag, None)
        if val is not None:
            quad[key] = val
    if getattr(args, "seed", None) is not None:
        quad["seed"] = args.seed
    cfg.quadrature = quad
    return cfg.validate()


def _emit(report, output, stdout):
    text = dumps(report)
    if output == "-":
        stdout.write(text)
    elif output:
        with open(output, "w") as fh:
            fh.write(text)


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            _accel.set_num_threads(int(threads))
        except ValueError:
            stderr.write(f"error: {THREADS_ENV} must be an integer\n")
            return 2
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "list-models":
        payload = CATALOG_SCHEMA if args.schema else catalog()
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        if args.output and args.output != "-":
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            stdout.write(text)
        return 0

    output = getattr(args, "output", None)
    try:
        cfg = config_from_args(args)
        output = cfg.output
        lines = []
        handler = {"comp": cmd_comp, "nml": cmd_nml, "select": cmd_select, "verify": cmd_verify}
        report = handler[cfg.command](cfg, lines)
    except ConfigError as exc:
        stderr.write(f"error: {exc}\n")
        _emit({"error": {"code": exc.code, "message": str(exc)}}, output, stdout)
        return 2
    except (NmlcompError, ValueError, ArithmeticError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        stderr.write(f"error: {code}: {exc}\n")
        _emit({"error": {"code": code, "message": str(exc)}}, output, stdout)
        return 1
    if output != "-":
        stdout.write("\n".join(lines) + "\n")
    _emit(report, output, stdout)
    if cfg.command == "verify" and not report["all_passed"]:
        return 1
    return 0


def main_entry():
    sys.exit(main())
