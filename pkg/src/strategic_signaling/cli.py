"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 invalid input or failed
assumption, 3 a verified bound does not hold.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import analysis, metrics, model, oracle, schemes
from .model import AssumptionError, ModelParams, ParameterError, UsageError

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
SIG = ".12g"

COMMANDS = ("validate", "scheme", "metrics", "verify", "sweep", "figures", "simulate")

DEFAULTS: Dict[str, Any] = {
    "p": None,
    "q": None,
    "delta": None,
    "revealing": False,
    "relaxed": False,
    "grid": None,
    "seed": 0,
    "n_students": 1_000_000,
    "resolution": 1e-3,
    "out": None,
    "format": None,
    "canonicalize": False,
    "tolerance": None,
    "full_grid": False,
    "oracle": False,
    "axis": "q",
    "with_q": [],
    "workers": 1,
}
TABULAR = ("sweep", "figures")


def _num(v) -> float:
    return float(format(v, SIG))


def _round(obj):
    """Round every float to 12 significant digits for printing."""
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else _num(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    return obj


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if isinstance(v, bool) else "-"
    if isinstance(v, float):
        return format(v, SIG)
    return str(v)


def _table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [list(headers)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _json(obj) -> str:
    return json.dumps(_round(obj), indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strategic-signaling",
        description="Optimal school signaling schemes, their metrics, bound checks and simulation.",
        argument_default=argparse.SUPPRESS,
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="TOML file with default flag values")
    common.add_argument("--p", type=float, help="prior probability of a qualified student")
    common.add_argument("--q", type=float, help="grade accuracy")
    common.add_argument("--delta", type=float, help="test accuracy (omit for no test)")
    common.add_argument("--canonicalize", action="store_true", help="relabel accuracies below 1/2")
    common.add_argument("--format", choices=("table", "json", "csv"))
    common.add_argument("--out", help="write output to this path instead of stdout")

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, argument_default=argparse.SUPPRESS)

    school = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    school.add_argument("--revealing", action="store_true", help="revealing instead of optimal school")
    school.add_argument("--strategic", dest="revealing", action="store_false", help="optimal school (default)")
    school.add_argument("--relaxed", action="store_true", help="use the relaxed-assumption construction")

    p = add("validate", "check the model assumptions")
    p.add_argument("--tolerance", type=float, help="report quantities within this distance of a boundary")

    p = sub.add_parser("scheme", parents=[common, school], help="print a signaling scheme",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--oracle", action="store_true", help="grid-search the optimum instead")
    p.add_argument("--resolution", type=float)
    p.add_argument("--full-grid", dest="full_grid", action="store_true")

    sub.add_parser("metrics", parents=[common, school], help="closed-form outcome metrics",
                   argument_default=argparse.SUPPRESS)

    p = add("verify", "check every bound on a grid; exit 3 on failure")
    p.add_argument("--grid", type=int)

    p = add("sweep", "metrics along q or delta")
    p.add_argument("--axis", choices=("q", "delta"))
    p.add_argument("--grid", type=int)

    p = add("figures", "utility and ratio table along q, with and without a test")
    p.add_argument("--grid", type=int)
    p.add_argument("--with-q", dest="with_q", type=float, action="append", help="extra q value (repeatable)")

    p = sub.add_parser("simulate", parents=[common, school], help="Monte Carlo check against closed forms",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--n-students", dest="n_students", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    return parser


def _load_config(path: str, command: str) -> Dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    section = data.pop(command, {}) if isinstance(data.get(command), dict) else {}
    flat = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    flat.update({k.replace("-", "_"): v for k, v in section.items()})
    unknown = set(flat) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return flat


def resolve(ns: argparse.Namespace) -> Dict[str, Any]:
    """Flags override the config file, which overrides defaults."""
    given = vars(ns).copy()
    command = given.pop("command")
    cfg = _load_config(given.pop("config"), command) if "config" in given else {}
    out = {**DEFAULTS, **cfg, **given, "command": command}
    if out["format"] is None:
        out["format"] = "csv" if command in TABULAR else "table"
    return out


def _params(cfg, need_q: bool = True, need_delta: bool = False) -> ModelParams:
    missing = [k for k, need in (("p", True), ("q", need_q), ("delta", need_delta)) if need and cfg[k] is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + m for m in missing))
    q = cfg["q"] if cfg["q"] is not None else 1.0
    build = ModelParams.canonical if cfg["canonicalize"] else ModelParams
    return build(cfg["p"], q, cfg["delta"])


def _scheme_for(cfg, params: ModelParams) -> schemes.SignalingScheme:
    if cfg["revealing"]:
        return schemes.revealing_scheme(schemes.Variant.for_params(params))
    return schemes.optimal_scheme(params, relaxed=cfg["relaxed"])


# -- commands -----------------------------------------------------------------

def cmd_validate(cfg):
    params = _params(cfg)
    rep = model.validate(params)
    payload = {"params": params.to_dict(), "report": rep.to_dict()}
    if cfg["tolerance"] is not None:
        payload["near_boundaries"] = model.near_boundaries(params, cfg["tolerance"])
    fails = rep.failures()
    if rep.a_relaxed:
        # the relaxed assumption is an accepted substitute for assumption 3
        fails = [f for f in fails if f[0] != "assumption 3"]
    payload["failures"] = [f"{name}: {msg}" for name, msg in fails]
    if cfg["format"] == "json":
        text = _json(payload)
    else:
        rows = [(k, v) for k, v in rep.to_dict().items() if v is not None]
        rows += [(f"near:{k}", v) for k, v in payload.get("near_boundaries", {}).items()]
        text = _table(("check", "value"), rows)
    code = EXIT_OK
    if fails:
        code = EXIT_USAGE
        for line in payload["failures"]:
            print("error: " + line, file=sys.stderr)
    return text, code


def cmd_scheme(cfg):
    params = _params(cfg)
    if cfg["oracle"]:
        scheme, util = oracle.brute_force_optimal(params, resolution=cfg["resolution"], full_grid=cfg["full_grid"])
        payload = {**scheme.to_dict(), "utility": util}
    else:
        scheme = _scheme_for(cfg, params)
        payload = scheme.to_dict()
    if cfg["format"] == "json":
        return _json(payload), EXIT_OK
    rows = [(c["g"], c.get("s"), c["accept_prob"]) for c in payload["cells"]]
    text = _table(("g", "s", "accept_prob"), rows)
    if "utility" in payload:
        text += f"utility {_fmt(payload['utility'])}\n"
    return text, EXIT_OK


def cmd_metrics(cfg):
    params = _params(cfg)
    if cfg["relaxed"] and not cfg["revealing"]:
        m = metrics.evaluate(params, schemes.optimal_scheme_relaxed(params))
    else:
        m = metrics.closed_form(params, strategic=not cfg["revealing"])
    if cfg["format"] == "json":
        return _json(m.to_dict()), EXIT_OK
    return _table(("metric", "value"), list(m.to_dict().items())), EXIT_OK


def _verify_checks(cfg) -> List[analysis.BoundCheck]:
    p = cfg["p"]
    if p is None:
        raise UsageError("missing required flag: --p")
    n = cfg["grid"]
    q_grid = None if n is None else np.linspace(1 - p, 1, n)
    checks = []
    checks += analysis.check_utility_comparison(p, q_grid)
    checks += analysis.check_fpr_fnr_comparison(p, q_grid)
    checks += analysis.check_monotonicity(p, None, q_grid)
    d = cfg["delta"]
    if d is not None:
        checks += [_tag(c, f"delta={d:g}") for c in analysis.check_monotonicity(p, d, q_grid)]
        fig = analysis.figure_data(p, d, q_grid)
        checks += [_tag(c, f"delta={d:g}") for c in analysis.check_figure_regimes(fig, p, d)]
    d_grid = np.linspace(1 - p, 1, n or 401)
    for q in ([cfg["q"]] if cfg["q"] is not None else []) + [1.0]:
        checks += [_tag(c, f"q={q:g}") for c in analysis.check_test_ratio_lemmas(p, q, d_grid)]
    return checks


def _tag(check: analysis.BoundCheck, label: str) -> analysis.BoundCheck:
    return analysis.BoundCheck(f"{check.name}[{label}]", check.margin, check.witness)


def cmd_verify(cfg):
    checks = _verify_checks(cfg)
    failed = [c for c in checks if not c.holds]
    if cfg["format"] == "json":
        text = _json([c.to_dict() for c in checks])
    else:
        rows = [
            (c.name, "ok" if c.holds else "FAIL", c.margin, " ".join(f"{k}={_fmt(v)}" for k, v in c.witness.items()))
            for c in checks
        ]
        text = _table(("check", "status", "margin", "witness"), rows)
    for c in failed:
        print(f"error: bound {c.name} fails with margin {_fmt(c.margin)}", file=sys.stderr)
    return text, EXIT_VERIFY if failed else EXIT_OK


def _emit_sweep(res: analysis.SweepResult, fmt: str) -> str:
    if fmt == "csv":
        return res.to_csv(SIG)
    if fmt == "json":
        return _json({"axis": res.axis, "warnings": res.warnings,
                      "rows": [dict(zip(res.columns, r)) for r in res.rows]})
    return _table(res.columns, res.rows)


def cmd_sweep(cfg):
    axis = cfg["axis"]
    params = _params(cfg, need_q=axis == "delta", need_delta=axis == "delta")
    n = cfg["grid"] or 101
    p = params.p
    if axis == "q":
        values = np.linspace(1 - p, 1, n)
    else:
        values = np.linspace(max(0.5, 1 - p), 1, n)
    res = analysis.metric_sweep(params, axis, values)
    return _emit_sweep(res, cfg["format"]), EXIT_OK


def cmd_figures(cfg):
    if cfg["p"] is None or cfg["delta"] is None:
        raise UsageError("figures needs --p and --delta")
    p, d = cfg["p"], cfg["delta"]
    n = cfg["grid"]
    extra = list(cfg["with_q"] or [])
    if n is None:
        res = analysis.figure_data(p, d, extra_q=extra)
    else:
        res = analysis.figure_data(p, d, analysis.figure_grid(p, n, extra))
    for w in res.warnings:
        print("warning: " + w, file=sys.stderr)
    return _emit_sweep(res, cfg["format"]), EXIT_OK


def cmd_simulate(cfg):
    params = _params(cfg)
    scheme = _scheme_for(cfg, params)
    conf = oracle.SimConfig(cfg["n_students"], cfg["seed"], scheme.variant, cfg["workers"])
    est = oracle.simulate(params, scheme, conf)
    exact = metrics.evaluate(params, scheme).to_dict()
    exact["utility"] = exact.pop("school_utility")
    z = {k: getattr(est, k).z(exact[k]) for k in oracle.SimEstimate.METRICS}
    if cfg["format"] == "json":
        return _json({"estimate": est.to_dict(), "exact": exact, "z": z}), EXIT_OK
    rows = [
        (k, exact[k], getattr(est, k).mean, getattr(est, k).stderr, z[k])
        for k in oracle.SimEstimate.METRICS
    ]
    text = _table(("metric", "exact", "estimate", "stderr", "z"), rows)
    text += f"students {est.n_students}, disobeyed signals {est.disobeyed}\n"
    return text, EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "scheme": cmd_scheme,
    "metrics": cmd_metrics,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "figures": cmd_figures,
    "simulate": cmd_simulate,
}


def _write(text: str, path: Optional[str], stdout) -> None:
    if path is None:
        stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = resolve(ns)
        if cfg["format"] == "csv" and cfg["command"] not in TABULAR:
            raise UsageError(f"--format csv is only available for {' and '.join(TABULAR)}")
        text, code = HANDLERS[cfg["command"]](cfg)
        _write(text, cfg["out"], stdout)
        return code
    except (ParameterError, AssumptionError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())
