"""Command-line entry point.

Every command writes its artifacts into ``--out`` together with
``config.json``, the effective configuration after merging defaults, the
``--config`` file and explicit flags (flags win). Exit codes: 0 success,
2 invalid input, 3 resolution too coarse, 4 functional not evaluable. Errors
are reported as one JSON object on standard error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import artifacts
from .errors import DisconnectedError, NotEvaluable, ResolutionError, ValidationError
from .geometry import Cube, build_domain, default_window, DomainSpec
from .gridfield import MIN_CELLS_PER_SIDE, TestFunctionSpec, sample

EXIT_OK, EXIT_VALIDATION, EXIT_RESOLUTION, EXIT_NOT_EVALUABLE = 0, 2, 3, 4

COMMANDS = ("whitney", "norm", "omega", "gamma", "extend", "approximate", "check-eps-delta",
            "example", "oracle-compare")

DEFAULTS = {
    "domain": "square",
    "window": None,
    "resolution": None,
    "lambda": None,
    "out": "out",
    "seed": 0,
    "workers": None,
    "function": "coordinate",
    "function_params": {},
    # command specific
    "complement": False,
    "levels": None,
    "ts": None,
    "betas": None,
    "stage": "smooth",
    "c_n": None,
    "scheme": "lipschitz",
    "params": None,
    "eps": 0.1,
    "delta": None,
    "pairs": 200,
    "which": 1,
    "Ln": "constant",
    "counts": None,
    "functional": "bmo_norm",
    "t": None,
    "beta": None,
    "max_cells": 10_000_000,
    "average_mode": "geq",
}

# keys that never reach config.json: they cannot change any artifact
_NOT_ECHOED = {"workers", "config"}


class JsonErrorParser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", "argv", message)
        raise SystemExit(EXIT_VALIDATION)


def _emit_error(kind, field, message, extra=None):
    doc = {"error": kind, "field": field, "message": message}
    if extra:
        doc.update(extra)
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# parsing helpers


def parse_number(text, field="value") -> float:
    """A float from ``"0.25"``, ``"1/128"`` or ``"inf"``."""
    if isinstance(text, (int, float)):
        return float(text)
    try:
        t = str(text).strip()
        if t.lower() in ("inf", "infinity"):
            return math.inf
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError):
        raise ValidationError(field, f"not a number: {text!r}") from None


def parse_list(text, field):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [parse_number(v, field) for v in text]
    return [parse_number(v, field) for v in str(text).split(",") if v.strip()]


def parse_window(text):
    if text is None:
        return None
    if isinstance(text, dict):
        return Cube(tuple(float(v) for v in text["corner"]), float(text["side"]))
    vals = parse_list(text, "window")
    if len(vals) != 3 or not vals[2] > 0:
        raise ValidationError("window", "expected 'x0,y0,side' with side > 0")
    return Cube((vals[0], vals[1]), vals[2])


def parse_domain(value, window=None):
    """Domain from a kind name, inline JSON or a path to a JSON file."""
    if isinstance(value, dict):
        doc = dict(value)
    else:
        text = str(value).strip()
        if text.startswith("{"):
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValidationError("domain", f"bad inline JSON: {exc}") from None
        elif os.path.isfile(text):
            with open(text, encoding="utf-8") as fh:
                try:
                    doc = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ValidationError("domain", f"bad JSON in {text}: {exc}") from None
        else:
            doc = {"kind": text}
    if not isinstance(doc, dict):
        raise ValidationError("domain", "expected a JSON object")
    spec = DomainSpec.from_dict(doc)
    if window is None and "window" in doc:
        window = parse_window(doc["window"])
    window = default_window(spec) if window is None else window
    return spec, build_domain(spec, window)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError("config", f"bad JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("config", "expected a JSON object")
    doc = {k.replace("-", "_"): v for k, v in doc.items()}
    unknown = set(doc) - set(DEFAULTS) - {"command"}
    if unknown:
        raise ValidationError("config", f"unknown keys {sorted(unknown)}")
    return doc


def effective_config(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    file_cfg = _load_config(args.config)
    if "command" in file_cfg and file_cfg.pop("command") != args.command:
        raise ValidationError("config", "config file is for a different command")
    cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            cfg[k] = v
    cfg["command"] = args.command
    if cfg["lambda"] is None:
        cfg["lambda"] = _default_lambda(cfg)
    if cfg["resolution"] is None:
        cfg["resolution"] = "1/64"
    if isinstance(cfg["function_params"], str):
        try:
            cfg["function_params"] = json.loads(cfg["function_params"])
        except json.JSONDecodeError as exc:
            raise ValidationError("function_params", f"bad JSON: {exc}") from None
    return cfg


def _default_lambda(cfg):
    if cfg["command"] == "example":
        return 4.0 if int(cfg["which"]) == 1 else 2.0
    return 0.25


class Context:
    """Validated view of an effective configuration."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.h = parse_number(cfg["resolution"], "resolution")
        if not self.h > 0:
            raise ValidationError("resolution", "must be positive")
        self.lam = parse_number(cfg["lambda"], "lambda")
        self.seed = int(cfg["seed"])
        w = cfg["workers"]
        self.workers = int(w) if w is not None else (os.cpu_count() or 1)
        if self.workers < 1:
            raise ValidationError("workers", "must be >= 1")
        self.out = Path(cfg["out"])
        self._domain = None

    @property
    def domain(self):
        if self._domain is None:
            self.spec, self._domain = parse_domain(self.cfg["domain"], parse_window(self.cfg["window"]))
        return self._domain

    def check_lambda(self):
        D = self.domain
        if not (MIN_CELLS_PER_SIDE * self.h < self.lam < D.window.side):
            raise ValidationError("lambda", f"need {MIN_CELLS_PER_SIDE}h < lambda < window side "
                                            f"({MIN_CELLS_PER_SIDE * self.h:g}, {D.window.side:g})")

    def function(self, kind=None, params=None):
        kind = self.cfg["function"] if kind is None else kind
        params = dict(self.cfg["function_params"] if params is None else params)
        if kind == "random-whitney-step":
            params.setdefault("seed", self.seed)
        return sample(TestFunctionSpec(kind, params), self.domain, self.h)

    def path(self, name):
        return self.out / name

    def echo(self):
        self.out.mkdir(parents=True, exist_ok=True)
        doc = {k: v for k, v in self.cfg.items() if k not in _NOT_ECHOED}
        artifacts.write_json(self.path("config.json"), doc)


# ---------------------------------------------------------------------------
# commands


def cmd_whitney(ctx):
    from .whitney import check_invariants, match_cubes, whitney_decompose

    D = ctx.domain
    level = ctx.cfg["levels"]
    level = int(round(-math.log2(ctx.h))) if level is None else int(level)
    E = whitney_decompose(D, D.window, level, strict=False)
    decs = [E]
    summary = {"interior": {"cubes": len(E.cubes), "invariants": check_invariants(E, ctx.h, D)}}
    matching = None
    if ctx.cfg["complement"]:
        Ep = whitney_decompose(D.complement(), D.window, level, strict=False)
        decs.append(Ep)
        matching = match_cubes(Ep, E, ctx.lam)
        summary["exterior"] = {"cubes": len(Ep.cubes),
                               "invariants": check_invariants(Ep, ctx.h, D.complement())}
        summary["matching"] = {"pairs": len(matching.pairs), "unmatched": len(matching.unmatched),
                               "distance_constant": matching.distance_constant}
    artifacts.whitney_svg(ctx.path("whitney.svg"), decs, D, matching)
    artifacts.write_json(ctx.path("whitney.json"), summary)


def cmd_norm(ctx):
    from .oscillation import bmo_norm

    ctx.check_lambda()
    rep = bmo_norm(ctx.function(), ctx.domain, ctx.lam, average_mode=ctx.cfg["average_mode"])
    artifacts.write_json(ctx.path("norm.json"), rep.to_json())
    artifacts.write_csv(ctx.path("norm.csv"), "norm", rep.rows())


def cmd_omega(ctx):
    from .oscillation import omega

    f = ctx.function()
    ts = parse_list(ctx.cfg["ts"], "ts")
    if ts is None:
        top = ctx.domain.window.side
        ts = [MIN_CELLS_PER_SIDE * ctx.h * 2 ** k for k in range(1, 64)
              if MIN_CELLS_PER_SIDE * ctx.h * 2 ** k <= top]
    rows = []
    for t in ts:
        try:
            rows.append((t, omega(f, ctx.domain, t)))
        except NotEvaluable:
            rows.append((t, None))
    if all(v is None for _, v in rows):
        raise NotEvaluable("no cube fits below any requested t")
    artifacts.write_csv(ctx.path("omega.csv"), "omega", rows)


def cmd_gamma(ctx):
    from .oscillation import gamma_curve

    ctx.check_lambda()
    betas = parse_list(ctx.cfg["betas"], "betas")
    if betas is None:
        betas = [0.0] + [float(2 ** k) for k in range(int(math.log2(ctx.domain.window.side)))]
    curve = gamma_curve(ctx.function(), ctx.domain, betas, ctx.lam)
    if all(g is None for _, g in curve):
        raise NotEvaluable("gamma is not evaluable at any requested beta")
    artifacts.write_csv(ctx.path("gamma.csv"), "gamma", curve)


def cmd_extend(ctx):
    from .extension import extend_smooth, extend_step

    ctx.check_lambda()
    f = ctx.function()
    c_n = ctx.cfg["c_n"]
    if ctx.cfg["stage"] == "step":
        res = extend_step(f, ctx.domain, ctx.lam)
    elif ctx.cfg["stage"] == "smooth":
        res = extend_smooth(f, ctx.domain, ctx.lam,
                            c_n=None if c_n is None else parse_number(c_n, "c_n"), seed=ctx.seed)
    else:
        raise ValidationError("stage", "must be 'step' or 'smooth'")
    res.dump(ctx.path("extension.bmog"))
    artifacts.heatmap_svg(ctx.path("extension.svg"), res.extended, ctx.domain)


def cmd_approximate(ctx):
    from .approximation import approximation_driver

    ctx.check_lambda()
    params = parse_list(ctx.cfg["params"], "params")
    curve = approximation_driver(ctx.function(), ctx.domain, ctx.lam, ctx.cfg["scheme"], params,
                                 seed=ctx.seed)
    artifacts.write_csv(ctx.path("approx.csv"), "approx", curve.rows())


def cmd_check_eps_delta(ctx):
    from .epsdelta import scan_domain

    D = ctx.domain
    eps = parse_number(ctx.cfg["eps"], "eps")
    delta = ctx.cfg["delta"]
    if delta is None:
        if "delta" not in D.nominal:
            raise ValidationError("delta", f"no nominal delta for {D.name}; pass --delta")
        delta = D.nominal["delta"]
    else:
        delta = parse_number(delta, "delta")
    if not (0 < eps <= 1):
        raise ValidationError("eps", "must lie in (0, 1]")
    if not delta > 0:
        raise ValidationError("delta", "must be positive")
    res = scan_domain(D, eps, delta, int(ctx.cfg["pairs"]), ctx.seed, ctx.h, workers=ctx.workers)
    artifacts.write_csv(ctx.path("witness.csv"), "witness", [c.row() for c in res.witnesses])
    artifacts.write_csv(ctx.path("pairs.csv"), "witness", [c.row() for c in res.certificates])
    artifacts.cigars_svg(ctx.path("cigars.svg"), D, res.certificates)
    artifacts.write_json(ctx.path("scan.json"), {
        "eps": eps, "delta": delta, "h": ctx.h, "checked": res.checked, "failures": res.failures,
        "resolution_limited": res.resolution_limited, "failure_rate": res.failure_rate})


def cmd_example(ctx):
    from .experiments import example1, example2_row

    which = int(ctx.cfg["which"])
    counts = ctx.cfg["counts"]
    if which == 1:
        counts = [4, 8, 16] if counts is None else [int(c) for c in parse_list(counts, "counts")]
        if ctx.cfg["Ln"] not in ("constant", "log"):
            raise ValidationError("Ln", "must be 'constant' or 'log'")
        rows = example1(counts, ctx.cfg["Ln"], ctx.lam)
        artifacts.write_csv(ctx.path("example1.csv"), "example1", [r.row() for r in rows])
        artifacts.write_csv(ctx.path("log_probe.csv"), "log_probe", [(r.ell, r.ratio) for r in rows])
    elif which == 2:
        counts = [2, 4, 8] if counts is None else [int(c) for c in parse_list(counts, "counts")]
        rows, curves = [], []
        for n in counts:
            row, curve = example2_row(n, lam=ctx.lam)
            rows.append(row.row())
            curves.append(curve)
        artifacts.write_csv(ctx.path("example2.csv"), "example2", rows)
        artifacts.write_csv(ctx.path("gamma.csv"), "gamma", curves[-1])
    else:
        raise ValidationError("which", "must be 1 or 2")


def cmd_oracle_compare(ctx):
    from .oracle import exhaustive_sup

    functional = ctx.cfg["functional"]
    t = ctx.cfg["t"]
    beta = ctx.cfg["beta"]
    if functional != "omega":
        ctx.check_lambda()
    rep = exhaustive_sup(ctx.function(), ctx.domain, functional, lam=ctx.lam,
                         t=None if t is None else parse_number(t, "t"),
                         beta=None if beta is None else parse_number(beta, "beta"),
                         max_cells=int(ctx.cfg["max_cells"]), average_mode=ctx.cfg["average_mode"])
    artifacts.write_json(ctx.path("oracle.json"), rep.to_json())


HANDLERS = {
    "whitney": cmd_whitney,
    "norm": cmd_norm,
    "omega": cmd_omega,
    "gamma": cmd_gamma,
    "extend": cmd_extend,
    "approximate": cmd_approximate,
    "check-eps-delta": cmd_check_eps_delta,
    "example": cmd_example,
    "oracle-compare": cmd_oracle_compare,
}


# ---------------------------------------------------------------------------
# argument parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="JSON file of option values (flags take precedence)")
    g.add_argument("--domain", help="kind name, inline JSON or path to a domain JSON file")
    g.add_argument("--window", help="x0,y0,side of the computational window")
    g.add_argument("--resolution", help="grid spacing h, e.g. 1/128")
    g.add_argument("--lambda", dest="lambda", help="bmo scale")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int, help="worker processes (default: available cores)")
    g.add_argument("--function", help="test function kind")
    g.add_argument("--function-params", dest="function_params", help="test function parameters (JSON)")

    p = JsonErrorParser(prog="bmodomain", description="Discretized bmo computations on planar domains.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=JsonErrorParser)

    s = sub.add_parser("whitney", parents=[common], help="Whitney decomposition and SVG")
    s.add_argument("--levels", type=int, help="finest level (default log2(1/h))")
    s.add_argument("--complement", action="store_true", default=None,
                   help="also decompose the complement and draw the matching")

    s = sub.add_parser("norm", parents=[common], help="bmo_lambda norm report")
    s.add_argument("--average-mode", dest="average_mode", choices=("geq", "eq"))

    s = sub.add_parser("omega", parents=[common], help="modulus of mean oscillation curve")
    s.add_argument("--ts", help="comma-separated scales")

    s = sub.add_parser("gamma", parents=[common], help="gamma(f, beta) curve")
    s.add_argument("--betas", help="comma-separated radii")

    s = sub.add_parser("extend", parents=[common], help="extension across the boundary")
    s.add_argument("--stage", choices=("step", "smooth"))
    s.add_argument("--c-n", dest="c_n", help="averaging radius constant")

    s = sub.add_parser("approximate", parents=[common], help="approximation curve")
    s.add_argument("--scheme", choices=("boundary", "infinity", "bounded", "lipschitz", "compact"))
    s.add_argument("--params", help="comma-separated sequence parameters")

    s = sub.add_parser("check-eps-delta", parents=[common], help="(eps, delta) verifier scan")
    s.add_argument("--eps")
    s.add_argument("--delta")
    s.add_argument("--pairs", type=int)

    s = sub.add_parser("example", parents=[common], help="canned strip examples")
    s.add_argument("--which", type=int, choices=(1, 2))
    s.add_argument("--Ln", choices=("constant", "log"))
    s.add_argument("--counts", help="comma-separated strip counts")

    s = sub.add_parser("oracle-compare", parents=[common], help="exhaustive vs sampled sup")
    s.add_argument("--functional", choices=("bmo_norm", "omega", "gamma"))
    s.add_argument("--t")
    s.add_argument("--beta")
    s.add_argument("--max-cells", dest="max_cells", type=int)
    s.add_argument("--average-mode", dest="average_mode", choices=("geq", "eq"))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        ctx = Context(cfg)
        ctx.echo()
        HANDLERS[args.command](ctx)
    except ValidationError as exc:
        _emit_error("validation", exc.field, str(exc))
        return EXIT_VALIDATION
    except ResolutionError as exc:
        _emit_error("resolution", "resolution", str(exc), {"suggestion": exc.suggestion})
        return EXIT_RESOLUTION
    except DisconnectedError as exc:
        _emit_error("resolution", "resolution", str(exc))
        return EXIT_RESOLUTION
    except NotEvaluable as exc:
        _emit_error("not-evaluable", "family", str(exc))
        return EXIT_NOT_EVALUABLE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
