"""Command-line driver: ``movavg <command> [--config FILE] [flags]``.

Settings resolve as built-in defaults, then the YAML config file, then
flags given on the command line.  Every run writes one JSON summary (with
the resolved configuration and the tool version) and optional CSV tables to
the output directory, and prints the summary to stdout.

Exit status: 0 success, 2 a checked invariant failed, 3 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import yaml

from . import __version__, _kernels
from .averaging import (
    composition_defect,
    continuous_box_average,
    convergence_experiment,
    discrete_box_average,
    maximal_average,
    tensor_midpoint,
)
from .cone_geometry import (
    DEFAULT_ALPHAS,
    InsufficientPrefix,
    condition_verdict,
    coverage_bound,
    cross_section,
    explicit_family,
    generate_family,
    geometric_grid,
)
from .exact import ExactScalar, as_exact, exact_sqrt
from .reports import default_out_dir, dumps, write_csv, write_json
from .submanifold import (
    PRIMES,
    DependentDirections,
    TowerDoesNotFit,
    flat_piece,
    genericity_failure_experiment,
)
from .sweepout import NoWitness, build_counterexample_set, oscillation_scan, ratio_check, sweepout_plan
from .systems import (
    Character,
    Indicator,
    TrigPoly,
    UncertifiableParameters,
    canonical_suspension,
    make_system,
)
from .torus_sets import TorusSet
from .towers import (
    RationalRotation,
    UnachievableCoverage,
    WrapViolation,
    product_tower,
    rotation_tower,
    suspension_tower,
    verify_tower,
)

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 2, 3

COMMANDS = ("cones", "verdict", "average", "converge", "tower", "sweepout", "submanifold")

# per-command defaults; every key here is also a flag
DEFAULTS = {
    "cones": {"family": "linear:r=1", "K": 1000, "axis": 1, "alphas": None, "lambdas": None, "entries": None,
              "mode": "discrete"},
    "verdict": {"family": "linear:r=1", "K": 2000, "axis": 1, "alphas": None, "lambdas": None, "entries": None,
                "mode": "discrete"},
    "average": {"system": None, "theta": None, "observable": None, "point": None, "box": None, "family": None,
                "K": None, "window": None, "method": "auto", "h_box": None},
    "converge": {"system": None, "theta": "golden", "observable": None, "family": "linear:r=1", "K": 10000,
                 "samples": 100, "override": False, "max_deviation": None},
    "tower": {"theta": None, "thetas": None, "N": None, "delta": None, "strict": False, "gamma": None, "a": None,
              "L": None, "spot_checks": 10000},
    "sweepout": {"family": "squares_unit", "K": 1000, "axis": 1, "p": 1, "theta": "golden", "thetas": None,
                 "pad": True, "eps": "1/20", "samples": 1000, "scan_K": None, "lambdas": None},
    "submanifold": {"u": ["1", "0"], "V": [["0", "1"]], "vol": None, "eps": "1/10", "p": None, "samples": 64,
                    "tol": 0.02, "margin": 0.5},
}
COMMON = {"seed": 0, "threads": None, "out": None}


class ConfigError(Exception):
    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        where = f"{source}:{line}: " if source and line else (f"{source}: " if source else "")
        super().__init__(where + message)


# -- configuration -----------------------------------------------------------


def load_config(path: str) -> tuple[dict, dict]:
    """YAML mapping and the line number of each top-level key."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path) from exc
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", path,
                          mark.line + 1 if mark is not None else None) from exc
    if data is None:
        return {}, {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path, 1)
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, _ in node.value:
            lines[key_node.value] = key_node.start_mark.line + 1
    return data, lines


def _yaml_value(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse flag value {text!r}: {exc}") from exc


def resolve(command: str, args: argparse.Namespace) -> tuple[dict, dict, str | None]:
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[command])
    lines: dict = {}
    source = None
    if args.config:
        data, lines = load_config(args.config)
        source = args.config
        data = dict(data)
        section = data.pop(command, None)
        if isinstance(section, dict):
            data.update(section)
        data.pop("command", None)
        for key in list(data):
            if key in COMMANDS:
                data.pop(key)
        for key, value in data.items():
            if key not in cfg:
                raise ConfigError(f"unknown key {key!r} for command {command!r}", source, lines.get(key))
            cfg[key] = value
    for key in cfg:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg, lines, source


def _fail(msg: str, key: str, ctx) -> ConfigError:
    _, lines, source = ctx
    return ConfigError(f"{key}: {msg}", source, lines.get(key))


# -- input parsing -----------------------------------------------------------


def _family(cfg, ctx):
    try:
        if cfg.get("entries"):
            return explicit_family(cfg["entries"], cfg.get("mode") or "discrete")
        return generate_family(str(cfg["family"]), int(cfg["K"]))
    except (ValueError, TypeError) as exc:
        raise _fail(str(exc), "family", ctx) from exc


def _system(cfg, ctx, m_hint: int = 1):
    spec = cfg.get("system")
    try:
        if spec:
            return make_system(spec if isinstance(spec, dict) else _yaml_value(spec))
        if cfg.get("thetas"):
            return make_system({"kind": "product_rotation", "thetas": cfg["thetas"]})
        if cfg.get("theta"):
            return make_system({"kind": "rotation", "theta": str(cfg["theta"])})
    except (UncertifiableParameters, KeyError, TypeError, ValueError) as exc:
        raise _fail(str(exc), "system", ctx) from exc
    raise _fail("no system given (use system or theta)", "system", ctx)


def _observable(spec, m: int, ctx):
    if spec is None:
        return Indicator(TorusSet.box(*([(0, "1/2")] * m)))
    if isinstance(spec, str):
        spec = _yaml_value(spec)
    try:
        kind = spec["type"]
        if kind == "character":
            return Character(tuple(spec["freq"]))
        if kind == "indicator":
            if "interval" in spec:
                lo, hi = spec["interval"]
                return Indicator(TorusSet.interval(str(lo), str(hi)))
            boxes = [[(str(a), str(b)) for a, b in box] for box in spec["boxes"]]
            return Indicator(TorusSet(len(boxes[0]), boxes))
        if kind == "trigpoly":
            return TrigPoly(tuple((tuple(f), complex(c)) for f, c in spec["terms"]))
        if kind == "constant":
            return TrigPoly.constant(complex(spec["value"]), m)
    except (KeyError, TypeError, ValueError) as exc:
        raise _fail(f"bad observable: {exc}", "observable", ctx) from exc
    raise _fail(f"unknown observable type {kind!r}", "observable", ctx)


def _fractions(values, key, ctx):
    if values is None:
        return None
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    try:
        return [Fraction(str(v).strip()) for v in values]
    except (ValueError, ZeroDivisionError) as exc:
        raise _fail(f"not a list of rationals: {exc}", key, ctx) from exc


def _int_list(values, key, ctx):
    if values is None:
        return None
    if isinstance(values, (int, str)):
        values = [v for v in str(values).split(",") if v.strip()]
    try:
        return [int(v) for v in values]
    except ValueError as exc:
        raise _fail(f"not a list of integers: {exc}", key, ctx) from exc


def _str_list(values):
    if isinstance(values, str):
        return [v.strip() for v in values.split(",") if v.strip()]
    return [str(v) for v in values]


# -- commands ----------------------------------------------------------------


def cmd_cones(cfg, ctx):
    fam = _family(cfg, ctx)
    axis = int(cfg["axis"])
    alphas = _fractions(cfg["alphas"], "alphas", ctx) or list(DEFAULT_ALPHAS)
    lambdas = _fractions(cfg["lambdas"], "lambdas", ctx)
    if lambdas is None:
        bound = coverage_bound(fam, axis)
        top = 1024 if bound == float("inf") else min(1024, bound - 1)
        lambdas = geometric_grid(1, max(top, 1))
    rows, sections = [], []
    for a in alphas:
        for lam in lambdas:
            cs = cross_section(fam, axis, a, lam)
            rows.append([str(a), str(lam), str(cs.size), repr(cs.ratio())])
            sections.append({"alpha": a, "lambda": lam, "size": cs.size, "intervals": len(cs.intervals)})
    summary = {"family": fam.describe(), "axis": axis, "sections": sections}
    return summary, {"cones.csv": (["alpha", "lambda", "size", "ratio"], rows)}


def cmd_verdict(cfg, ctx):
    fam = _family(cfg, ctx)
    alphas = _fractions(cfg["alphas"], "alphas", ctx) or list(DEFAULT_ALPHAS)
    lambdas = _fractions(cfg["lambdas"], "lambdas", ctx)
    try:
        v = condition_verdict(fam, int(cfg["axis"]), alphas, lambdas)
    except InsufficientPrefix as exc:
        raise _fail(str(exc), "K", ctx) from exc
    summary = {"family": fam.describe(), **v.to_json()}
    return summary, {"verdict.csv": (["alpha", "lambda", "size", "ratio"], v.csv_rows())}


def cmd_average(cfg, ctx):
    system = _system(cfg, ctx)
    obs = _observable(cfg["observable"], system.m, ctx)
    point = cfg["point"] if cfg["point"] is not None else [0] * system.m
    if isinstance(point, str):
        point = _yaml_value(point)
    point = [float(Fraction(str(v))) for v in (point if isinstance(point, list) else [point])]
    out = {"system": system.describe()}
    if cfg["family"]:
        fam = _family({"family": cfg["family"], "K": cfg["K"] or 100, "entries": None}, ctx)
        window = _int_list(cfg["window"], "window", ctx) or [1, fam.K]
        val, k = maximal_average(system, obs, point, fam, tuple(window))
        out.update({"maximal_average": val, "argmax_k": k, "window": window})
        return out, {}
    box = cfg["box"]
    if isinstance(box, str):
        box = _yaml_value(box)
    if not box:
        raise _fail("give a box [[corner...], [lengths...]] or a family", "box", ctx)
    if system.is_discrete:
        box = ([int(v) for v in box[0]], [int(v) for v in box[1]])
        out["average"] = discrete_box_average(system, obs, point, box)
        if cfg["h_box"]:
            hb = cfg["h_box"] if not isinstance(cfg["h_box"], str) else _yaml_value(cfg["h_box"])
            rep = composition_defect(system, obs, point, box, ([int(v) for v in hb[0]], [int(v) for v in hb[1]]))
            out["composition"] = rep.to_json()
            if rep.defect > rep.bound + 1e-12:
                out["failure"] = "composition defect exceeds its bound"
    else:
        if cfg["method"] == "quadrature":
            fbox = ([float(Fraction(str(v))) for v in box[0]], [float(Fraction(str(v))) for v in box[1]])
            out["average"] = tensor_midpoint(system, obs, point, fbox).to_json()
        else:
            ebox = ([str(v) for v in box[0]], [str(v) for v in box[1]])
            val = continuous_box_average(system, obs, point, ebox, method=cfg["method"])
            out["average"] = val
            if isinstance(val, ExactScalar):
                out["average_float"] = float(val)
    return out, {}


def cmd_converge(cfg, ctx):
    system = _system(cfg, ctx)
    obs = _observable(cfg["observable"], system.m, ctx)
    fam = _family({"family": cfg["family"], "K": cfg["K"], "entries": None}, ctx)
    rep = convergence_experiment(system, obs, fam, int(cfg["samples"]), int(cfg["seed"]),
                                 override=bool(cfg["override"]))
    out = {"system": system.describe(), "family": fam.describe(), **rep.to_json()}
    if cfg["max_deviation"] is not None and rep.final_deviation > float(Fraction(str(cfg["max_deviation"]))):
        out["failure"] = "final deviation above max_deviation"
    return out, {"converge.csv": (["k", "deviation", "argmax_sample"], rep.csv_rows())}


def cmd_tower(cfg, ctx):
    try:
        if cfg["gamma"] is not None:
            a = _str_list(cfg["a"] or [])
            system = canonical_suspension(str(cfg["gamma"]), a)
            L = _str_list(cfg["L"] or [])
            tower = suspension_tower(system, L)
        elif cfg["thetas"]:
            Ns = _int_list(cfg["N"], "N", ctx)
            tower = product_tower(_str_list(cfg["thetas"]), Ns, None if cfg["delta"] is None else str(cfg["delta"]),
                                  strict=bool(cfg["strict"]))
        else:
            if cfg["theta"] is None or cfg["N"] is None:
                raise _fail("give theta and N (or thetas, or gamma/a/L)", "theta", ctx)
            N = _int_list(cfg["N"], "N", ctx)[0]
            tower = rotation_tower(str(cfg["theta"]), N, None if cfg["delta"] is None else str(cfg["delta"]),
                                   strict=bool(cfg["strict"]))
    except (RationalRotation, UncertifiableParameters, WrapViolation, UnachievableCoverage) as exc:
        raise _fail(str(exc), "theta", ctx) from exc
    rep = verify_tower(tower, spot_checks=int(cfg["spot_checks"]), seed=int(cfg["seed"]))
    out = {"tower": tower.to_json(), "verification": rep.to_json()}
    if not rep.disjoint:
        out["failure"] = "tower verification failed"
    return out, {}


def cmd_sweepout(cfg, ctx):
    fam = _family({"family": cfg["family"], "K": cfg["K"], "entries": None}, ctx)
    lambdas = _int_list(cfg["lambdas"], "lambdas", ctx)
    try:
        plan = sweepout_plan(fam, int(cfg["axis"]), int(cfg["p"]), bool(cfg["pad"]), lambdas)
    except NoWitness as exc:
        raise _fail(str(exc), "K", ctx) from exc
    out = {"family": fam.describe(), "plan": plan.to_json()}
    tables = {}
    eps = float(Fraction(str(cfg["eps"])))
    if plan.mode == "discrete":
        d = fam.d
        thetas = _str_list(cfg["thetas"]) if cfg["thetas"] else [str(cfg["theta"])] * d
        if len(thetas) != d:
            raise _fail(f"need {d} rotation angles", "thetas", ctx)
        heights = [h * (1 if i == plan.axis - 1 else 3) for i, h in enumerate(plan.heights)]
        try:
            tower = product_tower(thetas, heights)
        except (RationalRotation, UncertifiableParameters) as exc:
            raise _fail(str(exc), "theta", ctx) from exc
        rep_t = verify_tower(tower)
        sets = build_counterexample_set(plan, tower)
        ratio = ratio_check(sets, fam, eps=eps, seed=int(cfg["seed"]))
        scan_K = int(cfg["scan_K"] or min(fam.K, 4 * plan.K))
        osc = oscillation_scan(tower.system, sets.H, fam.prefix(scan_K), int(cfg["samples"]), (1, plan.K),
                               int(cfg["seed"]), eps)
        out.update({"tower": tower.to_json(), "tower_verification": rep_t.to_json(), "sets": sets.to_json(),
                    "ratio": ratio, "oscillation": osc})
        ok = rep_t.disjoint and ratio["ratio_ge_bound"] and ratio["mu_H_formula_holds"] and ratio.get("containment", True)
    else:
        L1 = plan.heights[0]
        rest = [3 * h for h in plan.heights[1:]]
        gamma = 1 / max(as_exact(v).to_fraction() for v in [L1] + rest)
        system = canonical_suspension(gamma, [exact_sqrt(q) * gamma for q in PRIMES[: fam.d]])
        tower = suspension_tower(system, [L1] + rest)
        sets = build_counterexample_set(plan, tower)
        ratio = ratio_check(sets, fam)
        out.update({"tower": tower.to_json(), "sets": sets.to_json(), "ratio": ratio})
        ok = ratio["ratio_ge_bound"] and ratio["mu_H_formula_holds"]
    if not ok:
        out["failure"] = "ratio bound, measure formula or containment failed"
    return out, tables


def cmd_submanifold(cfg, ctx):
    V = cfg["V"] if not isinstance(cfg["V"], str) else _yaml_value(cfg["V"])
    u = cfg["u"] if not isinstance(cfg["u"], str) else _yaml_value(cfg["u"])
    try:
        piece = flat_piece([str(v) for v in u], [[str(v) for v in col] for col in V],
                           None if cfg["vol"] is None else str(cfg["vol"]))
    except (DependentDirections, ValueError, TypeError) as exc:
        raise _fail(str(exc), "V", ctx) from exc
    try:
        rep = genericity_failure_experiment(piece, as_exact(str(cfg["eps"])), p=cfg["p"] and int(cfg["p"]),
                                            samples=int(cfg["samples"]), seed=int(cfg["seed"]),
                                            tol=float(cfg["tol"]), margin=float(cfg["margin"]))
    except TowerDoesNotFit as exc:
        raise _fail(str(exc), "p", ctx) from exc
    out = {"piece": piece.to_json(), **rep.to_json()}
    if not rep.success:
        out["failure"] = "no contradiction witnessed"
    return out, {"submanifold.csv": (["t", "sample", "average"], rep.rows)}


HANDLERS = {
    "cones": cmd_cones,
    "verdict": cmd_verdict,
    "average": cmd_average,
    "converge": cmd_converge,
    "tower": cmd_tower,
    "sweepout": cmd_sweepout,
    "submanifold": cmd_submanifold,
}


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--out", help="output directory (default $MOVAVG_OUT or ./movavg_out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    parser = argparse.ArgumentParser(prog="movavg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"movavg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        for key, default in DEFAULTS[name].items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
            else:
                p.add_argument(flag, dest=key, type=_yaml_value if key in ("system", "observable", "box", "h_box",
                                                                            "u", "V", "entries") else str,
                               default=None)
    return parser


def _coerce_ints(cfg: dict) -> None:
    for key in ("K", "axis", "p", "samples", "seed", "threads", "spot_checks", "scan_K"):
        if isinstance(cfg.get(key), str):
            cfg[key] = int(cfg[key])


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        cfg, lines, source = resolve(command, args)
        try:
            _coerce_ints(cfg)
        except ValueError as exc:
            raise ConfigError(f"expected an integer: {exc}", source) from exc
        _kernels.set_threads(cfg.get("threads"))
        summary, tables = HANDLERS[command](cfg, (cfg, lines, source))
    except (ConfigError, UncertifiableParameters, InsufficientPrefix, NoWitness, ValueError) as exc:
        print(f"movavg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(cfg["out"]) if cfg.get("out") else default_out_dir()
    resolved = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    report = {"command": command, "version": __version__, "config": resolved, "result": summary}
    write_json(out_dir / f"{command}.json", report)
    for name, (header, rows) in tables.items():
        write_csv(out_dir / name, header, rows)
    sys.stdout.write(dumps(report))
    if "failure" in summary:
        print(f"movavg: check failed: {summary['failure']}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
