"""Command-line front end.

One JSON config file drives every subcommand; flags override config fields.
Outputs are CSV or JSON with all floats rendered at 17 significant digits so
regression runs re-parse bit-faithfully, and the RNG seed is recorded in
every output header. Exit codes: 0 success, 1 domain/assumption failure,
2 malformed config.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import classify as classify_mod
from . import digraph as digraph_mod
from . import dynamics as dynamics_mod
from .errors import CapExceeded, ConfigError, PatchLVError

SUBCOMMANDS = (
    "check-graph",
    "identity",
    "simulate",
    "classify",
    "sweep",
    "thresholds",
    "limits",
)

TOP_LEVEL_KEYS = {
    "graph",
    "model",
    "seed",
    "tol",
    "output",
    "identity",
    "simulate",
    "sweep",
    "thresholds",
    "limits",
}


def fmt(x) -> str:
    """17-significant-digit rendering used for every float we emit."""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def render_json(obj) -> str:
    """Deterministic JSON with floats at 17 significant digits.

    Keys are emitted sorted; NaN/inf become null (JSON has no spelling for
    them).
    """
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(render_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {render_json(v)}" for k, v in items) + "}"
    raise TypeError(f"cannot render {type(obj)!r}")


# ---------------------------------------------------------------------------
# config validation


def _check_keys(obj, allowed, context):
    if not isinstance(obj, dict):
        raise ConfigError(f"{context} must be an object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")


def _number(obj, key, context, *, positive=False, default=None, required=True):
    if key not in obj:
        if required:
            raise ConfigError(f"{context}.{key} is required")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number")
    val = float(val)
    if positive and val <= 0:
        raise ConfigError(f"{context}.{key} must be positive")
    return val


def _integer(obj, key, context, *, minimum=None, default=None, required=True):
    if key not in obj:
        if required:
            raise ConfigError(f"{context}.{key} is required")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{context}.{key} must be an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{context}.{key} must be >= {minimum}")
    return val


def _vector(obj, key, context, *, required=True):
    if key not in obj:
        if required:
            raise ConfigError(f"{context}.{key} is required")
        return None
    val = obj[key]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{context}.{key} must be a nonempty array")
    for x in val:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ConfigError(f"{context}.{key} must contain numbers")
    return np.asarray(val, dtype=float)


def _axis(obj, context):
    _check_keys(obj, {"min", "max", "points", "scale"}, context)
    lo = _number(obj, "min", context, positive=True)
    hi = _number(obj, "max", context, positive=True)
    points = _integer(obj, "points", context, minimum=1)
    scale = obj.get("scale", "log")
    if scale not in ("log", "linear"):
        raise ConfigError(f"{context}.scale must be 'log' or 'linear'")
    if hi < lo:
        raise ConfigError(f"{context}: max must be >= min")
    if points == 1:
        return np.array([lo])
    if scale == "log":
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(cfg, TOP_LEVEL_KEYS, "config")
    if "seed" in cfg:
        _integer(cfg, "seed", "config", minimum=0)
    if "tol" in cfg:
        _number(cfg, "tol", "config", positive=True)
    if "output" in cfg:
        _check_keys(cfg["output"], {"path", "format"}, "output")
        if cfg["output"].get("format") not in (None, "csv", "json"):
            raise ConfigError("output.format must be 'csv' or 'json'")
    return cfg


def _config_graph(cfg):
    if "graph" not in cfg:
        raise ConfigError("config.graph is required")
    gspec = cfg["graph"]
    _check_keys(gspec, {"n", "arcs"}, "graph")
    n = _integer(gspec, "n", "graph", minimum=2)
    if not isinstance(gspec.get("arcs"), list):
        raise ConfigError("graph.arcs must be an array")
    for k, arc in enumerate(gspec["arcs"]):
        _check_keys(arc, {"from", "to", "weight"}, f"graph.arcs[{k}]")
        _integer(arc, "from", f"graph.arcs[{k}]", minimum=1)
        _integer(arc, "to", f"graph.arcs[{k}]", minimum=1)
        _number(arc, "weight", f"graph.arcs[{k}]")
        if arc["from"] > n or arc["to"] > n:
            raise ConfigError(f"graph.arcs[{k}] endpoint exceeds n={n}")
        if arc["from"] == arc["to"]:
            raise ConfigError(f"graph.arcs[{k}] is a self-loop")
        if arc["weight"] < 0:
            raise ConfigError(f"graph.arcs[{k}].weight must be nonnegative")
    try:
        return digraph_mod.graph_from_json(gspec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _config_system(cfg, graph):
    if "model" not in cfg:
        raise ConfigError("config.model is required for this command")
    m = cfg["model"]
    _check_keys(m, {"p", "q", "b", "c", "mu_u", "mu_v"}, "model")
    p = _vector(m, "p", "model")
    q = _vector(m, "q", "model")
    b = _number(m, "b", "model", positive=True)
    c = _number(m, "c", "model", positive=True)
    mu_u = _number(m, "mu_u", "model")
    mu_v = _number(m, "mu_v", "model")
    try:
        return dynamics_mod.PatchSystem(graph, p, q, b, c, mu_u, mu_v)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output plumbing


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_error(exc, fmt_mode):
    if fmt_mode == "json":
        sys.stderr.write(
            render_json({"error": {"type": type(exc).__name__, "message": str(exc)}})
            + "\n"
        )
    else:
        sys.stderr.write(f"patchlv: {type(exc).__name__}: {exc}\n")


def _csv_text(header_comment, columns, rows):
    lines = [header_comment, ",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_check_graph(cfg, opts):
    g = _config_graph(cfg)
    tol = opts["tol"] or digraph_mod.DEFAULT_REL_TOL
    sc = digraph_mod.is_strongly_connected(g)
    report = {
        "seed": opts["seed"],
        "n": g.n,
        "strongly_connected": sc,
        "sign_pattern_symmetric": digraph_mod.is_sign_pattern_symmetric(g),
        "arc_count": g.arc_count,
        "min_arcs_if_balanced": 2 * (g.n - 1),
    }
    balanced = False
    if sc:
        cert = digraph_mod.certify_cycle_balance(g, tol)
        report["certificate"] = cert.to_json()
        balanced = cert.balanced
    else:
        report["certificate"] = None
    code = 0 if (sc and balanced) else 1
    return render_json(report) + "\n", code


def cmd_identity(cfg, opts):
    g = _config_graph(cfg)
    block = cfg.get("identity", {})
    _check_keys(block, {"tables"}, "identity")
    tables = _integer(block, "tables", "identity", minimum=1, default=100, required=False)
    rng = np.random.default_rng(opts["seed"])
    max_abs = 0.0
    max_rel = 0.0
    for _ in range(tables):
        F = rng.uniform(-1.0, 1.0, (g.n, g.n))
        lhs, rhs = digraph_mod.tree_cycle_identity(g, F)
        dev = abs(lhs - rhs)
        scale = max(1.0, abs(lhs), abs(rhs))
        max_abs = max(max_abs, dev)
        max_rel = max(max_rel, dev / scale)
    passed = max_rel <= 1e-9
    report = {
        "seed": opts["seed"],
        "tables": tables,
        "max_abs_deviation": max_abs,
        "max_rel_deviation": max_rel,
        "pass": passed,
    }
    return render_json(report) + "\n", 0 if passed else 1


def cmd_simulate(cfg, opts):
    g = _config_graph(cfg)
    system = _config_system(cfg, g)
    if "simulate" not in cfg:
        raise ConfigError("config.simulate is required")
    block = cfg["simulate"]
    _check_keys(block, {"init_u", "init_v", "t_end", "samples", "dt"}, "simulate")
    init_u = _vector(block, "init_u", "simulate")
    init_v = _vector(block, "init_v", "simulate")
    if len(init_u) != g.n or len(init_v) != g.n or (init_u < 0).any() or (init_v < 0).any():
        raise ConfigError("simulate.init_u/init_v must be nonnegative length-n arrays")
    t_end = _number(block, "t_end", "simulate", positive=True)
    samples = _integer(block, "samples", "simulate", minimum=2, default=201, required=False)
    dt = _number(block, "dt", "simulate", positive=True, required=False)

    traj = dynamics_mod.integrate(
        system, (init_u, init_v), t_end, dt=dt, samples=samples, truncate_on_failure=True
    )
    rows = [
        [t] + list(state) for t, state in zip(traj.times, traj.states)
    ]
    header = f"# seed={opts['seed']} aborted={str(traj.aborted).lower()} clips={traj.clips}"
    if opts["format"] == "json":
        report = {
            "seed": opts["seed"],
            "aborted": traj.aborted,
            "clips": traj.clips,
            "columns": ["t"] + list(traj.columns),
            "rows": [list(map(float, row)) for row in rows],
        }
        return render_json(report) + "\n", 1 if traj.aborted else 0
    text = _csv_text(header, ["t"] + list(traj.columns), rows)
    return text, 1 if traj.aborted else 0


def _witness_json(outcome):
    wit = outcome.witness
    if wit is None:
        return None
    if isinstance(wit, dynamics_mod.ContinuumFamily):
        return {
            "rho_grid": list(map(float, wit.rho_grid)),
            "base": list(map(float, wit.base)),
            "c": wit.c,
            "residuals": list(map(float, wit.residuals)),
        }
    return wit.to_json()


def cmd_classify(cfg, opts):
    g = _config_graph(cfg)
    system = _config_system(cfg, g)
    tol = opts["tol"] or classify_mod.CLASSIFY_TOL
    label, outcome = classify_mod.classify_point(system, tol, witness=True)
    report = {
        "seed": opts["seed"],
        "label": label.to_json(),
        "outcome": outcome.outcome.value,
        "witness": _witness_json(outcome),
    }
    return render_json(report) + "\n", 0


def cmd_sweep(cfg, opts):
    g = _config_graph(cfg)
    system = _config_system(cfg, g)
    if "sweep" not in cfg:
        raise ConfigError("config.sweep is required")
    block = cfg["sweep"]
    _check_keys(block, {"plane", "x", "y", "verify"}, "sweep")
    plane = block.get("plane", "mu")
    if plane not in ("mu", "bc"):
        raise ConfigError("sweep.plane must be 'mu' or 'bc'")
    xs = _axis(block.get("x", {}), "sweep.x")
    ys = _axis(block.get("y", {}), "sweep.y")
    tol = opts["tol"] or classify_mod.CLASSIFY_TOL
    cells = classify_mod.sweep(system, plane, xs, ys, tol=tol, jobs=opts["jobs"])

    verified_cols = False
    if opts["verify"]:
        vblock = block.get("verify", {})
        _check_keys(
            vblock, {"cells_per_region", "inits", "t_end", "dist_tol"}, "sweep.verify"
        )
        cells = classify_mod.verify_cells(
            system,
            plane,
            cells,
            per_region=_integer(
                vblock, "cells_per_region", "sweep.verify", minimum=1, default=5, required=False
            ),
            n_inits=_integer(vblock, "inits", "sweep.verify", minimum=1, default=3, required=False),
            t_end=_number(vblock, "t_end", "sweep.verify", positive=True, default=2000.0, required=False),
            dist_tol=_number(vblock, "dist_tol", "sweep.verify", positive=True, default=1e-4, required=False),
            seed=opts["seed"],
            tol=tol,
        )
        verified_cols = True

    names = ("mu_u", "mu_v") if plane == "mu" else ("b", "c")
    columns = list(names) + ["lambda_u", "lambda_v", "region", "outcome"]
    if verified_cols:
        columns.append("verified")

    def cell_fields(c):
        region = c.region.value if c.region else f"error:{c.error}"
        outcome = c.outcome.value if c.outcome else f"error:{c.error}"
        row = [c.x, c.y, c.lambda_u, c.lambda_v, region, outcome]
        if verified_cols:
            row.append("" if c.verified is None else str(c.verified).lower())
        return row

    if opts["format"] == "json":
        report = {
            "seed": opts["seed"],
            "plane": plane,
            "columns": columns,
            "rows": [
                {
                    names[0]: c.x,
                    names[1]: c.y,
                    "lambda_u": c.lambda_u,
                    "lambda_v": c.lambda_v,
                    "region": c.region.value if c.region else None,
                    "outcome": c.outcome.value if c.outcome else None,
                    "error": c.error,
                    **({"verified": c.verified} if verified_cols else {}),
                }
                for c in cells
            ],
        }
        return render_json(report) + "\n", 0
    text = _csv_text(f"# seed={opts['seed']}", columns, [cell_fields(c) for c in cells])
    return text, 0


def cmd_thresholds(cfg, opts):
    g = _config_graph(cfg)
    if "thresholds" not in cfg:
        raise ConfigError("config.thresholds is required")
    block = cfg["thresholds"]
    _check_keys(block, {"mode", "r", "mu_u", "mu_v", "mu"}, "thresholds")
    mode = block.get("mode", "bc")
    tol = opts["tol"] or classify_mod.CLASSIFY_TOL
    if mode == "bc":
        r = _vector(block, "r", "thresholds")
        mu_u = _number(block, "mu_u", "thresholds", positive=True)
        mu_v = _number(block, "mu_v", "thresholds", positive=True)
        b_rep, c_rep = classify_mod.shared_resource_thresholds(g, r, mu_u, mu_v, tol)
        report = {
            "seed": opts["seed"],
            "b_threshold": b_rep.to_json(),
            "c_threshold": c_rep.to_json(),
        }
        return render_json(report) + "\n", 0
    if mode == "mu":
        system = _config_system(cfg, g)
        grid = _axis(block.get("mu", {"min": 1e-3, "max": 1e3, "points": 60}), "thresholds.mu")
        scan = classify_mod.equal_competition_scan(g, system.p, system.q, grid, tol)
        report = {
            "seed": opts["seed"],
            "dominance": scan.dominance,
            "drift_sign": scan.drift_sign,
            "rows": [
                {
                    "mu": row.mu,
                    "lambda_u": row.lambda_u,
                    "lambda_v": row.lambda_v,
                    "region": row.region.value,
                    "outcome": row.outcome.value,
                }
                for row in scan.rows
            ],
            "crossings_u": [rep.to_json() for rep in scan.crossings_u],
            "crossings_v": [rep.to_json() for rep in scan.crossings_v],
        }
        return render_json(report) + "\n", 0
    raise ConfigError("thresholds.mode must be 'bc' or 'mu'")


def cmd_limits(cfg, opts):
    g = _config_graph(cfg)
    if "limits" not in cfg:
        raise ConfigError("config.limits is required")
    block = cfg["limits"]
    _check_keys(block, {"mode", "probe_mu", "r"}, "limits")
    mode = block.get("mode")
    probe = block.get("probe_mu", [])
    if not isinstance(probe, list) or any(
        isinstance(x, bool) or not isinstance(x, (int, float)) or x <= 0 for x in probe
    ):
        raise ConfigError("limits.probe_mu must be an array of positive numbers")
    if mode == "small_mu":
        system = _config_system(cfg, g)
        u0, v0, results = classify_mod.small_mu_probe(g, system.p, system.q, probe)
        report = {
            "seed": opts["seed"],
            "u0": list(map(float, u0)),
            "v0": list(map(float, v0)),
            "probes": [
                {"mu": mu, "distance": dist, "u": list(map(float, rep.u)), "v": list(map(float, rep.v))}
                for mu, rep, dist in results
            ],
        }
        return render_json(report) + "\n", 0
    if mode == "large_mu":
        if "r" in block:
            r = _vector(block, "r", "limits")
        else:
            system = _config_system(cfg, g)
            r = system.p
        lim, probes = classify_mod.large_mu_probe(g, r, probe)
        report = {
            "seed": opts["seed"],
            "limit": list(map(float, lim)),
            "probes": [{"mu": mu, "distance": dist} for mu, dist in probes],
        }
        return render_json(report) + "\n", 0
    raise ConfigError("limits.mode must be 'small_mu' or 'large_mu'")


COMMANDS = {
    "check-graph": cmd_check_graph,
    "identity": cmd_identity,
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
    "thresholds": cmd_thresholds,
    "limits": cmd_limits,
}


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    common.add_argument("--tol", type=float, help="classification tolerance")
    common.add_argument("--verify", action="store_true", help="integration spot checks in sweeps")
    common.add_argument("--jobs", type=int, help="worker processes (env PATCHLV_JOBS)")
    parser = argparse.ArgumentParser(
        prog="patchlv",
        description="Two-species competition dynamics on weighted patch networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _resolve_options(args, cfg):
    out_cfg = cfg.get("output", {})
    jobs = args.jobs
    if jobs is None:
        env = os.environ.get("PATCHLV_JOBS")
        jobs = int(env) if env else 1
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    tol = args.tol if args.tol is not None else cfg.get("tol")
    if tol is not None and tol <= 0:
        raise ConfigError("tolerance must be positive")
    default_fmt = "csv" if args.command in ("simulate", "sweep") else "json"
    return {
        "seed": args.seed if args.seed is not None else cfg.get("seed", 0),
        "tol": tol,
        "out": args.out or out_cfg.get("path"),
        "format": args.format or out_cfg.get("format") or default_fmt,
        "verify": args.verify,
        "jobs": jobs,
    }


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    fmt_mode = args.format or "json"
    try:
        cfg = load_config(args.config)
        opts = _resolve_options(args, cfg)
        fmt_mode = opts["format"]
        text, code = COMMANDS[args.command](cfg, opts)
        _emit(text, opts["out"])
        return code
    except ConfigError as exc:
        _emit_error(exc, fmt_mode)
        return 2
    except CapExceeded as exc:
        _emit_error(exc, fmt_mode)
        return 1
    except PatchLVError as exc:
        _emit_error(exc, fmt_mode)
        return 1


if __name__ == "__main__":
    sys.exit(main())
