"""Command-line front end.

Subcommands: ``decide`` runs the grid classification and emits a JSON
report (optionally a CSV torsion field), ``average`` emits the averaged
metric over a grid, ``torsion`` solves a single point verbosely with the
chain trace, and ``validate`` parallel-transports a vector along a polyline
and reports the metric drift.

Reports are deterministic: the same metric, grid, tolerances, and seed
produce byte-identical JSON (numbers printed with 17 significant digits, no
timestamps).  Exit codes: 0 for riemannian / classical_berwald /
generalized_berwald, 1 for not_generalized_berwald, 2 for inconclusive, 3
for usage, input, or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .averaging import averaged_data, averaged_data_batch, unit_sphere_quadrature
from .errors import GBerwaldError
from .expressions import ExpressionError
from .grid import BoxGrid, parse_grid
from .metrics import MetricFamily
from .specfile import BUILTINS, parse_metric_spec
from .tensors import pair_indices
from .tester import (
    VERDICT_INCONCLUSIVE,
    VERDICT_NOT_GB,
    PoolSizes,
    decide,
    pointwise_torsion_field,
    validate_connection,
)
from .torsion import Tolerances, extremal_torsion, make_pools

_USAGE_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 3."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


@dataclass(eq=False)
class RunConfig:
    command: str
    metric_arg: str
    metric_text: str
    family: MetricFamily
    grid: BoxGrid | None
    quad_nodes: int | None
    tols: Tolerances
    sizes: PoolSizes
    seed: int
    scale: float
    method: str
    jobs: int
    out: str | None
    csv: str | None
    point: np.ndarray | None = None
    path: np.ndarray | None = None
    v0: np.ndarray | None = None
    steps: int = 1000
    field: str = "extremal"


# ---------------------------------------------------------------------------
# deterministic JSON with 17 significant digits

def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not np.isfinite(v):
            return "null"
        return "%.17g" % v
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in value) + "]"
    if isinstance(value, np.ndarray):
        return _json_value(value.tolist())
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}" for k, v in value.items())
        return "{" + items + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _render_json(payload: dict, indent: int = 0) -> str:
    """Top level pretty-printed one key per line; nested values compact."""
    pad = "  "
    lines = ["{"]
    keys = list(payload.items())
    for idx, (k, v) in enumerate(keys):
        comma = "," if idx + 1 < len(keys) else ""
        if isinstance(v, dict):
            body = _render_json(v, indent + 1)
            body = ("\n" + pad * (indent + 1)).join(body.splitlines())
            lines.append(f"{pad * (indent + 1)}{json.dumps(k)}: {body}{comma}")
        elif isinstance(v, list) and v and isinstance(v[0], dict):
            rows = (",\n").join(
                pad * (indent + 2) + _json_value(item) for item in v
            )
            lines.append(f"{pad * (indent + 1)}{json.dumps(k)}: [\n{rows}\n{pad * (indent + 1)}]{comma}")
        else:
            lines.append(f"{pad * (indent + 1)}{json.dumps(k)}: {_json_value(v)}{comma}")
    lines.append(pad * indent + "}")
    return "\n".join(lines)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# argument handling

def _parse_floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}") from None


def _parse_path(text: str) -> np.ndarray:
    points = [p for p in text.split(";") if p.strip()]
    if len(points) < 2:
        raise ValueError("path needs at least two ';'-separated points")
    return np.stack([_parse_floats(p, "path point") for p in points])


def _load_metric(arg: str) -> tuple[str, MetricFamily]:
    if arg in BUILTINS:
        text = BUILTINS[arg]
    else:
        path = Path(arg)
        if not path.is_file():
            raise ValueError(
                f"metric {arg!r} is neither a built-in name ({', '.join(sorted(BUILTINS))}) "
                "nor a readable file"
            )
        text = path.read_text(encoding="utf-8")
    return text, parse_metric_spec(text)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gberwald", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid_required: bool):
        p.add_argument("--metric", required=True,
                       help="metric file path or a built-in name")
        if grid_required is not None:
            p.add_argument("--grid", required=grid_required,
                           help="box grid as lo:hi:count per axis, comma separated")
        p.add_argument("--quad-nodes", type=int, default=None,
                       help="sphere quadrature resolution (default per dimension)")
        p.add_argument("--tol-contact", type=float, default=1e-9)
        p.add_argument("--tol-res", type=float, default=1e-7)
        p.add_argument("--trigger", type=float, default=1e-3,
                       help="confirmed-violation threshold for a negative verdict")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scale", type=float, default=1.0,
                       help="rescale the averaged metric (results must not react)")
        p.add_argument("--pool", type=int, default=720,
                       help="equispaced directions per selection pool")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", default=None, help="JSON report path (default stdout)")

    p_decide = sub.add_parser("decide", help="classify a metric over a grid")
    common(p_decide, grid_required=True)
    p_decide.add_argument("--csv", default=None, help="CSV torsion field path")

    p_avg = sub.add_parser("average", help="emit the averaged metric over a grid")
    common(p_avg, grid_required=True)

    p_tor = sub.add_parser("torsion", help="single-point extremal solve with chain trace")
    common(p_tor, grid_required=None)
    p_tor.add_argument("--point", required=True, help="base point, comma separated")

    p_val = sub.add_parser("validate", help="transport drift along a polyline")
    common(p_val, grid_required=None)
    p_val.add_argument("--path", required=True,
                       help="polyline as ';'-separated comma-separated points")
    p_val.add_argument("--v0", required=True, help="start vector, comma separated")
    p_val.add_argument("--steps", type=int, default=1000, help="integration steps per unit length")
    p_val.add_argument("--field", choices=("extremal", "levi-civita"), default="extremal",
                       help="torsion field for the transported connection")
    return parser


def _config_from_args(args) -> RunConfig:
    metric_text, family = _load_metric(args.metric)
    grid = None
    if getattr(args, "grid", None) is not None:
        grid = parse_grid(args.grid)
        if grid.dim != family.dim:
            raise ValueError(
                f"grid has {grid.dim} axes, the metric lives in dimension {family.dim}"
            )
        if any(c < 2 for c in grid.shape):
            raise ValueError("grid needs at least 2 points per axis")
    for name in ("tol_contact", "tol_res", "trigger"):
        if getattr(args, name) <= 0.0:
            raise ValueError(f"--{name.replace('_', '-')} must be positive")
    if args.pool < 8:
        raise ValueError("--pool must be at least 8")
    tols = Tolerances(contact=args.tol_contact, residual=args.tol_res, trigger=args.trigger)
    sizes = PoolSizes(n_equispaced=args.pool)
    return RunConfig(
        command=args.command,
        metric_arg=args.metric,
        metric_text=metric_text,
        family=family,
        grid=grid,
        quad_nodes=args.quad_nodes,
        tols=tols,
        sizes=sizes,
        seed=args.seed,
        scale=args.scale,
        method="auto",
        jobs=args.jobs,
        out=args.out,
        csv=getattr(args, "csv", None),
        point=_parse_floats(args.point, "--point") if getattr(args, "point", None) else None,
        path=_parse_path(args.path) if getattr(args, "path", None) else None,
        v0=_parse_floats(args.v0, "--v0") if getattr(args, "v0", None) else None,
        steps=getattr(args, "steps", 1000),
        field=getattr(args, "field", "extremal"),
    )


def _config_echo(config: RunConfig) -> dict:
    echo = {
        "metric": config.metric_arg,
        "metric_text": config.metric_text,
        "quad_nodes": config.quad_nodes,
        "tolerances": {
            "contact": config.tols.contact,
            "residual": config.tols.residual,
            "trigger": config.tols.trigger,
            "agree": config.tols.agree,
        },
        "pool_sizes": {
            "equispaced": config.sizes.n_equispaced,
            "random": config.sizes.n_random,
            "validation": config.sizes.n_validation,
        },
        "seed": config.seed,
        "scale": config.scale,
    }
    if config.grid is not None:
        echo["grid"] = {
            "bounds": config.grid.bounds,
            "shape": list(config.grid.shape),
        }
    return echo


# ---------------------------------------------------------------------------
# subcommand bodies

def _torsion_columns(n: int) -> list:
    return [f"T{c + 1}_{a + 1}{b + 1}" for (a, b) in pair_indices(n) for c in range(n)]


def _run_decide(config: RunConfig) -> int:
    quad = unit_sphere_quadrature(config.family.dim, config.quad_nodes)
    report = decide(
        config.family,
        config.grid,
        quad=quad,
        tols=config.tols,
        seed=config.seed,
        sizes=config.sizes,
        scale=config.scale,
        n_jobs=config.jobs,
    )
    points_json = []
    for idx, v in enumerate(report.verdicts):
        points_json.append({
            "index": idx,
            "point": v.point,
            "verdict": v.verdict,
            "route": v.route,
            "torsion_chart": v.torsion_chart.comps,
            "torsion_frame": v.torsion_frame.comps,
            "residual_max": v.residual_max,
            "agreement": v.agreement,
            "contact_violation": v.contact_violation,
            "chain_length": v.chain_length,
            "status": v.status,
            "orthogonality_defect": v.orthogonality_defect,
            "ratio_spread": v.ratio_spread,
            "stacked_initial": v.stacked_initial,
            "stacked_refined": v.stacked_refined,
            "reason": v.reason,
        })
    payload = {
        "schema": 1,
        "tool": "gberwald",
        "command": "decide",
        "config": _config_echo(config),
        "global_verdict": report.global_verdict,
        "dim": report.dim,
        "continuity": report.continuity,
        "verdict_counts": report.verdict_counts,
        "route_counts": report.route_counts,
        "points": points_json,
    }
    _write_text(config.out, _render_json(payload))
    if config.csv is not None:
        n = report.dim
        header = [f"u{i + 1}" for i in range(n)] + _torsion_columns(n) + ["residual"]
        rows = [",".join(header)]
        for v in report.verdicts:
            vals = list(v.point) + list(v.torsion_chart.comps) + [v.residual_max]
            rows.append(",".join("%.17g" % x for x in vals))
        _write_text(config.csv, "\n".join(rows))
    if report.global_verdict == VERDICT_NOT_GB:
        return 1
    if report.global_verdict == VERDICT_INCONCLUSIVE:
        return 2
    return 0


def _run_average(config: RunConfig) -> int:
    quad = unit_sphere_quadrature(config.family.dim, config.quad_nodes)
    points = config.grid.points()
    avgs = averaged_data_batch(config.family, points, quad, scale=config.scale)
    rows = [
        {"point": avg.point, "gamma": avg.gamma, "christoffel": avg.christoffel}
        for avg in avgs
    ]
    payload = {
        "schema": 1,
        "tool": "gberwald",
        "command": "average",
        "config": _config_echo(config),
        "dim": config.family.dim,
        "points": rows,
    }
    _write_text(config.out, _render_json(payload))
    return 0


def _run_torsion(config: RunConfig) -> int:
    quad = unit_sphere_quadrature(config.family.dim, config.quad_nodes)
    family = config.family
    if config.point.size != family.dim:
        raise ValueError(f"--point needs {family.dim} coordinates")
    family.validate_on(config.point[None])
    avg = averaged_data(family, config.point, quad, scale=config.scale)
    pools = make_pools(
        family.dim, config.seed, 0, 0,
        n_equispaced=config.sizes.n_equispaced,
        n_random=config.sizes.n_random,
        n_validation=config.sizes.n_validation,
    )
    t, diag = extremal_torsion(family, avg, pools, config.tols)
    trace = []
    for step_idx, (ref, norm) in enumerate(zip(diag.used_refs, diag.chain_norms)):
        trace.append({
            "step": step_idx + 1,
            "direction": ref.comps,
            "torsion_norm": norm,
        })
    payload = {
        "schema": 1,
        "tool": "gberwald",
        "command": "torsion",
        "config": _config_echo(config),
        "point": config.point,
        "route": diag.route,
        "status": diag.status,
        "converged": diag.converged,
        "torsion_chart": diag.torsion_chart.comps,
        "torsion_frame": t.comps,
        "torsion_norm": t.norm,
        "chain_length": diag.chain_length,
        "residual_selection": diag.residual_selection,
        "residual_validation": diag.residual_validation,
        "contact_violation": diag.contact_violation,
        "orthogonality_defect": diag.orthogonality_defect,
        "ratio_spread": diag.ratio_spread,
        "n_vertical_contact": diag.n_vertical_contact,
        "n_horizontal_contact": diag.n_horizontal_contact,
        "chain": trace,
    }
    _write_text(config.out, _render_json(payload))
    return 0


def _run_validate(config: RunConfig) -> int:
    quad = unit_sphere_quadrature(config.family.dim, config.quad_nodes)
    family = config.family
    if config.path.shape[1] != family.dim or config.v0.size != family.dim:
        raise ValueError(f"--path points and --v0 need {family.dim} coordinates")
    torsion_field = None
    if config.field == "extremal":
        torsion_field = pointwise_torsion_field(
            family, quad=quad, tols=config.tols, seed=config.seed, scale=config.scale
        )
    result = validate_connection(
        family, torsion_field, config.path, config.v0,
        quad=quad, steps_per_unit=config.steps, scale=config.scale,
    )
    payload = {
        "schema": 1,
        "tool": "gberwald",
        "command": "validate",
        "config": _config_echo(config),
        "path": config.path,
        "v0": config.v0,
        "field": config.field,
        "steps_per_unit": config.steps,
        "drift": result.drift,
        "F_start": result.F_start,
        "F_end": result.F_end,
        "vector_end": result.vector_end,
    }
    _write_text(config.out, _render_json(payload))
    return 0


_RUNNERS = {
    "decide": _run_decide,
    "average": _run_average,
    "torsion": _run_torsion,
    "validate": _run_validate,
}


def run(config: RunConfig) -> int:
    return _RUNNERS[config.command](config)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from_args(args)
        return run(config)
    except SystemExit as err:
        return err.code if isinstance(err.code, int) else _USAGE_EXIT
    except (GBerwaldError, ExpressionError, ValueError, OSError) as err:
        print(f"gberwald: error: {err}", file=sys.stderr)
        return _USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
