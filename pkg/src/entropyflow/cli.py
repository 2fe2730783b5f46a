"""Command-line harness: ``entropyflow {generate,entropy,flow,rigidity,bonnesen,verify}``.

Inputs named ``SOURCE`` are either a mesh file (OFF/OBJ) or a shape-spec
string such as ``sphere:r=1,level=4``.  ``--config FILE`` reads flat
``key=value`` lines whose keys are option names; explicit flags win.

Exit codes: 0 success, 1 numerical non-convergence, 2 I/O or config error.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import errors
from .shapes import GENERATORS, generate, parse_shape_spec

EXIT_OK, EXIT_NUMERIC, EXIT_IO = 0, 1, 2

# numerical failures map to exit code 1, everything input-shaped to 2
_NUMERIC = (errors.NoConvergence, errors.QuadratureNotConverged, errors.SolveFailure,
            errors.NotShrinkingToPoint, errors.NumericalDegeneracy, errors.QualityCollapse,
            errors.NeckPinch, errors.CapDegeneracy, errors.InsufficientStates)
_INPUT = (OSError, errors.MeshError, errors.InvalidParameter, errors.NotSimple,
          errors.UnsupportedIndex, ValueError)

FAMILIES = {
    "perturbed": "perturbed_sphere:r=2,eps={eps},level={level}",
    "ellipsoid": "ellipsoid:a={a},b=1,c=1,level={level}",
}
DEFAULT_EPS = "0.02,0.05,0.1,0.2,0.3"


class ConfigError(Exception):
    pass


def _version():
    from . import __version__

    return __version__


# --------------------------------------------------------------------------
# inputs and provenance


def _looks_like_spec(text):
    return ":" in text and text.split(":", 1)[0] in GENERATORS or text in GENERATORS


def load_surface(source):
    """Mesh from a file path or a shape-spec string."""
    from .meshio import read_mesh

    if not os.path.exists(source) and _looks_like_spec(source):
        return generate(source)
    return read_mesh(source)


def mesh_hash(mesh):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(mesh.faces, dtype="<i8").tobytes())
    return h.hexdigest()


def _provenance(args, meshes=()):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    return {"tool": "entropyflow", "version": _version(), "command": args.command,
            "config": _jsonable(config), "mesh_sha256": [mesh_hash(m) for m in meshes]}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _emit(args, report, meshes=()):
    doc = {"report": _jsonable(report), "provenance": _provenance(args, meshes),
           "metadata": {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if getattr(args, "out", None):
        _atomic_write(args.out, text + "\n")
    print(text)
    return doc


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    from .meshio import read_mesh, write_mesh

    parse_shape_spec(args.spec)
    mesh = generate(args.spec)
    write_mesh(mesh, args.output)
    back = read_mesh(args.output)
    report = {"spec": args.spec, "path": str(args.output), "vertices": back.n_vertices,
              "faces": back.n_faces, "euler_characteristic": back.n_vertices - len(back.edges) + back.n_faces}
    _emit(argparse.Namespace(**{**vars(args), "out": None}), report, [back])
    return EXIT_OK


def cmd_entropy(args):
    from .gaussian import entropy

    mesh = load_surface(args.source)
    res = entropy(mesh, max_iter=args.max_iter, grid_starts=args.grid_starts, oracle=args.oracle)
    _emit(args, res.to_dict(), [mesh])
    return EXIT_OK if res.converged else EXIT_NUMERIC


def _rigidity_row(index, eps, spec, oracle):
    from .metrics import rigidity_defect

    mesh = generate(spec)
    rep = rigidity_defect(mesh, oracle=oracle)
    return {"index": index, "eps": eps, "spec": spec, "entropy": rep.entropy_value,
            "delta": rep.delta, "distance": rep.distance, "ratio": rep.ratio,
            "floored": rep.floored, "mesh_sha256": mesh_hash(mesh)}


def _family_specs(args):
    eps = [float(t) for t in str(args.eps).split(",") if t.strip()]
    if args.template:
        template = args.template
    elif args.family in FAMILIES:
        template = FAMILIES[args.family]
    else:
        raise ConfigError(f"unknown family {args.family!r}; choose from {sorted(FAMILIES)}")
    try:
        return [(e, template.format(eps=repr(e), a=repr(1.0 + e), level=args.level)) for e in eps]
    except (KeyError, IndexError) as exc:
        raise ConfigError(f"bad template {template!r}: {exc}") from exc


ROW_COLUMNS = ("index", "eps", "spec", "entropy", "delta", "distance", "ratio", "floored", "mesh_sha256")


def cmd_rigidity(args):
    from .metrics import log_log_slope, rigidity_defect

    if args.family is None and args.template is None:
        if args.source is None:
            raise ConfigError("rigidity needs a SOURCE or --family/--template")
        mesh = load_surface(args.source)
        rep = rigidity_defect(mesh, oracle=args.oracle)
        _emit(args, rep.to_dict(), [mesh])
        return EXIT_OK

    entries = _family_specs(args)
    for _, spec in entries:
        parse_shape_spec(spec)
    out_dir = Path(args.out_dir or "rigidity_sweep")
    jobs = [(i, e, s, args.oracle) for i, (e, s) in enumerate(entries)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(_rigidity_row, *j) for j in jobs]
            rows = []
            for j, f in zip(jobs, futures):
                rows.append(f.result())
                _atomic_write(out_dir / "entries" / f"entry_{j[0]:04d}.json", json.dumps(rows[-1]))
    else:
        rows = []
        for j in jobs:
            rows.append(_rigidity_row(*j))
            _atomic_write(out_dir / "entries" / f"entry_{j[0]:04d}.json", json.dumps(rows[-1]))
    rows.sort(key=lambda r: r["index"])

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ROW_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _atomic_write(out_dir / "rigidity.csv", buf.getvalue())

    usable = [r for r in rows if not r["floored"]]
    summary = {
        "rows": rows,
        "max_ratio": max((r["ratio"] for r in usable), default=float("nan")),
        "log_log_slope": log_log_slope([r["delta"] for r in usable], [r["distance"] for r in usable]),
        "csv": str(out_dir / "rigidity.csv"),
    }
    if not args.out:
        args.out = str(out_dir / "rigidity.json")
    _emit(args, summary)
    return EXIT_OK


def cmd_flow(args):
    from .axisym import AxisymProfile
    from .flow import as_mesh, curvature_monitor, mcf_evolve, speed_monitor, write_checkpoints
    from .gaussian import entropy
    from .shapes import shape_profile

    if args.axisym:
        if not _looks_like_spec(args.source):
            raise ConfigError("--axisym needs a shape spec, not a mesh file")
        name, kw = parse_shape_spec(args.source)
        kw.pop("level", None)
        initial = AxisymProfile.from_profile(shape_profile(name, **kw), n=args.nodes)
        mesh0 = as_mesh(initial, level=args.level)
    else:
        initial = mesh0 = load_surface(args.source)
    traj = mcf_evolve(initial, horizon=args.horizon, dt=args.dt, record_every=args.record_every,
                      max_steps=args.max_steps)
    out_dir = Path(args.out_dir or "flow_out")
    write_checkpoints(traj, out_dir)

    lam = args.entropy_value
    if lam is None:
        lam = entropy(mesh0).value
    monitors = {}
    if len(traj.states) > 2:
        curv = curvature_monitor(traj, lam)
        speed = speed_monitor(traj, entropy_value=lam)
        curv.to_csv(out_dir / "curvature_monitor.csv")
        speed.to_csv(out_dir / "speed_monitor.csv")
        monitors = {"curvature": {"value": curv.value, "applicable": curv.applicable},
                    "speed": {"value": speed.value, "applicable": speed.applicable,
                              "L_early": speed.extras["L_early"], "L_late": speed.extras["L_late"]}}
    report = {
        "stop_reason": traj.stop_reason,
        "final_time": traj.final.t,
        "states": len(traj.states),
        "round_point": traj.round_point.to_dict() if traj.round_point is not None else None,
        "round_point_error": traj.extras.get("round_point_error"),
        "entropy": lam,
        "monitors": monitors,
        "manifest": str(out_dir / "manifest.json"),
    }
    if not args.out:
        args.out = str(out_dir / "report.json")
    _emit(args, report, [mesh0])
    return EXIT_OK


def cmd_bonnesen(args):
    from .bonnesen import PlanarCurve, bonnesen_check

    res = bonnesen_check(PlanarCurve.from_csv(args.curve))
    _emit(args, res.to_dict())
    return EXIT_OK if res.holds else EXIT_NUMERIC


def cmd_verify(args):
    from .verify import run_suite

    results = run_suite(args.suite)
    ok = True
    for suite, checks in results.items():
        for c in checks:
            ok &= c.passed
            print(f"{'PASS' if c.passed else 'FAIL'}  {suite:<15} {c.name:<22} value={c.value:.8g} "
                  f"expected={c.expected:.8g} tol={c.tolerance:g}", file=sys.stderr)
    _emit(args, {"passed": bool(ok), "suites": {k: [c.to_dict() for c in v] for k, v in results.items()}})
    return EXIT_OK if ok else EXIT_NUMERIC


# --------------------------------------------------------------------------
# parser and config


def build_parser():
    from .verify import SUITES

    parser = argparse.ArgumentParser(prog="entropyflow", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value file of option defaults")
        p.add_argument("--seed", type=int, default=0, help="recorded in provenance")
        p.set_defaults(func=func)
        return p

    p = command("generate", cmd_generate, "write a mesh from a shape spec")
    p.add_argument("spec")
    p.add_argument("output", help="output .off or .obj path")

    p = command("entropy", cmd_entropy, "entropy of a closed surface")
    p.add_argument("source", nargs="?")
    p.add_argument("--oracle", action="store_true", help="also run the grid oracle")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--grid-starts", type=int, default=8)
    p.add_argument("--out")

    p = command("rigidity", cmd_rigidity, "entropy gap against distance to round spheres")
    p.add_argument("source", nargs="?")
    p.add_argument("--family", choices=sorted(FAMILIES))
    p.add_argument("--template", help="shape spec with {eps}, {a}=1+eps and {level} fields")
    p.add_argument("--eps", default=DEFAULT_EPS, help="comma-separated parameters")
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir")
    p.add_argument("--out")

    p = command("flow", cmd_flow, "mean curvature flow with checkpoints and monitors")
    p.add_argument("source", nargs="?")
    p.add_argument("--axisym", action="store_true", help="evolve the generating profile")
    p.add_argument("--nodes", type=int, default=200, help="profile nodes with --axisym")
    p.add_argument("--level", type=int, default=4, help="revolution level for the entropy mesh")
    p.add_argument("--horizon", type=float, default=float("inf"))
    p.add_argument("--dt", type=float)
    p.add_argument("--record-every", type=int, default=5)
    p.add_argument("--max-steps", type=int, default=100000)
    p.add_argument("--entropy-value", type=float, help="skip the entropy computation")
    p.add_argument("--out-dir")
    p.add_argument("--out")

    p = command("bonnesen", cmd_bonnesen, "Bonnesen inequality for a closed planar curve")
    p.add_argument("curve", nargs="?", help="CSV of x,y rows")
    p.add_argument("--out")

    p = command("verify", cmd_verify, "run a built-in check suite")
    p.add_argument("suite", nargs="?", choices=[*SUITES, "all"])
    p.add_argument("--out")
    return parser


def read_config(path):
    """Flat ``key=value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(subparser, values):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ConfigError(f"{key} expects a boolean, got {raw!r}")
            value = raw.lower() in ("1", "true", "yes")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except ValueError as exc:
                raise ConfigError(f"bad value {raw!r} for {key}") from exc
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"{key} must be one of {list(action.choices)}")
        defaults[key] = value
    subparser.set_defaults(**defaults)


_REQUIRED = {"entropy": "source", "flow": "source", "bonnesen": "curve", "verify": "suite"}


def main(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            sub = parser._subparsers._group_actions[0].choices[args.command]
            _apply_config(sub, read_config(args.config))
            args = parser.parse_args(argv)
        missing = _REQUIRED.get(args.command)
        if missing and getattr(args, missing) is None:
            parser.error(f"{args.command}: missing {missing.upper()}")
        return args.func(args)
    except _NUMERIC as exc:
        print(f"entropyflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, *_INPUT) as exc:
        print(f"entropyflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
