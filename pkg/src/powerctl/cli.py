"""
Command-line front end.

Every subcommand resolves a config (JSON file, then flag overrides), runs,
and writes a ``manifest.json`` next to its CSV traces and JSON summary.
``powerctl rerun <manifest>`` repeats a run from its manifest.

Exit codes: 0 success, 1 runtime error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    annealer_section,
    config_hash,
    dspc_config,
    instance_is_multicast,
    parse_config_dict,
    resolve_instance,
)
from .dspc import DspcConfig
from .model import LogRateUtility, NetworkInstance

log = logging.getLogger("powerctl")

OUTPUT_ENV = "POWERCTL_OUTPUT_DIR"
SUBCOMMANDS = ("solve-centralized", "run-dspc", "run-edspc", "run-queue", "scan-region",
               "oracle", "compare")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("numba", "jsonschema", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def write_manifest(out_dir, subcommand, cfg: ExperimentConfig, options):
    write_json(Path(out_dir) / "manifest.json", {
        "subcommand": subcommand,
        "options": options,
        "config": cfg.data,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "versions": _versions(),
    })


def _map(fn, items, jobs):
    """Order-preserving map, in worker processes when ``jobs > 1``."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _spec(inst):
    return LogRateUtility(inst.weights)


def _require_unicast(inst, name):
    if not isinstance(inst, NetworkInstance):
        raise ConfigError([f"instance: {name} needs a unicast instance"])


def cmd_solve_centralized(cfg, out, opts):
    from .centralized import solve_centralized

    inst = resolve_instance(cfg)
    _require_unicast(inst, "solve-centralized")
    c = cfg["centralized"]
    res = solve_centralized(inst, _spec(inst), eps=c["eps"], tol=c["tol"],
                            vertices=c["vertices"])
    write_csv(out / "trace.csv", ["visit", "best_t"], res.trace)
    summary = {"sum_utility": res.best_t, "p": res.best_p, "x": res.best_x,
               "simplices_visited": res.simplices_visited}
    write_json(out / "summary.json", summary)
    print(f"centralized: sum utility {res.best_t:.6f} at p = {np.round(res.best_p, 4).tolist()}")
    return 0


def _dspc_job(args):
    inst, base, seed, multicast, edspc = args
    cfg = dataclasses.replace(base, seed=seed)
    if multicast:
        from .multicast import MulticastInstance, run_dspc_multicast, run_edspc_multicast
        minst = inst if isinstance(inst, MulticastInstance) else MulticastInstance.from_unicast(inst)
        res = (run_edspc_multicast if edspc else run_dspc_multicast)(minst, cfg)
        summary = {"seed": seed, "utility": res.utility, "p": res.p, "r": res.r,
                   "rounds": res.rounds, "epochs": res.epochs, "converged": res.converged,
                   "warning": res.warning, "inner_failures": res.inner_failures}
    else:
        from .dspc import run_dspc, run_edspc
        res = (run_edspc if edspc else run_dspc)(inst, LogRateUtility(inst.weights), cfg)
        summary = {"seed": seed, "utility": res.utility, "p": res.p, "x": res.x, "t": res.t,
                   "alpha": res.alpha, "beta": res.beta, "rounds": res.rounds,
                   "epochs": res.epochs, "converged": res.converged, "warning": res.warning,
                   "inner_failures": res.inner_failures}
    return summary, res.trace.dtype.names, res.trace.tolist()


def _run_annealer(cfg, out, opts, edspc):
    from .multicast import MulticastInstance

    inst = resolve_instance(cfg)
    multicast = opts.get("multicast", False) or isinstance(inst, MulticastInstance)
    dcfg = dspc_config(cfg, annealer_section(edspc, multicast))
    seeds = [cfg.seed + k for k in range(cfg["seeds"])]
    jobs = [(inst, dcfg, s, multicast, edspc) for s in seeds]
    results = _map(_dspc_job, jobs, opts.get("jobs", 1))
    runs = []
    for seed, (summary, header, rows) in zip(seeds, results):
        write_csv(out / f"trace_seed{seed}.csv", header, rows)
        runs.append(summary)
    utils = np.array([r["utility"] for r in runs])
    write_json(out / "summary.json", {
        "algorithm": ("edspc" if edspc else "dspc") + ("-multicast" if multicast else ""),
        "runs": runs,
        "mean_utility": float(utils.mean()),
        "std_utility": float(utils.std()),
    })
    name = "EDSPC" if edspc else "DSPC"
    print(f"{name}: mean utility {utils.mean():.6f} over {len(runs)} run(s)")
    for r in runs:
        if r["warning"]:
            log.warning("seed %d: %s", r["seed"], r["warning"])
    return 0


def cmd_run_dspc(cfg, out, opts):
    return _run_annealer(cfg, out, opts, edspc=False)


def cmd_run_edspc(cfg, out, opts):
    return _run_annealer(cfg, out, opts, edspc=True)


def _queue_kwargs(q, cfg):
    from .oracle import GridSpec

    return dict(solver=q["solver"], resolve_period=q["resolve_period"],
                backlog_bound=q["backlog_bound"], slope_tol=q["slope_tol"],
                grid=GridSpec(resolution=cfg["oracle"]["resolution"]),
                cfg=dspc_config(cfg, "dspc") if q["solver"] == "dspc" else None)


def cmd_run_queue(cfg, out, opts):
    from .queueing import one_hop_classes, run_queue_sim

    inst = resolve_instance(cfg)
    _require_unicast(inst, "run-queue")
    q = cfg["queue"]
    if len(q["psi"]) != inst.L:
        raise ConfigError([f"queue.psi: need {inst.L} loads, got {len(q['psi'])}"])
    res = run_queue_sim(inst, one_hop_classes(q["psi"], q["nu"]), q["horizon"],
                        seed=cfg.seed, **_queue_kwargs(q, cfg))
    write_csv(out / "queue.csv", res.header(), res.rows())
    write_json(out / "summary.json", {"verdict": res.verdict, "mean_delay": res.mean_delay,
                                      "tail_mean_backlog": res.tail_mean, "slope": res.slope,
                                      "load": res.load})
    print(f"queue: {res.verdict}, mean delay {res.mean_delay:.3f} slots")
    return 0


def cmd_scan_region(cfg, out, opts):
    import itertools

    from .queueing import empirical_region_scan

    inst = resolve_instance(cfg)
    _require_unicast(inst, "scan-region")
    q, s = cfg["queue"], cfg["scan"]
    points = s["points"] or list(itertools.product(s["axis"], repeat=inst.L))
    kw = _queue_kwargs(q, cfg)
    solver = kw.pop("solver")
    rows = empirical_region_scan(inst, points, q["horizon"], seed=cfg.seed, nu=q["nu"],
                                 solver=solver, path=out / "region.csv",
                                 jobs=opts.get("jobs", 1), **kw)
    stable = sum(r["verdict"] == "stable" for r in rows)
    write_json(out / "summary.json", {"points": len(rows), "stable": stable})
    print(f"scan: {stable}/{len(rows)} points stable")
    return 0


def _oracle_value(inst, cfg):
    from .oracle import GridSpec, grid_best_sum_utility, randomized_best_sum_utility

    o = cfg["oracle"]
    grid = GridSpec(o["resolution"], o["samples"], o["budget"], o["refine_top"])
    spec = _spec(inst)
    if inst.L <= 3:
        return "grid", grid_best_sum_utility(inst, spec, grid)
    rng = np.random.default_rng(cfg.seed)
    return "randomized", randomized_best_sum_utility(inst, spec, grid, rng)


def cmd_oracle(cfg, out, opts):
    from .multicast import MulticastInstance
    from .oracle import GridSpec, multicast_grid_best

    inst = resolve_instance(cfg)
    if isinstance(inst, MulticastInstance):
        res = multicast_grid_best(inst, grid=GridSpec(resolution=cfg["oracle"]["resolution"]))
        kind = "multicast-grid"
    else:
        kind, res = _oracle_value(inst, cfg)
    write_json(out / "summary.json", {"method": kind, "value": res.value, "p": res.p,
                                      "evaluations": res.evaluations})
    print(f"oracle ({kind}): {res.value:.6f} at p = {np.round(res.p, 4).tolist()}")
    return 0


def cmd_compare(cfg, out, opts):
    from .centralized import solve_centralized

    if cfg["instance"] is None:
        names = ["case_one", "case_two"]
        instances = [resolve_instance(cfg, n) for n in names]
    else:
        names, instances = ["instance"], [resolve_instance(cfg)]
    header = ["instance", "oracle", "centralized", "dspc", "edspc"]
    rows = []
    seeds = [cfg.seed + k for k in range(cfg["seeds"])]
    for name, inst in zip(names, instances):
        _require_unicast(inst, "compare")
        _, o = _oracle_value(inst, cfg)
        c = cfg["centralized"]
        cen = solve_centralized(inst, _spec(inst), eps=c["eps"], tol=c["tol"],
                                vertices=c["vertices"]).best_t
        vals = []
        for edspc, section in ((False, "dspc"), (True, "edspc")):
            dcfg = dspc_config(cfg, section)
            jobs = [(inst, dcfg, s, False, edspc) for s in seeds]
            vals.append(float(np.mean([r[0]["utility"]
                                       for r in _map(_dspc_job, jobs, opts.get("jobs", 1))])))
        rows.append([name, o.value, cen, *vals])
    write_csv(out / "compare.csv", header, rows)
    write_json(out / "summary.json", {"columns": header, "rows": rows})
    widths = [12, 12, 12, 12, 12]
    print("".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        print(r[0].ljust(12) + "".join(f"{v:<12.4f}" for v in r[1:]))
    return 0


COMMANDS = {
    "solve-centralized": cmd_solve_centralized,
    "run-dspc": cmd_run_dspc,
    "run-edspc": cmd_run_edspc,
    "run-queue": cmd_run_queue,
    "scan-region": cmd_scan_region,
    "oracle": cmd_oracle,
    "compare": cmd_compare,
}


def dispatch(cfg: ExperimentConfig, subcommand: str, out_dir=None, options=None) -> int:
    """Run ``subcommand`` and write its artifacts plus a manifest into ``out_dir``."""
    if subcommand not in COMMANDS:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    options = dict(options or {})
    out = Path(out_dir or cfg["output_dir"] or os.environ.get(OUTPUT_ENV, "powerctl-out"))
    out.mkdir(parents=True, exist_ok=True)
    # jobs only changes speed, never the outputs
    write_manifest(out, subcommand, cfg, {k: v for k, v in options.items() if k != "jobs"})
    return COMMANDS[subcommand](cfg, out, options)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _set_path(d, dotted, value):
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _add_common(p):
    p.add_argument("--config", help="JSON experiment config")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=["case_one", "case_two", "six_link"])
    src.add_argument("--instance", help="instance JSON file")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="number of consecutive seeds to run")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./powerctl-out)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field by dotted path, e.g. dspc.radius=0.5")
    p.add_argument("-v", "--verbose", action="store_true")


_DSPC_FLAGS = [f for f in dataclasses.fields(DspcConfig) if f.name not in ("schedule", "seed")]


def _add_dspc_flags(p):
    g = p.add_argument_group("annealer parameters (override the config section)")
    g.add_argument("--schedule-kind", choices=["logarithmic", "geometric"])
    g.add_argument("--T0", type=float)
    g.add_argument("--xi", type=float)
    for f in _DSPC_FLAGS:
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            g.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"), metavar="BOOL")
        elif f.name in ("proposal", "report"):
            g.add_argument(flag)
        elif f.type in ("int", int):
            g.add_argument(flag, type=int)
        else:
            g.add_argument(flag, type=float)


HELP = {
    "solve-centralized": "simplex branch and bound over contribution weights",
    "run-dspc": "distributed annealing with penalty updates",
    "run-edspc": "distributed annealing with fixed penalties",
    "run-queue": "back-pressure queue simulation",
    "scan-region": "stable/unstable verdicts over a grid of loads",
    "oracle": "brute-force reference optimum",
    "compare": "table of every solver against the reference optimum",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="powerctl", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        _add_common(p)
        if name in ("run-dspc", "run-edspc"):
            p.add_argument("--multicast", action="store_true",
                           help="multicast solver (implied by a multicast instance)")
            _add_dspc_flags(p)
        if name in ("run-queue", "scan-region"):
            p.add_argument("--psi", type=float, nargs="+", help="per-class loads")
            p.add_argument("--axis", type=float, nargs="+", help="scan values per link")
            p.add_argument("--horizon", type=int)
            p.add_argument("--solver", choices=["oracle", "centralized", "dspc"])
            p.add_argument("--resolve-period", type=int)
    r = sub.add_parser("rerun", help="repeat a run from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("-v", "--verbose", action="store_true")
    return parser


def _raw_config(args) -> dict:
    raw = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError([f"config file not found: {path}"])
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
    if args.preset:
        raw["instance"] = {"preset": args.preset}
    if args.instance:
        raw["instance"] = {"file": args.instance}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.seeds is not None:
        raw["seeds"] = args.seeds
    if args.command in ("run-dspc", "run-edspc"):
        multicast = args.multicast or instance_is_multicast(raw.get("instance"))
        section = annealer_section(args.command == "run-edspc", multicast)
        for key, attr in (("kind", "schedule_kind"), ("T0", "T0"), ("xi", "xi")):
            if getattr(args, attr) is not None:
                _set_path(raw, f"{section}.schedule.{key}", getattr(args, attr))
        for f in _DSPC_FLAGS:
            v = getattr(args, f.name)
            if v is not None:
                _set_path(raw, f"{section}.{f.name}", v)
    if args.command in ("run-queue", "scan-region"):
        for key in ("psi", "horizon", "solver", "resolve_period"):
            v = getattr(args, key)
            if v is not None:
                _set_path(raw, f"queue.{key}", v)
        if args.axis is not None:
            _set_path(raw, "scan.axis", args.axis)
    for item in args.set:
        if "=" not in item:
            raise ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        key, value = item.split("=", 1)
        _set_path(raw, key, _parse_value(value))
    return raw


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text())
            cfg = parse_config_dict(manifest["config"])
            options = dict(manifest.get("options", {}), jobs=args.jobs)
            return dispatch(cfg, manifest["subcommand"], args.out, options)
        cfg = parse_config_dict(_raw_config(args))
        options = {"jobs": args.jobs}
        if args.command in ("run-dspc", "run-edspc"):
            options["multicast"] = args.multicast
        return dispatch(cfg, args.command, args.out, options)
    except ConfigError as exc:
        print(f"powerctl: {exc}", file=sys.stderr)
        return 2
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        if args.command == "rerun":
            print(f"powerctl: cannot read manifest: {exc}", file=sys.stderr)
            return 2
        print(f"powerctl: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        log.debug("run failed", exc_info=True)
        print(f"powerctl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
