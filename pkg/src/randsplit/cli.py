"""Command-line experiment runner.

Every command writes into ``--out`` and refreshes ``manifest.txt`` there.
Outputs depend only on the configuration and seeds, so re-runs are
byte-identical; wall-clock times go to stderr only.

Exit codes: 0 all checks passed, 1 a check failed or a monitor fired,
2 bad usage, bad configuration or incompatible parameters.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import _kernels as K
from .engine import (
    DEFAULT_TOL,
    MonitorBreach,
    Monitors,
    SeedConfig,
    TimeDistribution,
    splitting_convergence,
    state_moments,
)
from .flows import RotationFlowSpec, shear_deviation, shear_matrix
from .lyapunov import DEFAULT_BATCHES, convergence_trace, default_burn_in
from .models import EulerModel, LorenzModel, conserved_quantities

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value parsers


def _int_list(s: str) -> list[int]:
    try:
        vals = [int(float(v)) if "e" in v.lower() else int(v) for v in str(s).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers, got {s!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(s: str) -> list[float]:
    try:
        vals = [float(v) for v in str(s).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected numbers, got {s!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _count(s: str) -> int:
    """Integer that may be written as ``1e6``."""
    try:
        v = float(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from exc
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}")
    return int(v)


def _frame(s: str) -> int | str:
    if str(s).strip().lower() == "full":
        return "full"
    return _count(s)


def _seeds(s: str) -> list[int]:
    """``K`` means streams 0..K-1; a comma-separated list names streams explicitly."""
    s = str(s).strip()
    if "," in s:
        return _int_list(s)
    k = _count(s)
    if k < 1:
        raise argparse.ArgumentTypeError("--seeds must be at least 1")
    return list(range(k))


# ---------------------------------------------------------------------------
# argument parser; every option defaults to SUPPRESS so config values can
# sit between the built-in defaults and the command line


OPTIONS = {
    "model": dict(choices=["lorenz", "euler"], help="model family (default: lorenz)"),
    "n": dict(type=_int_list, help="Lorenz dimension n >= 4; comma list sweeps (default: 4)"),
    "N": dict(type=_int_list, help="Euler truncation N >= 3; comma list sweeps (default: 3)"),
    "radius": dict(type=float, help="Lorenz sphere radius R (default: 1)"),
    "enstrophy": dict(type=float, help="Euler enstrophy |q|^2 target (default: 1)"),
    "energy": dict(type=float, help="Euler energy sum |q_k|^2/|k|^2 target (default: 0.5)"),
    "beta": dict(type=float, help="Euler certification parameter beta (default: 0.5 of its upper bound)"),
    "h": dict(type=_float_list, help="time scale h; comma list sweeps (default: 1)"),
    "h_grid": dict(type=_float_list, help="descending h values, at least 3 (default: 0.1,0.05,0.025)"),
    "dist": dict(choices=["exp", "uniform"], help="mean-one law of the cycle times (default: exp)"),
    "steps": dict(type=_count, help="number of cycles m"),
    "burn_in": dict(type=_count, help="discarded cycles (default: 1%% of m, at least 1000, at most m/10)"),
    "frame": dict(type=_frame, help="tangent frame size k, or 'full' (default: 1)"),
    "seed": dict(type=_count, help="master seed (default: 0)"),
    "seeds": dict(type=_seeds, help="stream count K (streams 0..K-1) or comma list of streams (default: 1)"),
    "workers": dict(type=_count, help="parallel worker processes (default: 1)"),
    "out": dict(help="output directory (default: out)"),
    "tol": dict(type=float, help="integrator tolerance, or pass threshold for shear-check"),
    "batches": dict(type=_count, help="batch count for standard errors (default: 50)"),
    "drift_tol": dict(type=float, help="relative conserved-quantity drift that aborts a run (default: 1e-6)"),
    "trace_stride": dict(type=_count, help="cycles between trace points (default: m/1000)"),
    "thin": dict(type=_count, help="cycles between dumped states (default: 1)"),
    "T": dict(type=float, help="end time of the convergence test (default: 1)"),
    "x": dict(type=_float_list, help="initial point as a comma list (default: random from the seed)"),
    "field": dict(type=_int_list, help="1-based field numbers j of V_j; comma list (default: all rotation fields)"),
}

COMMON = ("model", "n", "N", "radius", "enstrophy", "energy", "out", "workers", "tol")

COMMANDS = {
    "lyapunov": dict(
        help="Lyapunov exponents over a (parameter, h, seed) grid",
        options=COMMON + ("h", "dist", "steps", "burn_in", "frame", "seed", "seeds", "batches",
                          "drift_tol", "trace_stride"),
        defaults=dict(h=[1.0], dist="exp", steps=100_000, burn_in=None, frame=1, seed=0, seeds=[0],
                      batches=DEFAULT_BATCHES, drift_tol=1e-6, trace_stride=None, tol=DEFAULT_TOL),
    ),
    "certify": dict(
        help="Lie bracket rank certification at the explicit test points",
        options=COMMON + ("beta",),
        defaults=dict(beta=None, tol=1e-10),
    ),
    "shear-check": dict(
        help="check D(phi_{t_m}) = I + m A for the rotation fields",
        options=COMMON + ("seed", "x", "field"),
        defaults=dict(seed=0, x=None, field=None, tol=1e-10),
    ),
    "convergence": dict(
        help="h -> 0 convergence of deterministic splitting to the true field",
        options=COMMON + ("h_grid", "T", "seed", "x"),
        defaults=dict(h_grid=[0.1, 0.05, 0.025], T=1.0, seed=0, x=None, tol=DEFAULT_TOL),
    ),
    "ergodic-check": dict(
        help="time average of x_1^2 against the uniform-sphere moment R^2/n (Lorenz)",
        options=COMMON + ("h", "dist", "steps", "burn_in", "seed", "seeds", "batches", "x"),
        defaults=dict(h=[1.0], dist="exp", steps=1_000_000, burn_in=0, seed=0, seeds=[0],
                      batches=DEFAULT_BATCHES, x=None, tol=DEFAULT_TOL),
    ),
    "simulate": dict(
        help="dump a (thinned) state trajectory",
        options=COMMON + ("h", "dist", "steps", "seed", "seeds", "thin", "x"),
        defaults=dict(h=[1.0], dist="exp", steps=1000, seed=0, seeds=[0], thin=1, x=None,
                      tol=DEFAULT_TOL),
    ),
}

BASE_DEFAULTS = dict(model="lorenz", n=[4], N=[3], radius=1.0, enstrophy=1.0, energy=0.5,
                     out="out", workers=1)


def _flag(dest: str) -> str:
    return "--" + dest.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randsplit",
        description="Random splitting experiments: Lyapunov exponents, bracket certification and checks.",
        epilog="Exit codes: 0 pass, 1 check failed or monitor breach, 2 usage or configuration error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        p = sub.add_parser(
            name,
            help=spec["help"],
            description=spec["help"],
            argument_default=argparse.SUPPRESS,
            epilog="A --config file holds 'key = value' lines ('#' starts a comment); keys are the "
                   "long option names. Command-line flags override the file.",
        )
        p.add_argument("--config", help="flat key = value configuration file")
        for dest in spec["options"]:
            p.add_argument(_flag(dest), dest=dest, **OPTIONS[dest])
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path: str, sub: argparse.ArgumentParser) -> dict:
    """Parse a flat ``key = value`` file with the subcommand's own converters."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        act = actions[dest]
        try:
            v = act.type(val) if act.type is not None else val
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: {key}: {exc}") from exc
        if act.choices is not None and v not in act.choices:
            raise ConfigError(f"{path}:{lineno}: {key}: {v!r} not in {sorted(act.choices)}")
        out[dest] = v
    return out


def resolve(argv: list[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cmd = ns.command
    vals = dict(BASE_DEFAULTS)
    vals.update(COMMANDS[cmd]["defaults"])
    cli = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    if getattr(ns, "config", None):
        vals.update(read_config(ns.config, _subparser(parser, cmd)))
    vals.update(cli)
    vals["command"] = cmd
    return argparse.Namespace(**vals)


# ---------------------------------------------------------------------------
# shared helpers


def _model(cfg: dict):
    if cfg["model"] == "lorenz":
        if cfg["n"] < 4:
            raise ConfigError(f"Lorenz model needs n >= 4, got {cfg['n']}")
        return LorenzModel(cfg["n"], cfg["radius"])
    return EulerModel(cfg["N"], cfg["enstrophy"], cfg["energy"])


def _model_keys(args) -> dict:
    if args.model == "lorenz":
        return {"model": "lorenz", "radius": args.radius}
    return {"model": "euler", "enstrophy": args.enstrophy, "energy": args.energy}


def _model_grid(args) -> list[dict]:
    base = _model_keys(args)
    if args.model == "lorenz":
        return [dict(base, n=n) for n in args.n]
    return [dict(base, N=N) for N in args.N]


def _single_model(args) -> dict:
    grid = _model_grid(args)
    if len(grid) != 1:
        raise ConfigError(f"{args.command} takes a single model size")
    return grid[0]


def run_id(cfg: dict) -> str:
    canon = ";".join(f"{k}={_canon(cfg[k])}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _canon(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_canon(u) for u in v) + "]"
    return str(v)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _params_tag(cfg: dict) -> str:
    keys = [k for k in ("model", "n", "N", "radius", "enstrophy", "energy", "beta") if cfg.get(k) is not None]
    return "_".join(f"{k}{_fmt(cfg[k])}" if k != "model" else cfg[k] for k in keys)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_manifest(out: Path) -> Path:
    """``manifest.txt``: sorted relative paths with their sha256, no timestamps."""
    lines = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.txt":
            digest = hashlib.sha256(p.read_bytes()).hexdigest()
            lines.append(f"{digest}  {p.relative_to(out).as_posix()}")
    path = out / "manifest.txt"
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    return path


def _map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _dist(cfg: dict) -> TimeDistribution:
    return TimeDistribution(cfg["dist"], cfg["h"])


def _start_point(model, cfg: dict, seed: SeedConfig):
    if cfg.get("x") is None:
        return model.random_point(seed.generator("init"))
    x = np.asarray(cfg["x"], dtype=float)
    if x.shape != (model.dimension,):
        raise ConfigError(f"--x needs {model.dimension} coordinates, got {x.size}")
    return x


# ---------------------------------------------------------------------------
# lyapunov


RESULT_HEADER = [
    "schema_version", "run_id", "model", "size", "radius", "enstrophy", "energy", "dist", "h",
    "steps", "burn_in", "frame", "seed", "stream", "tol", "status", "index", "exponent",
    "stderr", "exponent_per_time", "stderr_per_time", "lambda_sum", "drift_max_1", "drift_max_2",
]


def _lyapunov_task(cfg: dict) -> dict:
    model = _model(cfg)
    k = model.tangent_dimension if cfg["frame"] == "full" else cfg["frame"]
    seed = SeedConfig(cfg["seed"], cfg["stream"])
    m = cfg["steps"]
    stride = cfg["trace_stride"] or max(1, m // 1000)
    t0 = time.perf_counter()
    try:
        tr = convergence_trace(model, _dist(cfg), seed, m, stride, k=k, burn_in=cfg["burn_in"],
                               batches=cfg["batches"], tol=cfg["tol"],
                               monitors=Monitors(cfg["drift_tol"]))
    except MonitorBreach as exc:
        return {"cfg": cfg, "status": "monitor_breach", "message": str(exc),
                "wall": time.perf_counter() - t0}
    est = tr.final
    return {"cfg": cfg, "status": "ok", "est": est, "trace": (tr.steps, tr.estimates),
            "burn_in": tr.burn_in, "wall": time.perf_counter() - t0}


def cmd_lyapunov(args) -> int:
    if args.steps < 1:
        raise ConfigError("--steps must be positive")
    if any(h < 0 for h in args.h):
        raise ConfigError("--h must be nonnegative")
    if isinstance(args.frame, int) and args.frame < 1:
        raise ConfigError("--frame must be positive or 'full'")
    tasks = []
    for mk, h, stream in itertools.product(_model_grid(args), args.h, args.seeds):
        burn = default_burn_in(args.steps) if args.burn_in is None else args.burn_in
        cfg = dict(mk, h=h, dist=args.dist, steps=args.steps, burn_in=burn, frame=args.frame,
                   seed=args.seed, stream=stream, batches=args.batches, tol=args.tol,
                   drift_tol=args.drift_tol, trace_stride=args.trace_stride)
        _model(cfg)  # validate parameters before spawning work
        cfg["run_id"] = run_id(cfg)
        tasks.append(cfg)
    results = _map(_lyapunov_task, tasks, args.workers)
    results.sort(key=lambda r: r["cfg"]["run_id"])
    out = Path(args.out)
    rows = []
    ok = True
    for r in results:
        cfg = r["cfg"]
        rid = cfg["run_id"]
        size = cfg.get("n", cfg.get("N"))
        head = [SCHEMA_VERSION, rid, cfg["model"], size, cfg.get("radius"), cfg.get("enstrophy"),
                cfg.get("energy"), cfg["dist"], cfg["h"], cfg["steps"], cfg["burn_in"], cfg["frame"],
                cfg["seed"], cfg["stream"], cfg["tol"]]
        print(f"{rid} wall {r['wall']:.2f}s", file=sys.stderr)
        if "est" not in r:
            ok = False
            rows.append(head + [r["status"]] + [None] * 8)
            print(f"{rid}: {r['message']}", file=sys.stderr)
            continue
        est = r["est"]
        ok &= r["status"] == "ok"
        drift = list(est.drift_max) + [None] * (2 - len(est.drift_max))
        for i in range(est.k):
            rows.append(head + [r["status"], i + 1, est.exponents[i], est.stderr[i], est.per_time[i],
                                est.stderr_per_time[i], est.lambda_sum] + drift)
        steps, vals = r["trace"]
        write_csv(out / rid / f"trace_{rid}.csv",
                  ["step"] + [f"lambda_{i + 1}" for i in range(vals.shape[1])],
                  ([int(s)] + list(v) for s, v in zip(steps, vals)))
        print(f"{rid} {cfg['model']} size={size} h={_fmt(cfg['h'])} stream={cfg['stream']} "
              f"lambda_1={est.top:.6g} stderr={est.stderr[0]:.3g} status={r['status']}")
    write_csv(out / "results.csv", RESULT_HEADER, rows)
    write_manifest(out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# certify


def _certify_task(cfg: dict) -> dict:
    from .certifier import certify_euler, certify_lorenz

    if cfg["model"] == "lorenz":
        c = certify_lorenz(cfg["n"], cfg["radius"], cfg["tol"])
    else:
        c = certify_euler(cfg["N"], cfg["enstrophy"], cfg["energy"], cfg["beta"], cfg["tol"])
    return {"cfg": cfg, "report": c.to_dict()}


def cmd_certify(args) -> int:
    tasks = []
    for mk in _model_grid(args):
        cfg = dict(mk, tol=args.tol)
        if args.model == "euler":
            cfg["beta"] = args.beta
            _model(cfg)  # compatibility of the conserved targets
        elif mk["n"] < 4:
            raise ConfigError(f"Lorenz certification needs n >= 4, got {mk['n']}")
        tasks.append(cfg)
    results = _map(_certify_task, tasks, args.workers)
    out = Path(args.out)
    ok = True
    for r in results:
        rep = r["report"]
        ok &= rep["pass"]
        write_json(out / f"certify_{_params_tag(r['cfg'])}.json", rep)
        rk = rep["rank"]
        print(f"certify {_params_tag(r['cfg'])}: shape {tuple(rk['shape'])} rank {rk['rank']}/"
              f"{rk['target']} dets {sum(d['pass'] for d in rep['determinants'])}/"
              f"{len(rep['determinants'])} {'PASS' if rep['pass'] else 'FAIL'}")
    write_manifest(out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# shear-check


def cmd_shear_check(args) -> int:
    mk = _single_model(args)
    model = _model(mk)
    x = _start_point(model, args.__dict__, SeedConfig(args.seed, 0))
    rot = [j + 1 for j in range(model.n_fields) if model.kinds[j] == K.ROTATION]
    fields = rot if args.field is None else args.field
    rows, worst, amax = [], 0.0, 0.0
    for j in fields:
        if j not in rot:
            raise ConfigError(f"field {j} is not a rotation (diagonal) field")
        i0, i1, i2 = (int(v) for v in model.idx[j - 1])
        spec = RotationFlowSpec(i0, i1, i2, float(model.coef[j - 1, 0]))
        if x[spec.r] == 0.0:
            raise ConfigError(f"field {j}: rate coordinate x[{spec.r}] is zero")
        # rounding of the angle 2 pi m is amplified by |A|, so report it alongside
        amax = max(amax, float(np.max(np.abs(shear_matrix(x, spec)))))
        for m, dev, dev_prod in shear_deviation(x, spec):
            worst = max(worst, dev, dev_prod)
            rows.append([j, spec.p, spec.q, spec.r, spec.c, m, dev, dev_prod])
    cfg = dict(mk, seed=args.seed)
    rid = run_id(dict(cfg, x=list(map(float, x)), field=list(fields)))
    out = Path(args.out)
    write_csv(out / f"shear_{_params_tag(cfg)}_{rid}.csv",
              ["field", "p", "q", "r", "c", "m", "deviation_direct", "deviation_product"], rows)
    passed = worst <= args.tol
    write_json(out / f"shear_{_params_tag(cfg)}_{rid}.json",
               {"params": cfg, "x": x, "fields": list(fields), "max_deviation": worst, "max_abs_A": amax,
                "threshold": args.tol, "pass": passed})
    write_manifest(out)
    print(f"shear-check {_params_tag(cfg)}: {len(fields)} fields, max deviation {worst:.3e} "
          f"max|A| {amax:.3g} (threshold {args.tol:g}) {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# convergence


def cmd_convergence(args) -> int:
    mk = _single_model(args)
    model = _model(mk)
    grid = list(args.h_grid)
    if len(grid) < 3:
        raise ConfigError("--h-grid needs at least 3 points")
    if any(b >= a for a, b in zip(grid, grid[1:])) or grid[-1] <= 0:
        raise ConfigError("--h-grid must be positive and strictly descending")
    x0 = _start_point(model, args.__dict__, SeedConfig(args.seed, 0))
    rep = splitting_convergence(model, x0, grid, args.T, args.tol)
    passed = rep.order >= 0.8 and rep.errors[-1] < rep.errors[0]
    cfg = dict(mk, seed=args.seed, T=args.T)
    tag = _params_tag(cfg)
    out = Path(args.out)
    write_csv(out / f"convergence_{tag}.csv", ["h", "error"], zip(rep.h, rep.errors))
    write_json(out / f"convergence_{tag}.json",
               {"params": cfg, "x0": x0, "h": rep.h, "errors": rep.errors, "ratios": rep.ratios,
                "order": rep.order, "threshold": 0.8, "pass": passed})
    write_manifest(out)
    print(f"convergence {tag}: errors {', '.join('%.3e' % e for e in rep.errors)} "
          f"order {rep.order:.3f} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# ergodic-check


def _ergodic_task(cfg: dict) -> dict:
    model = _model(cfg)
    seed = SeedConfig(cfg["seed"], cfg["stream"])
    x0 = _start_point(model, cfg, seed)
    means, counts = state_moments(model, _dist(cfg), seed, cfg["steps"], cfg["batches"],
                                  cfg["burn_in"], x0, cfg["tol"])
    b = means[:, 0]
    avg = float(np.dot(b, counts) / counts.sum())
    se = float(b.std(ddof=1) / math.sqrt(b.size))
    target = cfg["radius"] ** 2 / cfg["n"]
    return {"cfg": cfg, "average": avg, "stderr": se, "target": target,
            "pass": abs(avg - target) <= 3.0 * se}


def cmd_ergodic_check(args) -> int:
    if args.model != "lorenz":
        raise ConfigError("ergodic-check supports the Lorenz model only")
    mk = _single_model(args)
    model = _model(mk)
    if args.x is not None:
        x = np.asarray(args.x, dtype=float)
        if x.shape != (model.dimension,):
            raise ConfigError(f"--x needs {model.dimension} coordinates, got {x.size}")
        if not model.is_generic(x):
            raise ConfigError("initial point is not generic: sum_j (x_j^2 + x_{j+1}^2) x_{j-1}^2 "
                              "vanishes, so the orbit misses the generic level set")
    if not (0 <= args.burn_in < args.steps) or args.steps - args.burn_in < args.batches:
        raise ConfigError("--steps too small for --burn-in and --batches")
    if len(args.h) != 1:
        raise ConfigError("ergodic-check takes a single --h")
    tasks = []
    for stream in args.seeds:
        cfg = dict(mk, h=args.h[0], dist=args.dist, steps=args.steps, burn_in=args.burn_in,
                   seed=args.seed, stream=stream, batches=args.batches, tol=args.tol, x=args.x)
        cfg["run_id"] = run_id(cfg)
        tasks.append(cfg)
    results = sorted(_map(_ergodic_task, tasks, args.workers), key=lambda r: r["cfg"]["run_id"])
    out = Path(args.out)
    write_csv(out / f"ergodic_{_params_tag(mk)}.csv",
              ["schema_version", "run_id", "stream", "h", "steps", "average_x1_sq", "stderr", "target",
               "pass"],
              ([SCHEMA_VERSION, r["cfg"]["run_id"], r["cfg"]["stream"], r["cfg"]["h"], r["cfg"]["steps"],
                r["average"], r["stderr"], r["target"], int(r["pass"])] for r in results))
    write_manifest(out)
    for r in results:
        print(f"ergodic {r['cfg']['run_id']} stream={r['cfg']['stream']}: <x_1^2> = {r['average']:.6f} "
              f"target {r['target']:.6f} stderr {r['stderr']:.2e} {'PASS' if r['pass'] else 'FAIL'}")
    return EXIT_OK if all(r["pass"] for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# simulate


def _simulate_task(cfg: dict) -> dict:
    from .engine import run_trajectory

    model = _model(cfg)
    seed = SeedConfig(cfg["seed"], cfg["stream"])
    x0 = _start_point(model, cfg, seed)
    thin = cfg["thin"]
    m = cfg["steps"]
    keep_steps, keep_x = [0], [x0.copy()]

    def grab(done, _logs, xs):
        steps = np.arange(done + 1, done + xs.shape[0] + 1)
        sel = (steps % thin == 0) | (steps == m)
        keep_steps.extend(steps[sel].tolist())
        keep_x.extend(xs[sel].copy())

    run_trajectory(model, _dist(cfg), seed, m, k=0, x0=x0, tol=cfg["tol"], on_chunk=grab)
    X = np.array(keep_x)
    names = list(conserved_quantities(model, x0))
    C = np.array([model.conserved(x) for x in X])
    return {"cfg": cfg, "steps": keep_steps, "X": X, "C": C, "names": names}


def cmd_simulate(args) -> int:
    if args.steps < 1 or args.thin < 1:
        raise ConfigError("--steps and --thin must be positive")
    if len(args.h) != 1:
        raise ConfigError("simulate takes a single --h")
    mk = _single_model(args)
    tasks = []
    for stream in args.seeds:
        cfg = dict(mk, h=args.h[0], dist=args.dist, steps=args.steps, seed=args.seed, stream=stream,
                   thin=args.thin, tol=args.tol, x=args.x)
        _model(cfg)
        cfg["run_id"] = run_id(cfg)
        tasks.append(cfg)
    results = sorted(_map(_simulate_task, tasks, args.workers), key=lambda r: r["cfg"]["run_id"])
    out = Path(args.out)
    for r in results:
        rid = r["cfg"]["run_id"]
        D = r["X"].shape[1]
        write_csv(out / rid / f"states_{rid}.csv",
                  ["step"] + [f"x_{i + 1}" for i in range(D)] + r["names"],
                  ([s] + list(x) + list(c) for s, x, c in zip(r["steps"], r["X"], r["C"])))
        print(f"simulate {rid} stream={r['cfg']['stream']}: {len(r['steps'])} states")
    write_manifest(out)
    return EXIT_OK


HANDLERS = {
    "lyapunov": cmd_lyapunov,
    "certify": cmd_certify,
    "shear-check": cmd_shear_check,
    "convergence": cmd_convergence,
    "ergodic-check": cmd_ergodic_check,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = resolve(argv)
    except ConfigError as exc:
        print(f"randsplit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    if getattr(args, "workers", 1) < 1:
        print("randsplit: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        code = HANDLERS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"randsplit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MonitorBreach as exc:
        print(f"randsplit: monitor breach: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"wall time {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
