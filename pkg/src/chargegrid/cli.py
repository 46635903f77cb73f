"""Command-line entry point: ``chargegrid <command> --config cfg.json``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import ChargegridError, ConfigError, IngestionError

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
FIXTURE_GRAPH = os.path.join(DATA_DIR, "fixture_graph.json")
FIXTURE_TRIPS = os.path.join(DATA_DIR, "fixture_trips.csv")


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

class Ctx:
    def __init__(self, cfg, base_dir, seed, out_dir, threads, command):
        self.cfg = cfg
        self.base_dir = base_dir
        self.seed = seed
        self.out = out_dir
        self.threads = threads
        self.command = command
        self.inputs = {}
        self.outputs = []

    def path(self, key, default=None):
        value = self.cfg.get(key, default)
        if value is None:
            raise ConfigError(f"config needs '{key}'")
        p = value if os.path.isabs(value) else os.path.join(self.base_dir, value)
        if not os.path.exists(p):
            raise IngestionError(f"input file not found: {p}")
        self.inputs[key] = p
        return p

    def write(self, name, text):
        p = os.path.join(self.out, name)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.outputs.append(name)


def _strict(cfg, allowed, required=(), where="config"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(cfg) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"missing keys in {where}: {missing}")


def _spec(d):
    from .thinning import spec_from_dict
    try:
        return spec_from_dict(d)
    except ChargegridError as exc:
        raise ConfigError(f"bad thinning spec: {exc}") from None


def _grid(g):
    if isinstance(g, list):
        return np.asarray(g, dtype=float)
    if isinstance(g, dict):
        _strict(g, {"start", "stop", "num"}, {"start", "stop", "num"}, "grid")
        return np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
    raise ConfigError("grid must be a list or {start, stop, num}")


def _xy_csv(xs, ys, header=("x", "value")):
    buf = io.StringIO(newline="")
    buf.write(",".join(header) + "\n")
    for x, y in zip(np.atleast_1d(xs), np.atleast_1d(ys)):
        buf.write(f"{float(x)!r},{float(y)!r}\n")
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(ctx: Ctx):
    from .mplp import SimWindow, sample_mplp, thin
    cfg = ctx.cfg
    _strict(cfg, {"lambda", "half_width", "spec"}, {"lambda", "half_width", "spec"})
    city = sample_mplp(float(cfg["lambda"]), SimWindow(float(cfg["half_width"])), ctx.seed)
    city = thin(city, _spec(cfg["spec"]), ctx.seed)
    ctx.write("city.csv", city.to_csv())
    ctx.write("summary.json", _json({"n_vertical": len(city.vx), "n_horizontal": len(city.hy),
                                      "charging_fraction": city.charging_fraction()}))


ANALYZE_QUANTITIES = ("nearest_charging", "nearest_noncharging", "gap_X", "leaf_L35", "metric")


def cmd_analyze(ctx: Ctx):
    from . import analytic
    from .placement import SourceDestPair
    cfg = ctx.cfg
    _strict(cfg, {"spec", "lambda", "sd", "quantity", "axis", "metric", "grid", "method", "event",
                  "n", "rho_units", "pdf"},
            {"spec", "lambda", "sd", "quantity", "grid"})
    spec, lam = _spec(cfg["spec"]), float(cfg["lambda"])
    sd = SourceDestPair.from_dict(cfg["sd"])
    xs = _grid(cfg["grid"])
    q = cfg["quantity"]
    axis = cfg.get("axis", "vertical")
    if q == "nearest_charging":
        fn = analytic.pdf_nearest_charging_given_sd if cfg.get("pdf") else \
            analytic.cdf_nearest_charging_given_sd
        vals = fn(spec, lam, sd, axis, xs)
    elif q == "nearest_noncharging":
        fn = analytic.pdf_nearest_noncharging_given_sd if cfg.get("pdf") else \
            analytic.cdf_nearest_noncharging_given_sd
        vals = fn(spec, lam, sd, axis, xs)
    elif q == "gap_X":
        vals = analytic.cdf_gap_X(spec, lam, sd, axis, xs)
    elif q == "leaf_L35":
        vals = analytic.leaf_L35_metric_cdf(spec, lam, sd, cfg.get("metric", "D_n"), xs,
                                            rho_units=cfg.get("rho_units", "percent"))
    elif q == "metric":
        vals = analytic.metric_cdf_given_sd(spec, lam, sd, cfg.get("metric", "rho_c"), xs,
                                            method=cfg.get("method", "hybrid"),
                                            event=cfg.get("event"), n=int(cfg.get("n", 20000)),
                                            seed=ctx.seed)
    else:
        raise ConfigError(f"quantity must be one of {ANALYZE_QUANTITIES}")
    ctx.write("cdf.csv", _xy_csv(xs, vals))


def cmd_mc(ctx: Ctx):
    from . import mc
    from .placement import placement_from_dict, SourceDestPair
    cfg = ctx.cfg
    _strict(cfg, {"spec", "lambda", "placement", "n", "half_width", "power_kw", "speed_kmh",
                  "event", "grid"}, {"spec", "lambda", "placement", "n"})
    spec, lam = _spec(cfg["spec"]), float(cfg["lambda"])
    placement = placement_from_dict(cfg["placement"])
    kw = {"half_width": cfg.get("half_width"), "power_kw": float(cfg.get("power_kw", 20.0)),
          "speed_kmh": float(cfg.get("speed_kmh", 20.0)), "threads": ctx.threads}
    if cfg.get("event"):
        if not isinstance(placement, SourceDestPair):
            raise ConfigError("event conditioning needs a fixed source/destination placement")
        res = mc.sample_metric_conditioned(spec, lam, placement, cfg["event"], int(cfg["n"]),
                                           ctx.seed, **kw)
    else:
        res = mc.sample_trip_metrics(spec, lam, placement, int(cfg["n"]), ctx.seed, **kw)
    grid = _grid(cfg["grid"]) if "grid" in cfg else None
    summary = {"n": res.n, "acceptance_rate": res.acceptance_rate}
    for name, e in res.cdfs().items():
        ctx.write(f"{name}.csv", e.to_csv(grid))
        summary[name] = {"n": e.n, "finite": len(e.values), "dkw_band": e.band}
    ctx.write("summary.json", _json(summary))


def _graph_and_assignment(ctx, cfg):
    from .mplp import EmpiricalWeights, calibrate
    from .roadnet import assign_charging, load_graph
    from .thinning import MultiCenterPowerLaw
    graph = load_graph(ctx.path("graph"))
    spec = _spec(cfg["spec"])
    centers = cfg.get("centers")
    if centers is None:
        centers = spec.centers if isinstance(spec, MultiCenterPowerLaw) else [(0.0, 0.0)]
    if cfg.get("target") is not None:
        weights = EmpiricalWeights(graph.road_center_distances(centers))
        spec = calibrate(spec, float(cfg["target"]), weights)
    return graph, spec, centers, assign_charging(graph, spec, centers, ctx.seed)


def cmd_assign(ctx: Ctx):
    from .thinning import spec_to_dict
    cfg = ctx.cfg
    _strict(cfg, {"graph", "spec", "centers", "target"}, {"graph", "spec"})
    _, spec, _, a = _graph_and_assignment(ctx, cfg)
    ctx.write("assignment.csv", a.graph.assignment_csv())
    ctx.write("summary.json", _json({"spec": spec_to_dict(spec),
                                      "count_fraction": a.count_fraction,
                                      "length_fraction": a.length_fraction}))


def cmd_route(ctx: Ctx):
    from .roadnet import DEFAULT_SNAP_RADIUS_M, Router, load_trips
    cfg = ctx.cfg
    _strict(cfg, {"graph", "trips", "spec", "centers", "target", "snap_radius_m", "power_kw",
                  "speed_kmh"}, {"graph", "trips", "spec"})
    _, _, _, a = _graph_and_assignment(ctx, cfg)
    trips = load_trips(ctx.path("trips"))
    router = Router(a.graph, float(cfg.get("snap_radius_m", DEFAULT_SNAP_RADIUS_M)),
                    zone_seed=ctx.seed)
    power, speed = float(cfg.get("power_kw", 20.0)), float(cfg.get("speed_kmh", 20.0))
    buf = io.StringIO(newline="")
    buf.write("trip_index,length_m,charged_m,rho_c,d_n_m,e_c_kwh\n")
    for k, t in enumerate(trips):
        r = router.route(t, k, power, speed)
        dn = "" if r.d_n is None else repr(float(r.d_n))
        buf.write(f"{k},{r.total_length!r},{r.charged_length!r},{r.rho_c!r},{dn},{r.e_c!r}\n")
    ctx.write("trips.csv", buf.getvalue())


def _ev(cfg):
    from .evsim import ChargeConfig, EvModel, ev_model
    model = cfg.get("model", "nissan_leaf")
    if isinstance(model, dict):
        _strict(model, {"name", "consumption_rate", "capacity"},
                {"consumption_rate", "capacity"}, "model")
        model = EvModel(model.get("name", "custom"), float(model["consumption_rate"]),
                        float(model["capacity"]))
    else:
        model = ev_model(model)
    charge = cfg.get("charge", {})
    _strict(charge, {"system_power", "speed", "initial_soc"}, (), "charge")
    return model, ChargeConfig(**{k: float(v) for k, v in charge.items()})


def cmd_battery(ctx: Ctx):
    from .evsim import simulate_sequence
    cfg = ctx.cfg
    _strict(cfg, {"trips", "model", "charge"}, {"trips"})
    model, charge = _ev(cfg)
    if isinstance(cfg["trips"], list):
        trips = cfg["trips"]
    else:
        with open(ctx.path("trips"), newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        try:
            trips = [(float(r["length_km"]), float(r["rho_c"])) for r in rows]
        except (KeyError, ValueError):
            raise IngestionError(f"{ctx.inputs['trips']}: needs length_km,rho_c columns") from None
    trace = simulate_sequence(model, charge, trips)
    ctx.write("trace.csv", trace.to_csv())
    ctx.write("summary.json", _json({"model": model.name, "final_soc": trace.final_soc,
                                      "depletion_km": trace.depletion_km,
                                      "clamp_loss_kwh": trace.clamp_loss_kwh}))


def cmd_fit(ctx: Ctx):
    from .roadnet import center_from_traffic
    from .traffic import (dbscan, fit_power_law, load_zone_stats, top_k_cluster_centers,
                          zones_with_center)
    cfg = ctx.cfg
    _strict(cfg, {"zones", "r_min", "center", "exclude", "points", "eps", "min_pts", "k"},
            {"zones", "r_min"})
    zones = load_zone_stats(ctx.path("zones"))
    center = tuple(cfg["center"]) if "center" in cfg else center_from_traffic(zones)
    fit = fit_power_law(zones_with_center(zones, center), float(cfg["r_min"]),
                        exclude=cfg.get("exclude", ()))
    report = {"center": list(center), **fit.to_dict()}
    if "points" in cfg:
        with open(ctx.path("points"), newline="", encoding="utf-8") as fh:
            pts = [(float(r["x"]), float(r["y"])) for r in csv.DictReader(fh)]
        cl = dbscan(pts, float(cfg.get("eps", 200.0)), int(cfg.get("min_pts", 50)))
        report["n_clusters"] = cl.n_clusters
        report["cluster_centers"] = [list(c) for c in
                                     top_k_cluster_centers(cl, int(cfg.get("k", 5)))]
    ctx.write("fit.json", _json(report))


DEFAULT_STRATEGIES = [
    {"name": "power_law", "spec": {"kind": "power_law", "alpha": 1.0, "r_min": 200.0}},
    {"name": "uniform", "spec": {"kind": "uniform", "p": 0.2}},
    {"name": "gaussian", "spec": {"kind": "gaussian", "sigma": 1000.0, "peak": 1.0}},
]


def cmd_compare(ctx: Ctx):
    from .evsim import compare_strategies
    from .roadnet import load_graph, load_trips
    cfg = ctx.cfg
    _strict(cfg, {"graph", "trips", "strategies", "target", "model", "charge", "centers",
                  "snap_radius_m"})
    graph = load_graph(ctx.path("graph", FIXTURE_GRAPH))
    trips = load_trips(ctx.path("trips", FIXTURE_TRIPS))
    strategies = []
    for s in cfg.get("strategies", DEFAULT_STRATEGIES):
        _strict(s, {"name", "spec"}, {"name", "spec"}, "strategy")
        strategies.append((str(s["name"]), _spec(s["spec"])))
    model, charge = _ev(cfg)
    kw = {}
    if "snap_radius_m" in cfg:
        kw["snap_radius"] = float(cfg["snap_radius_m"])
    outcomes = compare_strategies(graph, trips, strategies, model, charge, seed=ctx.seed,
                                  target=cfg.get("target", 0.2), centers=cfg.get("centers"), **kw)
    for o in outcomes:
        ctx.write(os.path.join("traces", f"{o.name}.csv"), o.trace.to_csv())
    ctx.write("summary.json", _json([o.summary() for o in outcomes]))


COMMANDS = {"generate": cmd_generate, "analyze": cmd_analyze, "mc": cmd_mc,
            "assign": cmd_assign, "route": cmd_route, "battery": cmd_battery,
            "fit": cmd_fit, "compare": cmd_compare}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="chargegrid", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file (optional for compare)")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--threads", type=int, default=None)
    return p


def _load_config(path):
    if path is None:
        return {}, os.getcwd(), None
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        cfg = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return cfg, os.path.dirname(os.path.abspath(path)), raw


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg, base, _ = _load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
        cfg.pop("seed", None)
        threads = args.threads
        if threads is None and os.environ.get("CHARGEGRID_THREADS"):
            threads = int(os.environ["CHARGEGRID_THREADS"])
        os.makedirs(args.out, exist_ok=True)
        ctx = Ctx(cfg, base, seed, args.out, threads, args.command)
        COMMANDS[args.command](ctx)
        canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
        manifest = {
            "command": args.command,
            "config_sha256": hashlib.sha256(canonical).hexdigest(),
            "seed": seed,
            "inputs": {k: {"path": p, "sha256": _sha256_file(p)}
                       for k, p in sorted(ctx.inputs.items())},
            "outputs": sorted(ctx.outputs),
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8",
                  newline="\n") as fh:
            fh.write(_json(manifest))
        return 0
    except ChargegridError as exc:
        print(f"chargegrid {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"chargegrid {args.command}: bad configuration: {exc}", file=sys.stderr)
        return ConfigError.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
