"""Command line front end: single runs, sweeps and figure presets.

Examples:
    clashsim --scheme clash --sweep seq=0:100:5 --out seq.csv
    clashsim --preset fig3-size --seeds 1,2,3 --jobs 4 --out size.csv
    clashsim --trace io.trace --scheme dftl --out trace.csv

Sweep axes: seq and local take percentages, size takes pages, reqnum
takes request counts. Values are either start:end:step or a comma
list. A config file holds 'key = value' lines with the same field
names as the run configuration.

Exit status: 0 all runs fine, 1 at least one run failed, 2 bad usage.
"""

import argparse
import json
import sys
from dataclasses import fields, replace
from multiprocessing import Pool

from . import __version__
from .engine import SCHEMES, RunConfig, config_as_dict, run
from .report import CSV_COLUMNS, SummaryRow, make_row, write_csv
from .workload import derive_seed

# axis alias -> (config field, scale)
_AXES = {
    "seq": ("seq_rate", 0.01),
    "local": ("locality_rate", 0.01),
    "size": ("mean_req_size", 1),
    "reqnum": ("request_count", 1),
    "seq_rate": ("seq_rate", 1),
    "locality_rate": ("locality_rate", 1),
    "mean_req_size": ("mean_req_size", 1),
    "request_count": ("request_count", 1),
}

# name -> list of (axis_field, values, extra overrides)
PRESETS = {
    "fig3-seq": [("seq_rate", [i / 100 for i in range(0, 101, 5)], {})],
    "fig3-local": [("locality_rate", [i / 100 for i in range(0, 101, 10)], {})],
    "fig3-size": [("mean_req_size", [1, 2, 4, 8, 16, 32, 64, 128],
                   {"seq_rate": 0.0, "locality_rate": 0.2})],
    "fig4-reqnum": [
        ("request_count", [10000, 20000, 40000, 60000, 80000],
         {"mean_req_size": 6, "seq_rate": 0.0, "axis_label": "reqnum_random"}),
        ("request_count", [10000, 20000, 40000, 60000, 80000],
         {"mean_req_size": 6, "seq_rate": 1.0, "axis_label": "reqnum_sequential"}),
    ],
}

_CONFIG_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def parse_args(argv=None):
    p = argparse.ArgumentParser(
        prog="clashsim",
        description="Flash cache and translation layer simulator")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--scheme",
                   help="comma list of schemes to run (default: all for "
                        "presets and sweeps, clash otherwise)")
    p.add_argument("--sweep", metavar="AXIS=SPEC",
                   help="axis=start:end:step or axis=v1,v2,... "
                        "(axes: seq, local, size, reqnum)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--trace", help="replay a trace file instead of generating")
    p.add_argument("--out", default="results.csv", help="CSV output path")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--seeds", help="comma list of seeds (one row set each)")
    p.add_argument("--requests", type=int,
                   help="override request_count everywhere")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes")
    p.add_argument("--final-flush", action="store_true",
                   help="drain caches to flash after the last request")
    ns = p.parse_args(argv)
    if ns.jobs < 1:
        p.error("--jobs must be at least 1")
    if ns.sweep and ns.preset:
        p.error("--sweep and --preset are mutually exclusive")
    if ns.trace and (ns.sweep or ns.preset):
        p.error("--trace runs a single workload, not a sweep")
    ns.parser = p
    return ns


def _coerce(name, raw):
    kind = _CONFIG_FIELDS[name]
    kind = getattr(kind, "__name__", kind)  # type object or annotation string
    raw = raw.strip()
    if kind == "bool" or name == "final_flush":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean {raw!r} for {name}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for no, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{no}: expected key = value")
            key, _, value = text.partition("=")
            key = key.strip()
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"{path}:{no}: unknown key {key!r}")
            out[key] = _coerce(key, value)
    return out


def parse_sweep(spec):
    axis, eq, body = spec.partition("=")
    axis = axis.strip()
    if not eq or axis not in _AXES:
        raise ValueError(f"bad sweep spec {spec!r}, axes: "
                         + ", ".join(sorted(set(_AXES))))
    field_name, scale = _AXES[axis]
    body = body.strip()
    if ":" in body:
        parts = body.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad sweep range {body!r}, want start:end:step")
        start, end, step = (float(x) for x in parts)
        if step <= 0 or end < start:
            raise ValueError(f"bad sweep range {body!r}")
        raw = []
        v = start
        while v <= end + 1e-9:
            raw.append(v)
            v += step
    else:
        raw = [float(x) for x in body.split(",") if x.strip()]
        if not raw:
            raise ValueError(f"empty sweep values in {spec!r}")
    if field_name in ("mean_req_size", "request_count"):
        values = [int(round(v * scale)) for v in raw]
    else:
        values = [round(v * scale, 10) for v in raw]
    return field_name, values


def _run_task(task):
    """Worker body; must stay importable for multiprocessing."""
    cfg, axis, axis_value, user_seed = task
    try:
        metrics = run(cfg)
    except Exception as exc:  # surface per-row, keep siblings running
        return ("error", axis, axis_value, user_seed, cfg.scheme,
                f"{type(exc).__name__}: {exc}", config_as_dict(cfg))
    if not metrics.valid:
        return ("error", axis, axis_value, user_seed, cfg.scheme,
                metrics.error, config_as_dict(cfg))
    row = make_row(metrics, axis, axis_value, user_seed)
    return ("ok", row, config_as_dict(cfg))


def build_tasks(ns, overrides):
    base = RunConfig(**overrides)
    if ns.requests is not None:
        base = replace(base, request_count=ns.requests)
    if ns.final_flush:
        base = replace(base, final_flush=True)
    if ns.trace:
        base = replace(base, trace=ns.trace)

    if ns.scheme:
        schemes = [s.strip() for s in ns.scheme.split(",") if s.strip()]
        if schemes == ["all"]:
            schemes = list(SCHEMES)
        for s in schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")
    elif ns.preset or ns.sweep:
        schemes = list(SCHEMES)
    else:
        schemes = [base.scheme]

    seeds = [ns.seed]
    if ns.seeds:
        seeds = [int(s) for s in ns.seeds.split(",") if s.strip()]
        if not seeds:
            raise ValueError("empty --seeds list")

    groups = []
    if ns.preset:
        for axis_field, values, extra in PRESETS[ns.preset]:
            extra = dict(extra)
            label = extra.pop("axis_label", axis_field)
            groups.append((axis_field, label, values, extra))
    elif ns.sweep:
        axis_field, values = parse_sweep(ns.sweep)
        groups.append((axis_field, axis_field, values, {}))
    else:
        groups.append((None, "none", [0], {}))

    tasks = []
    for axis_field, label, values, extra in groups:
        for value in values:
            for scheme in schemes:
                for seed in seeds:
                    cfg = replace(base, scheme=scheme, **extra)
                    if axis_field is not None:
                        point_seed = derive_seed(seed, label, value)
                        cfg = replace(cfg, **{axis_field: value},
                                      seed=point_seed)
                    else:
                        cfg = replace(cfg, seed=seed)
                    tasks.append((cfg, label, value, seed))
    return tasks


def execute(ns) -> int:
    overrides = load_config_file(ns.config) if ns.config else {}
    tasks = build_tasks(ns, overrides)
    if ns.jobs > 1:
        with Pool(ns.jobs) as pool:
            results = pool.map(_run_task, tasks, chunksize=1)
    else:
        results = [_run_task(t) for t in tasks]

    rows = []
    sidecar_rows = []
    failures = 0
    for res in results:
        if res[0] == "ok":
            _, row, cfg_dict = res
            rows.append(row)
            sidecar_rows.append({"row": {c: getattr(row, c) for c in CSV_COLUMNS},
                                 "config": cfg_dict})
        else:
            _, axis, value, seed, scheme, message, cfg_dict = res
            failures += 1
            print(f"run failed: scheme={scheme} {axis}={value} seed={seed}: "
                  f"{message}", file=sys.stderr)
            sidecar_rows.append({"error": message, "config": cfg_dict})
    if rows:
        write_csv(rows, ns.out)
        sidecar = {
            "tool": "clashsim",
            "version": __version__,
            "wsd_definition": "population stddev of per-block erase counts "
                              "divided by their mean, over blocks_counted "
                              "blocks",
            "time_units": "device latencies in microseconds, responses "
                          "reported in milliseconds",
            "rows": sorted(sidecar_rows,
                           key=lambda r: json.dumps(r, sort_keys=True)),
        }
        with open(ns.out + ".meta.json", "w") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"wrote {len(rows)} rows to {ns.out}")
    return 1 if failures else 0


def main(argv=None):
    ns = parse_args(argv)
    try:
        code = execute(ns)
    except (ValueError, OSError) as exc:
        ns.parser.error(str(exc))  # exits 2
        return 2
    sys.exit(code)


if __name__ == "__main__":
    main()
