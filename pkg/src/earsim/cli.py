"""Command-line front end.

Subcommands:
  run          execute one scenario, writing traces + summary.json
  compare      AODV vs EAR on matched seeds, writing comparison.csv
  sweep        parameter sweep over nodes/connections/speed/pause,
               writing sweep.csv and per-metric figures
  power-table  distance -> required transmit power table (CSV)

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys

from .engine import Simulation
from .radio import RadioParams, required_tx_power
from .scenario import ScenarioError, build_scenario

# (field, cli flag, type); booleans get --flag/--no-flag pairs.
_FLOAT_FIELDS = [
    "area_width", "area_height", "pause_time", "speed_min", "speed_max",
    "traffic_rate", "sim_duration", "initial_energy", "tx_power_common",
    "rx_power", "idle_power", "sleep_power", "transition_power", "bandwidth",
    "frequency", "rx_threshold", "common_range", "t_wait", "rreq_backoff",
    "power_margin", "tx_power_offset",
]
_INT_FIELDS = [
    "node_count", "connection_count", "traffic_packet_size",
    "control_packet_size", "rreq_retries", "buffer_limit", "rng_seed",
]
_BOOL_FIELDS = ["reply_all", "intermediate_collect", "charge_overhearers",
                "use_friis_common_power"]
_CHOICE_FIELDS = {
    "protocol": ["AODV", "EAR"],
    "energy_model": ["PER_PACKET_EQ", "POWER_DURATION"],
    "window_anchor": ["first_rrep", "rreq_sent"],
}
_ALIASES = {"node_count": ["--nodes"], "rng_seed": ["--seed"]}


def _add_config_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("scenario overrides")
    for name in _INT_FIELDS:
        flags = [f"--{name.replace('_', '-')}"] + _ALIASES.get(name, [])
        group.add_argument(*flags, dest=name, type=int, default=None)
    for name in _FLOAT_FIELDS:
        group.add_argument(f"--{name.replace('_', '-')}", dest=name,
                           type=float, default=None)
    for name, choices in _CHOICE_FIELDS.items():
        group.add_argument(f"--{name.replace('_', '-')}", dest=name,
                           type=str.upper if name != "window_anchor" else str.lower,
                           choices=choices, default=None)
    for name in _BOOL_FIELDS:
        group.add_argument(f"--{name.replace('_', '-')}", dest=name,
                           action=argparse.BooleanOptionalAction, default=None)


def _collect_overrides(args: argparse.Namespace) -> dict:
    fields = _INT_FIELDS + _FLOAT_FIELDS + _BOOL_FIELDS + list(_CHOICE_FIELDS)
    return {name: getattr(args, name) for name in fields
            if getattr(args, name, None) is not None}


def _load_raw(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    if not text.strip():
        return {}
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario document must be a single JSON object")
    return raw


def _run_raw(raw: dict) -> dict:
    """Worker: build and execute one run from a plain field dict."""
    report = Simulation(build_scenario(raw)).run()
    return report.to_dict()


def _run_batch(raw_configs: list[dict], jobs: int) -> list[dict]:
    if jobs <= 1 or len(raw_configs) <= 1:
        return [_run_raw(raw) for raw in raw_configs]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_raw, raw_configs))


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _write_csv(path: str, header: list[str], rows: list[list]):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


# -- subcommands ------------------------------------------------------------


def cmd_run(args) -> int:
    raw = {**_load_raw(args.scenario), **_collect_overrides(args)}
    cfg = build_scenario(raw)
    os.makedirs(args.out, exist_ok=True)
    trace_dir = None if args.no_traces else args.out
    sim = Simulation(cfg, trace_dir=trace_dir,
                     trace_interval=args.trace_interval)
    report = sim.run()
    report.write_summary(args.out)
    report.write_deaths(args.out)
    print(f"{cfg.protocol.value} seed={cfg.rng_seed}: "
          f"energy={report.total_energy_j:.3f} J, "
          f"lifetime={report.network_lifetime_s:.1f} s"
          f"{' (censored)' if report.lifetime_censored else ''}, "
          f"alive={report.alive_nodes}/{cfg.node_count}, "
          f"delivered={report.packets_delivered}/{report.packets_emitted}")
    print(f"wrote {args.out}/summary.json")
    return 0


def _lifetime_cell(report: dict):
    return report["network_lifetime_s"], report["lifetime_censored"]


def cmd_compare(args) -> int:
    seeds = args.seeds
    base = {**_load_raw(args.scenario), **_collect_overrides(args)}
    base.pop("protocol", None)
    raws, labels = [], []
    for seed in seeds:
        for protocol in ("AODV", "EAR"):
            raw = dict(base)
            raw["rng_seed"] = seed
            raw["protocol"] = protocol
            # reply_all follows the protocol unless explicitly pinned
            raws.append(raw)
            labels.append((seed, protocol))
    for raw in raws:
        build_scenario(raw)  # fail fast on config errors before any run
    os.makedirs(args.out, exist_ok=True)
    reports = _run_batch(raws, args.jobs)
    by_key = {}
    for (seed, protocol), report in zip(labels, reports):
        by_key[(seed, protocol)] = report
        run_dir = os.path.join(args.out, f"seed{seed}_{protocol.lower()}")
        os.makedirs(run_dir, exist_ok=True)
        with open(os.path.join(run_dir, "summary.json"), "w",
                  encoding="utf-8") as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
            handle.write("\n")

    header = ["seed", "aodv_total_energy", "ear_total_energy",
              "energy_reduction_pct",
              "aodv_lifetime", "aodv_lifetime_censored",
              "ear_lifetime", "ear_lifetime_censored",
              "aodv_alive_nodes", "ear_alive_nodes", "alive_delta"]
    rows = []
    sums = [0.0] * 6
    for seed in seeds:
        aodv = by_key[(seed, "AODV")]
        ear = by_key[(seed, "EAR")]
        reduction = 100.0 * (aodv["total_energy_j"] - ear["total_energy_j"]) \
            / aodv["total_energy_j"]
        a_life, a_cens = _lifetime_cell(aodv)
        e_life, e_cens = _lifetime_cell(ear)
        rows.append([seed, aodv["total_energy_j"], ear["total_energy_j"],
                     reduction, a_life, a_cens, e_life, e_cens,
                     aodv["alive_nodes"], ear["alive_nodes"],
                     ear["alive_nodes"] - aodv["alive_nodes"]])
        for i, value in enumerate((aodv["total_energy_j"], ear["total_energy_j"],
                                   reduction, a_life, e_life,
                                   ear["alive_nodes"] - aodv["alive_nodes"])):
            sums[i] += value
    n = len(seeds)
    rows.append(["mean", sums[0] / n, sums[1] / n, sums[2] / n,
                 sums[3] / n, "", sums[4] / n, "", "", "", sums[5] / n])
    path = os.path.join(args.out, "comparison.csv")
    _write_csv(path, header, rows)
    print(f"mean energy reduction over {n} seed(s): {sums[2] / n:.1f}%")
    print(f"wrote {path}")
    return 0


_AXES = {"nodes", "connections", "speed", "pause"}


def _apply_axis(raw: dict, axis: str, value: float, pinned_connections: bool):
    if axis == "nodes":
        raw["node_count"] = int(value)
        if not pinned_connections:
            raw.pop("connection_count", None)  # re-derive the 50% rule
    elif axis == "connections":
        raw["connection_count"] = int(value)
    elif axis == "speed":
        raw["speed_min"] = float(value)
        raw["speed_max"] = float(value)
    else:
        raw["pause_time"] = float(value)


def cmd_sweep(args) -> int:
    if not args.values:
        raise ScenarioError("sweep needs at least one --values entry")
    base = {**_load_raw(args.scenario), **_collect_overrides(args)}
    base.pop("protocol", None)
    pinned_connections = "connection_count" in base
    raws, labels = [], []
    for value in args.values:
        for protocol in ("AODV", "EAR"):
            for seed in args.seeds:
                raw = dict(base)
                _apply_axis(raw, args.axis, value, pinned_connections)
                raw["protocol"] = protocol
                raw["rng_seed"] = seed
                raws.append(raw)
                labels.append((value, protocol, seed))
    for raw in raws:
        build_scenario(raw)
    os.makedirs(args.out, exist_ok=True)
    reports = _run_batch(raws, args.jobs)
    rows = []
    plot_rows = []
    for (value, protocol, seed), report in zip(labels, reports):
        life, censored = _lifetime_cell(report)
        rows.append([args.axis, value, protocol, seed,
                     report["total_energy_j"], life, censored,
                     report["alive_nodes"]])
        plot_rows.append({"value": value, "protocol": protocol,
                          "total_energy": report["total_energy_j"],
                          "lifetime": life,
                          "alive_nodes": report["alive_nodes"]})
    path = os.path.join(args.out, "sweep.csv")
    _write_csv(path, ["axis", "value", "protocol", "seed", "total_energy",
                      "lifetime", "lifetime_censored", "alive_nodes"], rows)
    print(f"wrote {path} ({len(rows)} rows)")
    if not args.no_plots:
        from .plots import sweep_figures
        for figure in sweep_figures(plot_rows, args.axis, args.out):
            print(f"wrote {figure}")
    return 0


def cmd_power_table(args) -> int:
    cfg = build_scenario(_collect_overrides(args))
    params = RadioParams(frequency=cfg.frequency, rx_threshold=cfg.rx_threshold)
    lines = ["distance_m,pt_dbm"]
    for dist in args.distances:
        lines.append(f"{_fmt(dist)},{required_tx_power(dist, params)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# -- argument plumbing --------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earsim",
        description="MANET simulator: common-range AODV vs energy-aware "
                    "variable-range routing")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--scenario", help="JSON scenario file")
    p_run.add_argument("--out", default="run_out", help="output directory")
    p_run.add_argument("--no-traces", action="store_true",
                       help="skip trace CSVs, keep summary.json")
    p_run.add_argument("--trace-interval", type=float, default=1.0,
                       help="mobility/energy sampling period (s)")
    _add_config_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare",
                           help="AODV vs EAR on matched seeds")
    p_cmp.add_argument("--scenario", help="JSON scenario file")
    p_cmp.add_argument("--out", default="compare_out")
    p_cmp.add_argument("--seeds", type=_int_list, default=[1],
                       help="comma-separated seed list")
    p_cmp.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="parameter sweep with figures")
    p_sweep.add_argument("--axis", choices=sorted(_AXES), required=True)
    p_sweep.add_argument("--values", type=_float_list, required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--seeds", type=_int_list, default=[1])
    p_sweep.add_argument("--scenario", help="JSON scenario file")
    p_sweep.add_argument("--out", default="sweep_out")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--no-plots", action="store_true")
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_pt = sub.add_parser("power-table",
                          help="distance -> required transmit power (dBm)")
    p_pt.add_argument("--distances", type=_float_list,
                      default=[50.0, 100.0, 150.0, 200.0, 250.0, 400.0])
    p_pt.add_argument("--out", help="write CSV here instead of stdout")
    _add_config_flags(p_pt)
    p_pt.set_defaults(func=cmd_power_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
