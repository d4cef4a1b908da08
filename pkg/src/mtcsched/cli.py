"""Command line front end: ``mtcsched <command> [--config cfg.yaml] ...``.

Config files are YAML with the sections ``devices``, ``params``, ``qos``,
``sim`` and ``train``. Every command writes into a fresh run directory under
``--out`` and leaves a manifest there.

Exit codes: 0 success, 2 bad config or usage, 3 infeasible scheduling
(assignment failed or no candidate survives selection), 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import yaml

from . import datastore as ds
from .analytic import OverloadError
from .assigner import estimate_table, overall_assign
from .core import DeviceProfile, PriorityClass, ProtocolParams, QosSpec, validate_scenario
from .figures import FIGURES, PopulationSpec, generate_population, replicate
from .simulator import SimOptions, simulate

log = logging.getLogger("mtcsched")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4


class ConfigError(Exception):
    pass


class Infeasible(Exception):
    pass


# ------------------------------------------------------------------- config

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config parse error in {path}{where}: {getattr(e, 'problem', e)}") from e
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a mapping of sections")
    return cfg


def need(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing config key '{dotted}'")
        node = node[part]
    return node


def get(cfg: dict, dotted: str, default=None):
    try:
        return need(cfg, dotted)
    except ConfigError:
        return default


def params_from(cfg: dict, section: str = "params") -> ProtocolParams:
    p = need(cfg, section)
    return ProtocolParams(
        n_m=int(need(cfg, f"{section}.n_m")),
        r_h=int(need(cfg, f"{section}.r_h")),
        r_r=int(need(cfg, f"{section}.r_r")),
        r_l=int(need(cfg, f"{section}.r_l")),
        t_m=float(p.get("t_m", 9e-6)),
        t_x=float(p.get("t_x", 133e-6)),
    )


def qos_from(cfg: dict) -> QosSpec:
    delta, rho = need(cfg, "qos.delta"), need(cfg, "qos.rho")
    if len(delta) != 3 or len(rho) != 3:
        raise ConfigError("qos.delta and qos.rho need one value per class (HP, RP, LP)")
    return QosSpec(tuple(delta), tuple(rho))


def devices_from(cfg: dict, seed: int) -> list[DeviceProfile]:
    dev = need(cfg, "devices")
    if isinstance(dev, dict) and "list" in dev:
        out = []
        for k, row in enumerate(dev["list"]):
            for key in ("class", "rate"):
                if key not in row:
                    raise ConfigError(f"missing config key 'devices.list[{k}].{key}'")
            out.append(DeviceProfile(int(row.get("id", k + 1)), PriorityClass.parse(row["class"]),
                                     float(row["rate"]), row.get("pattern", "poisson"),
                                     float(row.get("jitter", 0.0))))
        return out
    if isinstance(dev, dict) and "generator" in dev:
        g = dev["generator"]
        counts = need(cfg, "devices.generator.counts")
        spec = PopulationSpec(
            counts=tuple(int(c) for c in counts),
            rate_range=tuple(g.get("rate_range", (1.0, 5.0))),
            poisson_share=float(g.get("poisson_share", 0.5)),
            jitter=float(g.get("jitter", 0.05)),
        )
        return generate_population(spec, int(g.get("seed", seed)))
    raise ConfigError("missing config key 'devices.list' or 'devices.generator'")


def sim_options(cfg: dict, seed: int) -> SimOptions:
    s = cfg.get("sim") or {}
    return SimOptions(
        duration=float(s.get("duration", 2000.0)),
        seed=seed,
        buffer=bool(s.get("buffer", True)),
        synccs=bool(s.get("synccs", True)),
        warmup=s.get("warmup"),
        frames=s.get("frames"),
        random_phase=bool(s.get("random_phase", True)),
    )


# ----------------------------------------------------------------- helpers

class Run:
    """A fresh run directory plus its manifest, written on close."""

    def __init__(self, args, command: str):
        self.args = args
        self.run_id, self.path = ds.new_run_dir(args.out, command)
        self.manifest = ds.RunManifest(run_id=self.run_id, command=command, created=ds.now_iso(),
                                       seeds={"seed": args.seed},
                                       options={"config": args.config, "workers": args.workers})
        self.clock = ds.Stopwatch()

    def file(self, name: str) -> Path:
        self.manifest.artifacts.append(name)
        return self.path / name

    def close(self) -> None:
        self.manifest.wall_clock_s = round(self.clock.elapsed, 3)
        ds.save_manifest(self.manifest, self.path / "manifest.json")
        print(self.path)


def _scenario(args, cfg):
    profiles = devices_from(cfg, args.seed)
    params = params_from(cfg)
    qos = qos_from(cfg)
    res = validate_scenario(profiles, params, qos)
    if not res.ok:
        raise ConfigError("invalid scenario: " + "; ".join(res.violations))
    for w in res.warnings:
        log.warning(w)
    return ds.Scenario(profiles, params, qos)


def _assign(run: Run, scen: ds.Scenario):
    try:
        assignment, est = overall_assign(scen.profiles, scen.params, scen.qos)
    except OverloadError as e:
        raise Infeasible(str(e)) from e
    ds.save_assignment(assignment, run.file("assignment.csv"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["device_id", "class", "slot", "mini_slot", "est_delay_s", "est_collision"])
    for row in estimate_table(assignment, est):
        w.writerow([*row[:4], repr(float(row[4])), repr(float(row[5]))])
    run.file("estimates.csv").write_text(buf.getvalue())
    return assignment, est


def _record_scenario(run: Run, scen: ds.Scenario) -> None:
    ds.save_scenario(scen, run.file("scenario.json"))
    run.manifest.scenario_hash = ds.scenario_hash(scen)
    run.manifest.params = asdict(scen.params)


# ---------------------------------------------------------------- commands

def cmd_assign(args, cfg) -> int:
    scen = _scenario(args, cfg)
    run = Run(args, "assign")
    try:
        _record_scenario(run, scen)
        assignment, _ = _assign(run, scen)
    finally:
        run.close()
    if not assignment.success:
        raise Infeasible(f"assigned {assignment.n_assigned} of {len(scen.profiles)} devices")
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    scen = _scenario(args, cfg)
    opts = sim_options(cfg, args.seed)
    run = Run(args, "simulate")
    try:
        _record_scenario(run, scen)
        run.manifest.options["sim"] = asdict(opts)
        assignment, _ = _assign(run, scen)
        if not assignment.success:
            raise Infeasible(f"assigned {assignment.n_assigned} of {len(scen.profiles)} devices")
        report = simulate(scen.profiles, scen.params, assignment, opts, scen.qos)
        ds.save_report(report, run.file("report.csv").with_suffix(""))
        run.manifest.artifacts.append("report.json")
    finally:
        run.close()
    return EXIT_OK


def _sweep_point(job):
    profiles, params, qos, opts = job
    try:
        assignment, _ = overall_assign(profiles, params, qos)
    except OverloadError:
        return params, None, False
    if not assignment.success:
        return params, None, False
    rep = simulate(profiles, params, assignment, opts, qos)
    return params, rep.summary(), True


def sweep_grid(cfg: dict) -> list[ProtocolParams]:
    p = need(cfg, "params")
    keys = ["n_m", "r_h", "r_r", "r_l"]
    values = [need(cfg, f"params.{k}") for k in keys]
    values = [v if isinstance(v, list) else [v] for v in values]
    out = []
    for combo in itertools.product(*values):
        out.append(ProtocolParams(*(int(c) for c in combo), t_m=float(p.get("t_m", 9e-6)),
                                  t_x=float(p.get("t_x", 133e-6))))
    return out


def cmd_sweep(args, cfg) -> int:
    profiles = devices_from(cfg, args.seed)
    qos = qos_from(cfg)
    opts = sim_options(cfg, args.seed)
    grid = sweep_grid(cfg)
    run = Run(args, "sweep")
    try:
        run.manifest.options["grid"] = [asdict(g) for g in grid]
        jobs = [(profiles, g, qos, opts) for g in grid]
        if args.workers > 1:
            with ProcessPoolExecutor(args.workers) as pool:
                results = list(pool.map(_sweep_point, jobs))
        else:
            results = [_sweep_point(j) for j in jobs]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["n_m", "r_h", "r_r", "r_l", "assigned"]
        for c in PriorityClass:
            head += [f"{c.name.lower()}_{k}" for k in
                     ("mean_delay_s", "max_delay_s", "mean_collision", "max_collision")]
        w.writerow(head + ["qos_met"])
        for params, summary, ok in results:
            row = [params.n_m, params.r_h, params.r_r, params.r_l, int(ok)]
            if summary:
                for c in PriorityClass:
                    s = summary["classes"][c.name]
                    row += [repr(s["mean_delay"]), repr(s["max_delay"]),
                            repr(s["mean_collision"]), repr(s["max_collision"])]
                row.append(int(summary["qos_met"]))
            else:
                row += [""] * 12 + [0]
            w.writerow(row)
        run.file("sweep.csv").write_text(buf.getvalue())
    finally:
        run.close()
    return EXIT_OK


def cmd_replicate(args, cfg) -> int:
    run = Run(args, f"replicate-{args.figure}")
    try:
        table = replicate(args.figure)
        run.file(f"{args.figure}.csv").write_text(table.to_csv())
    finally:
        run.close()
    return EXIT_OK


def _train_section(cfg):
    from .surrogate import DEFAULT_GRID, ScenarioSampler

    t = cfg.get("train") or {}
    grid = [ProtocolParams(*g) for g in t["grid"]] if "grid" in t else list(DEFAULT_GRID)
    s = t.get("sampler") or {}
    sampler = ScenarioSampler(**{k: tuple(v) if isinstance(v, list) else v for k, v in s.items()})
    return t, grid, sampler


def cmd_gen_dataset(args, cfg) -> int:
    from .surrogate import generate_dataset

    t, grid, sampler = _train_section(cfg)
    n = int(need(cfg, "train.profiles"))
    qos = qos_from(cfg)
    run = Run(args, "gen-dataset")
    try:
        data = generate_dataset(sampler, grid, n, qos,
                                sims_per_entry=int(t.get("sims_per_entry", 1)),
                                duration=float(t.get("duration", 20.0)), seed=args.seed,
                                intervals=int(t.get("intervals", 16)), workers=args.workers)
        ds.save_dataset(data, run.file("dataset.txt"))
        run.manifest.options["dataset"] = data.meta
    finally:
        run.close()
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    from .surrogate import train

    path = need(cfg, "train.dataset")
    data = ds.load_dataset(path)
    t = cfg.get("train") or {}
    run = Run(args, "train")
    try:
        res = train(data.features, data.labels, epochs=int(t.get("epochs", 50)),
                    batch=int(t.get("batch", 128)), seed=args.seed, log=log.info)
        res.model.manifest.update({"dataset": str(path),
                                   "rate_range": data.meta.get("sampler", {}).get("rate_range", [1.0, 5.0])})
        ds.save_model(res.model, run.path / "model")
        run.manifest.artifacts.append("model/")
        metrics = {"test_r2": res.test_r2, "test_r2_conventional": res.test_r2_conventional,
                   "bit_accuracy": res.bit_accuracy, "test_loss": res.test_loss,
                   "final_train_loss": res.history.train_loss[-1],
                   "final_val_loss": res.history.val_loss[-1]}
        run.file("metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    finally:
        run.close()
    return EXIT_OK


def cmd_select(args, cfg) -> int:
    from .surrogate import NoFeasibleCandidate, select_params

    model = ds.load_model(need(cfg, "train.model"))
    profiles = devices_from(cfg, args.seed)
    qos = qos_from(cfg)
    cands = [ProtocolParams(*c) for c in need(cfg, "train.candidates")]
    run = Run(args, "select")
    try:
        try:
            ranked = select_params(profiles, cands, model, qos)
        except NoFeasibleCandidate as e:
            raise Infeasible(str(e)) from e
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "n_m", "r_h", "r_r", "r_l", "slack", "predicted_bit"])
        for k, c in enumerate(ranked, start=1):
            p = c.params
            w.writerow([k, p.n_m, p.r_h, p.r_r, p.r_l, repr(c.slack), repr(float(c.predicted[-1]))])
        run.file("ranked.csv").write_text(buf.getvalue())
    finally:
        run.close()
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    rep = ds.load_report(Path(args.run) / "report")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["class", "devices", "mean_delay_s", "max_delay_s", "mean_collision",
                "max_collision", "qos_met"])
    for name in (c.name for c in PriorityClass):
        c = rep.classes[name]
        w.writerow([name, c.devices, repr(c.mean_delay), repr(c.max_delay),
                    repr(c.mean_collision), repr(c.max_collision), int(c.qos_met)])
    return EXIT_OK


COMMANDS = {
    "assign": cmd_assign,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "replicate": cmd_replicate,
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "select": cmd_select,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output root")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="mtcsched", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("assign", "simulate", "sweep", "gen-dataset", "train", "select"):
        sub.add_parser(name, parents=[common])
    rp = sub.add_parser("replicate", parents=[common])
    rp.add_argument("figure", choices=sorted(FIGURES))
    rep = sub.add_parser("report", parents=[common])
    rep.add_argument("run", help="run directory holding report.csv/report.json")
    return parser


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in {"config": None, "seed": 0, "out": "out", "workers": 1, "verbose": False}.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        return _error("config", str(e), EXIT_CONFIG)
    except Infeasible as e:
        return _error("infeasible", str(e), EXIT_INFEASIBLE)
    except Exception as e:  # noqa: BLE001
        log.debug(traceback.format_exc())
        return _error("runtime", f"{type(e).__name__}: {e}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
