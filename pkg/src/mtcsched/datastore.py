"""Flat-file persistence for scenarios, assignments, reports, datasets and models.

Layout::

    <root>/runs/<run_id>/manifest.json
    <root>/runs/<run_id>/scenario.json
    <root>/runs/<run_id>/assignment.csv
    <root>/runs/<run_id>/report.csv + report.json
    <root>/datasets/<name>.txt
    <root>/models/<name>/model.json + weights.npz

Everything except model weights is text. Each file carries a schema version
and loaders refuse versions they do not know.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    Assignment,
    DeviceProfile,
    PriorityClass,
    ProtocolParams,
    QosSpec,
)
from .simulator import ClassStats, DeviceStats, PerfReport

SCHEMA_VERSION = 1
TOOL_VERSION = "0.1.0"


class SchemaVersionError(ValueError):
    pass


class IoError(OSError):
    pass


@dataclass
class Scenario:
    profiles: list[DeviceProfile]
    params: ProtocolParams
    qos: QosSpec | None = None

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "qos": None if self.qos is None else {"delta": list(self.qos.delta),
                                                  "rho": list(self.qos.rho)},
            "devices": [_device_dict(p) for p in self.profiles],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        q = d.get("qos")
        return cls(
            profiles=[DeviceProfile(int(x["id"]), PriorityClass.parse(x["class"]), float(x["rate"]),
                                    x.get("pattern", "poisson"), float(x.get("jitter", 0.0)))
                      for x in d["devices"]],
            params=ProtocolParams(**d["params"]),
            qos=None if q is None else QosSpec(tuple(q["delta"]), tuple(q["rho"])),
        )


def _device_dict(p: DeviceProfile) -> dict:
    return {"id": p.id, "class": p.cls.name, "rate": p.rate, "pattern": p.pattern, "jitter": p.jitter}


def scenario_hash(scenario: Scenario) -> str:
    """sha256 over params, QoS and the per-class multiset of device traits (ids ignored)."""
    doc = scenario.to_dict()
    doc["devices"] = sorted((p.cls.value, repr(float(p.rate)), p.pattern, repr(float(p.jitter)))
                            for p in scenario.profiles)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ------------------------------------------------------------------ helpers

def _write_json(path: Path, doc: dict, kind: str, exclusive: bool = False) -> None:
    doc = {"schema": SCHEMA_VERSION, "kind": kind, **doc}
    try:
        with open(path, "x" if exclusive else "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except FileExistsError:
        raise
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _read_json(path: Path, kind: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    _check_version(doc.get("schema"), path)
    if doc.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind} file, found {doc.get('kind')!r}")
    return doc


def _check_version(version, path) -> None:
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(f"{path}: schema version {version!r}, expected {SCHEMA_VERSION}")


def _header_version(line: str, path) -> None:
    # "# mtcsched-<kind> schema=N"
    try:
        version = int(line.split("schema=")[1].split()[0])
    except (IndexError, ValueError):
        raise SchemaVersionError(f"{path}: missing schema header") from None
    _check_version(version, path)


# ------------------------------------------------------------------ scenario

def save_scenario(scenario: Scenario, path) -> None:
    _write_json(Path(path), scenario.to_dict(), "scenario")


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(_read_json(Path(path), "scenario"))


# ---------------------------------------------------------------- assignment

def save_assignment(a: Assignment, path) -> None:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# mtcsched-assignment schema={SCHEMA_VERSION} success={int(a.success)} "
              f"n_assigned={a.n_assigned} fail_device={a.fail_device or 0} "
              f"collision_blocked={int(a.collision_blocked)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["device_id", "class", "slot", "mini_slot"])
    for row in a.rows():
        w.writerow(row)
    _write_text(path, buf.getvalue())


def load_assignment(path) -> Assignment:
    path = Path(path)
    lines = _read_text(path).splitlines()
    _header_version(lines[0], path)
    meta = dict(tok.split("=") for tok in lines[0].split()[2:])
    anchors, classes = {}, {}
    for row in csv.DictReader(lines[1:]):
        dev = int(row["device_id"])
        classes[dev] = PriorityClass.parse(row["class"])
        slot, mini = int(row["slot"]), int(row["mini_slot"])
        anchors[dev] = (slot, mini) if slot else None
    return Assignment(anchors, classes, success=bool(int(meta["success"])),
                      n_assigned=int(meta["n_assigned"]),
                      fail_device=int(meta["fail_device"]) or None,
                      collision_blocked=bool(int(meta["collision_blocked"])))


# -------------------------------------------------------------------- report

REPORT_COLUMNS = ["device_id", "class", "mean_delay_s", "max_delay_s", "collision_prob",
                  "generated", "delivered", "collided", "dropped", "queued", "qos_met"]


def report_table(report: PerfReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for s in report.devices:
        w.writerow([s.device_id, s.cls.name, repr(float(s.mean_delay)), repr(float(s.max_delay)),
                    repr(float(s.collision_prob)), s.generated, s.delivered, s.collided,
                    s.dropped, s.queued, int(s.qos_met)])
    return buf.getvalue()


def save_report(report: PerfReport, stem) -> None:
    """Writes ``<stem>.csv`` (per device) and ``<stem>.json`` (summary)."""
    stem = Path(stem)
    _write_text(stem.with_suffix(".csv"), report_table(report))
    _write_json(stem.with_suffix(".json"), report.summary(), "report")


def load_report(stem) -> PerfReport:
    stem = Path(stem)
    doc = _read_json(stem.with_suffix(".json"), "report")
    devices = []
    for row in csv.DictReader(_read_text(stem.with_suffix(".csv")).splitlines()):
        devices.append(DeviceStats(
            device_id=int(row["device_id"]), cls=PriorityClass.parse(row["class"]),
            mean_delay=float(row["mean_delay_s"]), max_delay=float(row["max_delay_s"]),
            collision_prob=float(row["collision_prob"]), generated=int(row["generated"]),
            delivered=int(row["delivered"]), collided=int(row["collided"]),
            dropped=int(row["dropped"]), queued=int(row["queued"]),
            qos_met=bool(int(row["qos_met"])),
        ))
    return PerfReport(
        devices=devices,
        classes={k: ClassStats(**v) for k, v in doc["classes"].items()},
        sim_time=doc["sim_time"], lp_cycles=doc["lp_cycles"],
        mean_lp_cycle=doc["mean_lp_cycle"], slots=doc["slots"], claims=doc["claims"],
    )


# ------------------------------------------------------------------- dataset

def save_dataset(ds, path) -> None:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# mtcsched-dataset schema={SCHEMA_VERSION}\n")
    buf.write("# meta " + json.dumps(ds.meta, sort_keys=True) + "\n")
    buf.write(",".join(ds.feature_names) + ";" + ",".join(ds.label_names) + "\n")
    for x, y in zip(ds.features, ds.labels):
        buf.write(",".join(repr(float(v)) for v in x) + ";" + ",".join(repr(float(v)) for v in y) + "\n")
    _write_text(path, buf.getvalue())


def load_dataset(path):
    from .surrogate.dataset import Dataset

    path = Path(path)
    lines = _read_text(path).splitlines()
    _header_version(lines[0], path)
    meta = json.loads(lines[1][len("# meta "):])
    fnames, lnames = (part.split(",") for part in lines[2].split(";"))
    X, Y = [], []
    for line in lines[3:]:
        if not line:
            continue
        f, l = line.split(";")
        X.append([float(v) for v in f.split(",")])
        Y.append([float(v) for v in l.split(",")])
    X = np.asarray(X, dtype=float).reshape(-1, len(fnames))
    Y = np.asarray(Y, dtype=float).reshape(-1, len(lnames))
    return Dataset(X, Y, fnames, lnames, meta)


# --------------------------------------------------------------------- model

def save_model(model, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for k, (W, b) in enumerate(model.params):
        arrays[f"W{k}"] = W
        arrays[f"b{k}"] = b
    np.savez(directory / "weights.npz", **arrays)
    _write_json(directory / "model.json", {
        "spec": model.spec.to_dict(),
        "normalizer": {"mean": model.normalizer.mean.tolist(), "std": model.normalizer.std.tolist()},
        "scaler": {"lo": model.scaler.lo.tolist(), "hi": model.scaler.hi.tolist()},
        "history": asdict(model.history),
        "manifest": model.manifest,
    }, "model")


def load_model(directory):
    from .surrogate.network import History, MinMax, Model, RegressorSpec, ZScore

    directory = Path(directory)
    doc = _read_json(directory / "model.json", "model")
    spec = RegressorSpec(**doc["spec"])
    with np.load(directory / "weights.npz") as z:
        params = [(z[f"W{k}"], z[f"b{k}"]) for k in range(len(spec.widths))]
    return Model(
        spec=spec, params=params,
        normalizer=ZScore(np.asarray(doc["normalizer"]["mean"]), np.asarray(doc["normalizer"]["std"])),
        scaler=MinMax(np.asarray(doc["scaler"]["lo"]), np.asarray(doc["scaler"]["hi"])),
        history=History(**doc["history"]), manifest=doc["manifest"],
    )


# ------------------------------------------------------------------ manifest

@dataclass
class RunManifest:
    run_id: str
    command: str
    scenario_hash: str | None = None
    params: dict | None = None
    seeds: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    created: str = ""
    wall_clock_s: float | None = None
    artifacts: list[str] = field(default_factory=list)


def save_manifest(m: RunManifest, path) -> None:
    # append-only: an existing manifest is never rewritten
    _write_json(Path(path), asdict(m), "manifest", exclusive=True)


def load_manifest(path) -> RunManifest:
    doc = _read_json(Path(path), "manifest")
    doc.pop("schema")
    doc.pop("kind")
    return RunManifest(**doc)


def new_run_dir(root, command: str) -> tuple[str, Path]:
    """Create ``<root>/runs/<id>`` exclusively; the id is time plus a counter."""
    runs = Path(root) / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    for k in range(10000):
        run_id = f"{stamp}-{command}-{os.getpid()}-{k}"
        path = runs / run_id
        try:
            path.mkdir()
        except FileExistsError:
            continue
        return run_id, path
    raise IoError(f"could not allocate a run directory under {runs}")


def now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _read_text(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start
