"""Command-line entry point: ``mirrornet <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid config,
4 missing input. Failures print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import circuits as circ
from . import cmni as cm
from .checkpoint import CheckpointError, Hyperparams, load_checkpoint
from .dataset import LABEL_SOURCES, Dataset, DatasetError, SplitSpec, generate, holdout, read_dataset, split, write_dataset
from .env import Action, WorldConfig
from .evalreport import CheckpointScore, ReportError, evaluate, report
from .oracle import OracleConfig
from .probes import ProbeError, build_scenarios, capture, read_stats_csv, stats, write_stats_csv
from .training import default_grid, mini_grid, sweep, train

log = logging.getLogger("mirrornet")

OUT_ENV = "MIRRORNET_OUT"
EXIT_RUNTIME, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING = 1, 2, 3, 4
STAMP = "%Y%m%d-%H%M%S"
# run-all falls back to this logical time so that bundles are reproducible
FIXED_TIME = datetime(2000, 1, 1)

# Desk profile: a gentler world than the type defaults (sparser rough ground and
# flies, camera and tether tight enough to keep both agents close) and an oracle
# that refills up to the cap, helps from 1 energy and looks 3 cells ahead. It
# keeps all four labels well represented and a 1x15 net learnable in 50 epochs
# on 200k rows.
DESK_WORLD = WorldConfig(rough_prob=0.03, fly_prob=0.05, scroll_column=26, max_gap=1)
DESK_ORACLE = OracleConfig(refill_ceiling=20, help_min_energy=1, leap_lookahead=3)


class CliError(Exception):
    code = EXIT_RUNTIME
    kind = "runtime"

    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = None if path is None else str(path)


class ConfigError(CliError):
    code, kind = EXIT_CONFIG, "invalid-config"


class MissingInput(CliError):
    code, kind = EXIT_MISSING, "missing-input"


class UsageError(CliError):
    code, kind = EXIT_USAGE, "usage"


# --- configuration -----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetConfig:
    count: int = 200_000
    horizon: int = 256
    shard_rows: int = 16384
    workers: int = 1
    test_size: int = 20_000
    hop: float = 0.40
    jump: float = 0.40
    leap: float = 0.10
    help: float = 0.10
    val_fraction: float = 0.1
    label_source: str = "features"
    max_oversample: float = 4.0

    def __post_init__(self) -> None:
        if self.count < 1 or self.horizon < 1 or self.shard_rows < 1 or self.workers < 1:
            raise ValueError("count, horizon, shard_rows and workers must be >= 1")
        if self.label_source not in LABEL_SOURCES:
            raise ValueError(f"label_source must be one of {LABEL_SOURCES}, got '{self.label_source}'")
        if not self.max_oversample >= 1.0:
            raise ValueError(f"max_oversample must be >= 1, got {self.max_oversample}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        self.split_spec()

    def split_spec(self) -> SplitSpec:
        props = {Action.HOP: self.hop, Action.JUMP: self.jump, Action.LEAP: self.leap, Action.HELP: self.help}
        return SplitSpec(test_size=self.test_size, proportions=props)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_root: str = ""
    timestamp: str = ""
    grid: str = "train"  # train | mini | default
    probe_k: int = 10_000
    world: WorldConfig = DESK_WORLD
    oracle: OracleConfig = DESK_ORACLE
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: Hyperparams = field(default_factory=lambda: Hyperparams(learning_rate=5e-5, hidden_layers=1,
                                                                   neurons_per_layer=15))
    thresholds: cm.Thresholds = field(default_factory=cm.Thresholds)
    hubs: circ.HubThresholds = field(default_factory=circ.HubThresholds)

    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {"seed": str(self.seed), "out_root": self.out_root, "timestamp": self.timestamp,
                     "grid": self.grid, "probe_k": str(self.probe_k)}
        for name in SECTIONS:
            cp[name] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(getattr(self, name)).items()}
        return cp


SECTIONS = ("world", "oracle", "dataset", "train", "thresholds", "hubs")
RUN_KEYS = {"seed": int, "out_root": str, "timestamp": str, "grid": str, "probe_k": int}


def _cast(kind, raw: str):
    if kind is int or kind == "int":
        return int(raw)
    if kind is float or kind == "float":
        return float(raw)
    return raw


def _build(cls, current, section: configparser.SectionProxy, where: str):
    known = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in [{where}]")
        try:
            kwargs[key] = _cast(known[key], raw)
        except ValueError:
            raise ConfigError(f"[{where}] {key}: cannot parse '{raw}' as {known[key]}") from None
    try:
        return replace(current, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Parse and fully validate a config file; ``overrides`` are ``{section: {key: str}}``."""
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise MissingInput(f"config file not found: {p}", p)
        try:
            cp.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc.message.splitlines()[0]}", p) from None
    for sec, values in (overrides or {}).items():
        if not cp.has_section(sec):
            cp.add_section(sec)
        for k, v in values.items():
            cp[sec][k] = str(v)
    unknown = [s for s in cp.sections() if s not in SECTIONS and s != "run"]
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    cfg = RunConfig()
    if cp.has_section("run"):
        run = {}
        for key, raw in cp["run"].items():
            if key not in RUN_KEYS:
                raise ConfigError(f"unknown key '{key}' in [run]")
            try:
                run[key] = RUN_KEYS[key](raw)
            except ValueError:
                raise ConfigError(f"[run] {key}: cannot parse '{raw}'") from None
        cfg = replace(cfg, **run)
    for sec in SECTIONS:
        if cp.has_section(sec):
            cfg = replace(cfg, **{sec: _build(type(getattr(cfg, sec)), getattr(cfg, sec), cp[sec], sec)})
    if cfg.grid not in ("train", "mini", "default"):
        raise ConfigError(f"[run] grid must be train, mini or default, got '{cfg.grid}'")
    if cfg.probe_k < 1:
        raise ConfigError(f"[run] probe_k must be >= 1, got {cfg.probe_k}")
    if cfg.timestamp:
        parse_timestamp(cfg.timestamp)
    return cfg


def parse_timestamp(text: str) -> datetime:
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"timestamp '{text}' is not ISO 8601") from None
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts.replace(microsecond=0)


def logical_time(cfg: RunConfig, fallback: datetime | None = None) -> datetime:
    """Time stamped into checkpoint names: config, then SOURCE_DATE_EPOCH, then fallback or now."""
    if cfg.timestamp:
        return parse_timestamp(cfg.timestamp)
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        try:
            return datetime.fromtimestamp(int(epoch), timezone.utc).replace(tzinfo=None)
        except ValueError:
            raise ConfigError(f"SOURCE_DATE_EPOCH is not an integer: '{epoch}'") from None
    if fallback is not None:
        return fallback
    return datetime.now(timezone.utc).replace(microsecond=0, tzinfo=None)


def out_root(args, cfg: RunConfig) -> Path:
    return Path(getattr(args, "out_root", None) or os.environ.get(OUT_ENV) or cfg.out_root or "runs")


def out_dir(args, cfg: RunConfig, name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    root = out_root(args, cfg)
    stamp = datetime.now().strftime(STAMP)
    path = root / f"{name}-{stamp}"
    n = 1
    while path.exists():
        n += 1
        path = root / f"{name}-{stamp}-{n}"
    return path


# --- helpers -----------------------------------------------------------------------

def _need(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingInput(f"input not found: {p}", p)
    return p


def _load_data(path) -> Dataset:
    return read_dataset(_need(path))


def _load_ckpt(path):
    return load_checkpoint(_need(path))


def _generate(cfg: RunConfig) -> Dataset:
    d = cfg.dataset
    return generate(d.count, cfg.world, cfg.oracle, cfg.seed, horizon=d.horizon, shard_rows=d.shard_rows,
                    workers=d.workers, max_oversample=d.max_oversample, label_source=d.label_source)


def _grid(cfg: RunConfig, seed: int) -> list[Hyperparams]:
    if cfg.grid == "default":
        return default_grid(seed=seed, max_epochs=cfg.train.max_epochs)
    if cfg.grid == "mini":
        return mini_grid(seed=seed, max_epochs=cfg.train.max_epochs)
    return [replace(cfg.train, seed=seed)]


def _score(ckpt, scenarios, thresholds) -> cm.CmniReport:
    rows = stats(capture(ckpt.network, scenarios))
    return cm.cmni(cm.deltas(rows), thresholds, layer_dims=ckpt.network.layer_dims)


def _print(line: str) -> None:
    sys.stdout.write(line + "\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# --- subcommands -------------------------------------------------------------------

def cmd_gen(args, cfg: RunConfig) -> None:
    out = out_dir(args, cfg, "gen")
    ds = _generate(cfg)
    path = write_dataset(ds, out / "dataset.csv")
    _print(f"wrote {len(ds)} rows to {path}")


def cmd_split(args, cfg: RunConfig) -> None:
    ds = _load_data(args.data)
    out = out_dir(args, cfg, "split")
    tr, te = split(ds, cfg.dataset.split_spec(), cfg.seed)
    write_dataset(tr, out / "train.csv", {"split": "train"})
    write_dataset(te, out / "test.csv", {"split": "test"})
    _print(f"train {len(tr)} rows, test {len(te)} rows in {out}")


def _train_val(path, cfg: RunConfig):
    return holdout(_load_data(path), cfg.dataset.val_fraction, cfg.seed)


def cmd_train(args, cfg: RunConfig) -> None:
    tr, val = _train_val(args.data, cfg)
    out = out_dir(args, cfg, "train")
    history = train(tr, val, replace(cfg.train, seed=cfg.seed), out, timestamp=logical_time(cfg))
    best = min(history, key=lambda c: (c.val_loss, c.epoch))
    _print(f"best epoch {best.epoch} val_loss {best.val_loss:.4f} -> {out / (best.name + '.ckpt')}")


def cmd_sweep(args, cfg: RunConfig) -> None:
    tr, val = _train_val(args.data, cfg)
    out = out_dir(args, cfg, "sweep")
    rows = sweep(_grid(cfg, cfg.seed), tr, val, out, timestamp=logical_time(cfg))
    ok = sum(r["status"] == "ok" for r in rows)
    _print(f"{ok}/{len(rows)} configs trained; manifest {out / 'sweep_manifest.csv'}")


def cmd_probe(args, cfg: RunConfig) -> None:
    ckpt = _load_ckpt(args.checkpoint)
    ds = _load_data(args.data)
    out = out_dir(args, cfg, "probe")
    scen = build_scenarios(ds.features, cfg.probe_k, cfg.seed)
    path = write_stats_csv(stats(capture(ckpt.network, scen)), out / "stats.csv")
    _print(f"wrote {path}")


def cmd_cmni(args, cfg: RunConfig) -> None:
    ckpt = _load_ckpt(args.checkpoint)
    if args.stats:
        rows = read_stats_csv(_need(args.stats))
        report_ = cm.cmni(cm.deltas(rows), cfg.thresholds, layer_dims=ckpt.network.layer_dims)
    else:
        if not args.data:
            raise UsageError("cmni needs --data or --stats")
        scen = build_scenarios(_load_data(args.data).features, cfg.probe_k, cfg.seed)
        report_ = _score(ckpt, scen, cfg.thresholds)
    out = out_dir(args, cfg, "cmni")
    cm.write_report(report_, out / "cmni.json", out / "cmni.csv")
    _print(f"val_loss {ckpt.val_loss:.4f} cmni {report_.cmni:.5f}")


def cmd_circuits(args, cfg: RunConfig) -> None:
    ckpt = _load_ckpt(args.checkpoint)
    rep = cm.read_report(_need(args.cmni_report))
    out = out_dir(args, cfg, "circuits")
    graphs = circ.find_hubs(ckpt.network, rep.candidates, rep.differentiators, cfg.hubs) if rep.candidates else []
    path = circ.export_graph(graphs, out / "circuits.json", output_layer=len(ckpt.network.weights))
    _print(f"{len(graphs)} hub(s) written to {path}")


def cmd_eval(args, cfg: RunConfig) -> None:
    ckpt = _load_ckpt(args.checkpoint)
    ds = _load_data(args.data)
    out = out_dir(args, cfg, "eval")
    res = evaluate(ckpt.network, ds.features, ds.labels)
    out.mkdir(parents=True, exist_ok=True)
    _write_eval(out / "eval.json", ckpt.name, res)
    _print(f"accuracy {res.accuracy:.4f} over {res.total} rows")


def _write_eval(path: Path, name: str, res) -> None:
    doc = {"checkpoint": name, "accuracy": res.accuracy, "rows_predicted_columns_actual": res.confusion.tolist(),
           "precision": [None if np.isnan(v) else v for v in res.precision.tolist()],
           "recall": [None if np.isnan(v) else v for v in res.recall.tolist()]}
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _sweep_scores(sweep_dir: Path, rows, scen, thresholds):
    """CMNI of every checkpoint in every successful run of a sweep."""
    scores, best = [], {}
    for r in rows:
        if r["status"] != "ok":
            continue
        run_dir = sweep_dir / r["checkpoint_dir"]
        manifest = json.loads(_need(run_dir / "manifest.json").read_text())
        for entry in manifest["checkpoints"]:
            ckpt = _load_ckpt(run_dir / entry["file"])
            rep = _score(ckpt, scen, thresholds)
            scores.append(CheckpointScore(r["run"], ckpt.name, ckpt.epoch, ckpt.val_loss, rep.mne, rep.cmni))
            if entry["best"]:
                best[r["run"]] = (ckpt, rep)
    return scores, best


def _read_sweep(sweep_dir: Path):
    with open(_need(sweep_dir / "sweep_manifest.csv"), newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args, cfg: RunConfig) -> None:
    sweep_dir = _need(args.sweep)
    rows = _read_sweep(sweep_dir)
    test = _load_data(args.data)
    out = out_dir(args, cfg, "report")
    scen = build_scenarios(test.features, cfg.probe_k, cfg.seed)
    scores, best = _sweep_scores(sweep_dir, rows, scen, cfg.thresholds)
    evals = {ck.name: evaluate(ck.network, test.features, test.labels) for ck, _ in best.values()}
    paths = report(rows, scores, evals, out)
    sys.stdout.write(paths["summary"].read_text())


def cmd_run_all(args, cfg: RunConfig) -> None:
    """gen, split, sweep, probe, cmni, circuits, eval and report into one bundle."""
    root = out_dir(args, cfg, f"run-seed{cfg.seed}")
    stamp = logical_time(cfg, FIXED_TIME)
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.cfg").write_text(_config_text(cfg))
    d = cfg.dataset
    ds = _generate(cfg)
    write_dataset(ds, root / "data" / "dataset.csv")
    tr, te = split(ds, d.split_spec(), cfg.seed)
    write_dataset(tr, root / "data" / "train.csv", {"split": "train"})
    write_dataset(te, root / "data" / "test.csv", {"split": "test"})
    fit, val = holdout(tr, d.val_fraction, cfg.seed)
    log.info("dataset %d rows (train %d, val %d, test %d)", len(ds), len(fit), len(val), len(te))

    sweep_dir = root / "checkpoints"
    rows = sweep(_grid(cfg, cfg.seed), fit, val, sweep_dir, timestamp=stamp)
    scen = build_scenarios(te.features, min(cfg.probe_k, len(te)), cfg.seed)
    scores, best = _sweep_scores(sweep_dir, rows, scen, cfg.thresholds)

    evals = {}
    for run, (ckpt, rep) in sorted(best.items()):
        adir = root / "analysis" / run
        write_stats_csv(stats(capture(ckpt.network, scen)), adir / "stats.csv")
        cm.write_report(rep, adir / "cmni.json", adir / "cmni.csv")
        graphs = circ.find_hubs(ckpt.network, rep.candidates, rep.differentiators, cfg.hubs) if rep.candidates else []
        circ.export_graph(graphs, adir / "circuits.json", output_layer=len(ckpt.network.weights))
        evals[ckpt.name] = evaluate(ckpt.network, te.features, te.labels)
        _write_eval(adir / "eval.json", ckpt.name, evals[ckpt.name])
    paths = report(rows, scores, evals, root / "report")
    _write_bundle_manifest(root, cfg, stamp)
    sys.stdout.write(paths["summary"].read_text())
    _print(f"bundle: {root}")


def _config_text(cfg: RunConfig) -> str:
    buf = io.StringIO()
    cfg.to_parser().write(buf)
    return buf.getvalue()


def _write_bundle_manifest(root: Path, cfg: RunConfig, stamp: datetime) -> None:
    files = sorted(p for p in root.rglob("*") if p.is_file() and p != root / "manifest.json")
    doc = {
        "seed": cfg.seed,
        "logical_time": stamp.isoformat(),
        "files": [{"path": p.relative_to(root).as_posix(), "bytes": p.stat().st_size, "sha256": _sha256(p)}
                  for p in files],
    }
    (root / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


# --- argument parsing --------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="config file with [run], [world], [oracle], ... sections")
    common.add_argument("--seed", type=int, help="global seed (overrides [run] seed)")
    common.add_argument("--out", help="output directory (default: <out root>/<command>-<time>)")
    common.add_argument("--out-root", help=f"output root (overrides ${OUT_ENV} and [run] out_root)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mirrornet", description="Frog and Toad mirror-neuron pipeline.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="generate a labelled dataset")
    g.add_argument("--count", type=int)
    g.add_argument("--workers", type=int)
    s = sub.add_parser("split", parents=[common], help="balanced train/test split")
    s.add_argument("--data", required=True)
    s.add_argument("--test-size", type=int)
    t = sub.add_parser("train", parents=[common], help="train one configuration")
    t.add_argument("--data", required=True, help="training CSV; a validation share is held out")
    t.add_argument("--epochs", type=int)
    w = sub.add_parser("sweep", parents=[common], help="train a grid of configurations")
    w.add_argument("--data", required=True)
    w.add_argument("--grid", choices=["train", "mini", "default"])
    w.add_argument("--epochs", type=int)
    pr = sub.add_parser("probe", parents=[common], help="activation statistics over distress scenarios")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--k", type=int)
    c = sub.add_parser("cmni", parents=[common], help="mirror-neuron scores of a checkpoint")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--data")
    c.add_argument("--stats")
    c.add_argument("--k", type=int)
    ci = sub.add_parser("circuits", parents=[common], help="hub pathways from checkpoint weights")
    ci.add_argument("--checkpoint", required=True)
    ci.add_argument("--cmni-report", required=True)
    e = sub.add_parser("eval", parents=[common], help="accuracy and confusion matrix")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    r = sub.add_parser("report", parents=[common], help="consolidated sweep report")
    r.add_argument("--sweep", required=True, help="sweep directory")
    r.add_argument("--data", required=True, help="test CSV used for probes and evaluation")
    r.add_argument("--k", type=int)
    a = sub.add_parser("run-all", parents=[common], help="whole pipeline into one bundle")
    a.add_argument("--count", type=int)
    a.add_argument("--grid", choices=["train", "mini", "default"])
    a.add_argument("--epochs", type=int)
    a.add_argument("--k", type=int)
    return p


COMMANDS = {
    "gen": cmd_gen, "split": cmd_split, "train": cmd_train, "sweep": cmd_sweep, "probe": cmd_probe,
    "cmni": cmd_cmni, "circuits": cmd_circuits, "eval": cmd_eval, "report": cmd_report, "run-all": cmd_run_all,
}


def _overrides(args) -> dict:
    o: dict = {}

    def put(sec, key, val):
        if val is not None:
            o.setdefault(sec, {})[key] = val

    put("run", "seed", args.seed)
    put("run", "grid", getattr(args, "grid", None))
    put("run", "probe_k", getattr(args, "k", None))
    put("dataset", "count", getattr(args, "count", None))
    put("dataset", "workers", getattr(args, "workers", None))
    put("dataset", "test_size", getattr(args, "test_size", None))
    put("train", "max_epochs", getattr(args, "epochs", None))
    return o


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config, _overrides(args))
        COMMANDS[args.command](args, cfg)
        return 0
    except CliError as exc:
        return _fail(exc.code, exc.kind, str(exc), exc.path)
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING, "missing-input", str(exc), exc.filename)
    except (DatasetError, ProbeError, CheckpointError, ReportError, ValueError, OSError) as exc:
        return _fail(EXIT_RUNTIME, "runtime", f"{type(exc).__name__}: {exc}", None)


def _fail(code: int, kind: str, message: str, path) -> int:
    doc = {"error": kind, "exit_code": code, "message": " ".join(str(message).split())}
    if path is not None:
        doc["path"] = str(path)
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
