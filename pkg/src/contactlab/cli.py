"""Command-line runner: ``contactlab run|preset|export-timeline|oracle``.

Exit codes: 0 every verdict PASS, 2 statistical FAIL, 3 insufficient
statistics, 1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis.oracle import ctmc_oracle
from .experiments import (FAIL, INSUFFICIENT, PASS, PRESETS, ConfigError, ExperimentConfig,
                          replica_key_hex, run_experiment)
from .harris import RngKey, generate_timeline
from .io import atomic_write_text, to_json
from .stats import InsufficientStatistics
from .topology import TopologyError, build_topology, topology_from_dict

OUT_ENV = "CONTACTLAB_OUT"
EXIT = {PASS: 0, FAIL: 2, INSUFFICIENT: 3}


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    wall_clock_seconds: float
    started_utc: str
    replica_seeds: list
    outputs: dict = field(default_factory=dict)   # file name -> sha256

    def to_json(self) -> str:
        return to_json(self.__dict__)


def default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "runs")) / name


def load_config(path: str) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return data


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def execute(cfg: ExperimentConfig, out: Path) -> tuple[int, RunManifest]:
    """Run one experiment and write its reports (each via write-then-rename)."""
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    report = run_experiment(cfg)
    files = report.all_files(cfg)
    files["config.yaml"] = dump_config(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        atomic_write_text(out / name, text)
    manifest = RunManifest(
        config_hash=cfg.digest, code_version=__version__,
        wall_clock_seconds=round(time.perf_counter() - t0, 3), started_utc=started,
        replica_seeds=[replica_key_hex(cfg.seed, r) for r in range(cfg.replicas)],
        outputs={n: hashlib.sha256(t.encode()).hexdigest() for n, t in sorted(files.items())})
    atomic_write_text(out / "manifest.json", manifest.to_json())
    print(f"{cfg.kind}: {report.verdict} -> {out}")
    return EXIT[report.verdict], manifest


def _overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "replicas", None) is not None:
        changes["replicas"] = args.replicas
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def cmd_run(args) -> int:
    data = load_config(args.config)
    out_hint = data.pop("out", None)
    cfg = _overrides(ExperimentConfig.from_dict(data), args)
    out = Path(args.out or out_hint or default_out(cfg.kind))
    return execute(cfg, out)[0]


def cmd_preset(args) -> int:
    if args.name not in PRESETS:
        print(f"unknown preset {args.name!r}; available: {', '.join(sorted(PRESETS))}",
              file=sys.stderr)
        return 1
    cfg = _overrides(ExperimentConfig.from_dict(PRESETS[args.name]), args)
    out = Path(args.out) if args.out else default_out(args.name)
    return execute(cfg, out)[0]


def cmd_export_timeline(args) -> int:
    data = load_config(args.config)
    out_hint = data.pop("out", None)
    cfg = ExperimentConfig.from_dict(data)
    top = cfg.build()
    window = tuple(float(v) for v in cfg.param("window", [0.0, 10.0]))
    tl = generate_timeline(top, cfg.lam, window, RngKey(cfg.seed, int(args.replica)))
    out = Path(args.out or out_hint or default_out("timeline"))
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "events.txt", tl.event_log_text())
    atomic_write_text(out / "edges.txt", top.edge_list_text())
    print(f"{len(tl)} events -> {out}")
    return 0


def parse_topology(text: str):
    """``kind:key=value,...``, e.g. ``half-line:n=3`` or
    ``explicit:n=3,edges=0-1;1-2``; a path to a YAML mapping such as
    ``{kind: lattice, d: 1, R: 2}`` also works."""
    if Path(text).is_file():
        return topology_from_dict(yaml.safe_load(Path(text).read_text()))
    kind, _, rest = text.partition(":")
    extent: dict = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        if key == "edges":
            extent[key] = [[int(a) for a in e.split("-")] for e in val.split(";") if e]
        else:
            extent[key] = int(val)
    if kind == "explicit":
        extent.setdefault("origin", 0)
        extent.setdefault("edges", [])
    return build_topology(kind, extent)


def cmd_oracle(args) -> int:
    top = parse_topology(args.topology)
    init = np.ones(top.n_vertices, dtype=np.uint8)
    dist = ctmc_oracle(top, args.lam, init, args.t)
    n = top.n_vertices
    body = {"n_vertices": n, "lambda": args.lam, "t": args.t,
            "probabilities": {format(s, f"0{n}b")[::-1]: float(p)
                              for s, p in enumerate(dist.probs)},
            "marginals": [dist.marginal(v) for v in range(n)]}
    sys.stdout.write(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contactlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a YAML config")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--replicas", type=int)
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("preset", help=f"run a preset ({', '.join(sorted(PRESETS))})")
    pr.add_argument("name")
    pr.add_argument("--out")
    pr.add_argument("--seed", type=int)
    pr.add_argument("--replicas", type=int)
    pr.add_argument("--workers", type=int)
    pr.set_defaults(func=cmd_preset)

    e = sub.add_parser("export-timeline", help="write one replica's event log")
    e.add_argument("config")
    e.add_argument("--out")
    e.add_argument("--replica", type=int, default=0)
    e.set_defaults(func=cmd_export_timeline)

    o = sub.add_parser("oracle", help="exact law from all ones on a tiny graph")
    o.add_argument("topology")
    o.add_argument("lam", type=float, metavar="lambda")
    o.add_argument("t", type=float)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except InsufficientStatistics as exc:
        print(f"insufficient statistics: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, TopologyError, ValueError, KeyError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
