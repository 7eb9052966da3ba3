"""Command-line harness: ``run``, ``sweep``, ``bench`` and ``gmm``.

Every subcommand reads an optional JSON config (``--config``) whose keys are
the :class:`RunConfig` field names; command-line flags override it.  Outputs
go to ``--out`` (a directory, or a CSV path for ``gmm``).

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
numerical failures such as a non-converging power iteration.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
import tracemalloc
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .clustering import dbscan_cluster, dpc_cluster, dpc_state
from .datasets import (
    BUILTIN,
    Dataset,
    GmmSpec,
    unequal_mixture,
    load_builtin,
    load_dataset,
    load_gmm_spec,
    sample_gmm,
    standardize,
    subsample,
)
from .errors import NumericalError, ValidationError
from .metrics import evaluate
from .neighbors import build_eps_graph, build_knn_graph
from .pipeline import DENSITY_KINDS, REQUIRED_PARAMS, compute_density, eps_grid, k_grid

ALGORITHMS = ("dpc", "dbscan")
GRID_AXES = ("eps", "k", "h")
DEFAULT_H_GRID = (0.1, 0.5, 1.0, 2.0)

SWEEP_FIELDS = [
    "param", "value", "num_clusters", "num_noise",
    "pairwise_precision", "pairwise_recall", "pairwise_f",
    "bcubed_precision", "bcubed_recall", "bcubed_f",
]
BENCH_FIELDS = [
    "n", "nnz", "kd_seconds", "fkd_seconds", "kd_peak_bytes", "fkd_peak_bytes", "kd_iterations",
]


@dataclass
class RunConfig:
    """One job description; fields map one-to-one onto command-line flags."""

    data: str | None = None
    label_column: str | int | None = None
    gmm: str | dict | None = None
    standardize: bool = True
    density: str | None = None
    algorithm: str = "dpc"
    eps: float | None = None
    k: int | None = None
    h: float = 0.5
    c: int | str | None = None
    core_threshold: float | None = None
    eps_grid: list | str | None = None
    k_grid: list | str | None = None
    h_grid: list | str | None = None
    sizes: list | None = None
    repeats: int = 1
    seed: int = 0
    tol: float = 1e-10
    max_iter: int = 10000
    damping: float | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - names)
        if unknown:
            raise ValidationError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def grid_axis(self) -> str | None:
        set_axes = [a for a in GRID_AXES if getattr(self, f"{a}_grid") is not None]
        if len(set_axes) > 1:
            raise ValidationError(f"only one grid axis per sweep, got {', '.join(set_axes)}")
        return set_axes[0] if set_axes else None

    def validate(self, command: str) -> None:
        if (self.data is None) == (self.gmm is None):
            raise ValidationError("exactly one of the fields 'data' and 'gmm' must be given")
        if self.density is None:
            raise ValidationError("missing required field 'density'")
        if self.density not in DENSITY_KINDS:
            raise ValidationError(f"field 'density' must be one of {', '.join(DENSITY_KINDS)}, got {self.density!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"field 'algorithm' must be one of {', '.join(ALGORITHMS)}")
        if not self.h > 0:
            raise ValidationError("field 'h' must be positive")
        if self.damping is not None and not 0 <= self.damping < 1:
            raise ValidationError("field 'damping' must lie in [0, 1)")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise ValidationError("field 'repeats' must be a positive integer")
        if command == "bench":
            if not self.density.startswith(("kd", "fkd")):
                raise ValidationError("bench compares kd and fkd; field 'density' must be a kernel density")
            if not self.sizes:
                raise ValidationError("missing required field 'sizes'")
            if list(self.sizes) != sorted(set(self.sizes)):
                raise ValidationError("field 'sizes' must be strictly ascending")
            self._require(REQUIRED_PARAMS[self.density])
            return
        axis = self.grid_axis() if command == "sweep" else None
        if command == "sweep" and axis is None:
            raise ValidationError("sweep needs one grid field: eps_grid, k_grid or h_grid")
        needed = list(REQUIRED_PARAMS[self.density])
        if self.algorithm == "dpc":
            needed.append("c")
        else:
            needed += ["eps", "core_threshold"]
        self._require([p for p in dict.fromkeys(needed) if p != axis])

    def _require(self, names) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ValidationError(
                    f"missing required field {name!r} (density {self.density!r}, algorithm {self.algorithm!r})"
                )


@contextmanager
def stage(name: str):
    """Prefix errors raised inside the block with the pipeline stage."""
    try:
        yield
    except (ValidationError, NumericalError) as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _jsonable(obj: Any):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_json(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is not None:
        path.write_text(text)
    return text


def write_rows(path: Path, fields: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def load_config_dataset(cfg: RunConfig) -> Dataset:
    if cfg.gmm is not None:
        if isinstance(cfg.gmm, dict):
            raw = cfg.gmm
            try:
                spec = GmmSpec(raw["components"], int(raw["n"]), int(raw.get("seed", cfg.seed)))
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"malformed inline mixture in field 'gmm': {exc}") from None
        elif cfg.gmm == "unequal":
            spec = unequal_mixture(seed=cfg.seed)
        else:
            spec = load_gmm_spec(cfg.gmm)
        ds = sample_gmm(spec)
    elif cfg.data in BUILTIN and not Path(cfg.data).exists():
        ds = load_builtin(cfg.data)
    else:
        ds = load_dataset(cfg.data, cfg.label_column)
    return standardize(ds) if cfg.standardize else ds


def _density(ds: Dataset, cfg: RunConfig, **override):
    params = dict(eps=cfg.eps, k=cfg.k, h=cfg.h, tol=cfg.tol, max_iter=cfg.max_iter, damping=cfg.damping)
    params.update(override)
    return compute_density(ds, cfg.density, **params)


def _num_centers(cfg: RunConfig, ds: Dataset) -> int:
    if cfg.c == "auto":
        if ds.labels is None:
            raise ValidationError("c='auto' needs ground-truth labels")
        return ds.num_classes
    try:
        return int(cfg.c)
    except (TypeError, ValueError):
        raise ValidationError(f"field 'c' must be an integer or 'auto', got {cfg.c!r}") from None


def cluster_once(ds: Dataset, cfg: RunConfig, **override):
    """Density then clustering for one parameter setting; returns (density, result)."""
    with stage("density"):
        rho = _density(ds, cfg, **override)
    with stage("cluster"):
        if cfg.algorithm == "dpc":
            result = dpc_cluster(dpc_state(rho, ds), _num_centers(cfg, ds))
        else:
            eps = override.get("eps", cfg.eps)
            result = dbscan_cluster(rho, build_eps_graph(ds, eps), cfg.core_threshold)
    return rho, result


def _dataset_info(ds: Dataset, cfg: RunConfig) -> dict:
    return {"name": ds.name, "n": ds.n, "d": ds.d,
            "num_classes": None if ds.labels is None else ds.num_classes,
            "standardized": cfg.standardize}


def run(cfg: RunConfig, out: Path) -> dict:
    cfg.validate("run")
    with stage("load"):
        ds = load_config_dataset(cfg)
    rho, result = cluster_once(ds, cfg)
    report = {
        "command": "run",
        "version": __version__,
        "config": cfg.to_dict(),
        "dataset": _dataset_info(ds, cfg),
        "density": {"kind": cfg.density, "params": dict(rho.params)},
        "clustering": {k: v for k, v in result.to_dict().items() if k != "labels"},
        "evaluation": None,
    }
    if ds.labels is not None:
        with stage("evaluate"):
            ev = evaluate(result, ds.labels)
        report["evaluation"] = {k: v for k, v in ev.to_dict().items() if k != "provenance"}
    out.mkdir(parents=True, exist_ok=True)
    result.write_csv(out / "labels.csv")
    dump_json(report, out / "report.json")
    return report


def _grid_values(cfg: RunConfig, axis: str, ds: Dataset) -> list:
    raw = getattr(cfg, f"{axis}_grid")
    if raw == "auto":
        if axis == "eps":
            return [float(e) for e in eps_grid(ds, seed=cfg.seed)]
        if axis == "k":
            return k_grid(ds.n)
        return list(DEFAULT_H_GRID)
    if isinstance(raw, str):
        raise ValidationError(f"field '{axis}_grid' must be a list or 'auto'")
    values = [int(v) if axis == "k" else float(v) for v in raw]
    if not values:
        raise ValidationError(f"field '{axis}_grid' is empty")
    return values


def sweep(cfg: RunConfig, out: Path) -> dict:
    cfg.validate("sweep")
    axis = cfg.grid_axis()
    with stage("load"):
        ds = load_config_dataset(cfg)
    if ds.labels is None:
        raise ValidationError("sweep scores against ground truth; the dataset has no labels")
    values = _grid_values(cfg, axis, ds)
    rows = []
    for v in values:
        _, result = cluster_once(ds, cfg, **{axis: v})
        with stage("evaluate"):
            ev = evaluate(result, ds.labels)
        rows.append({
            "param": axis, "value": v,
            "num_clusters": result.num_clusters,
            "num_noise": int(np.sum(result.labels < 0)),
            "pairwise_precision": ev.pairwise[0], "pairwise_recall": ev.pairwise[1], "pairwise_f": ev.pairwise[2],
            "bcubed_precision": ev.bcubed[0], "bcubed_recall": ev.bcubed[1], "bcubed_f": ev.bcubed[2],
        })
    best = max(range(len(rows)), key=lambda i: (rows[i]["pairwise_f"], -i))
    report = {
        "command": "sweep",
        "version": __version__,
        "config": cfg.to_dict(),
        "dataset": _dataset_info(ds, cfg),
        "axis": axis,
        "grid": values,
        "best": rows[best],
    }
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "sweep.csv", SWEEP_FIELDS, rows)
    dump_json(report, out / "report.json")
    return report


def _kernel_nnz(ds: Dataset, cfg: RunConfig) -> int:
    if cfg.density.endswith("-asym"):
        return build_knn_graph(ds, cfg.k).nnz
    return build_eps_graph(ds, cfg.eps).nnz


def _timed(fn, repeats: int):
    best, value = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, value


def _peak_bytes(fn) -> int:
    tracemalloc.start()
    try:
        fn()
        return tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()


def bench_rows(ds: Dataset, cfg: RunConfig, sizes, measure_memory: bool = True) -> list[dict]:
    """Time the full kd and fkd pipelines (graph, kernel, transition, density) per size."""
    family = cfg.density.split("-", 1)[1]
    kd_cfg = dataclasses.replace(cfg, density=f"kd-{family}")
    fkd_cfg = dataclasses.replace(cfg, density=f"fkd-{family}")
    rows = []
    for n in sizes:
        sub = ds if n == ds.n else subsample(ds, n, cfg.seed)
        with stage(f"bench n={n}"):
            kd_time, kd = _timed(lambda: _density(sub, kd_cfg), cfg.repeats)
            fkd_time, _ = _timed(lambda: _density(sub, fkd_cfg), cfg.repeats)
            row = {"n": n, "nnz": _kernel_nnz(sub, cfg), "kd_seconds": kd_time, "fkd_seconds": fkd_time,
                   "kd_iterations": kd.params.get("iterations")}
            if measure_memory:
                row["kd_peak_bytes"] = _peak_bytes(lambda: _density(sub, kd_cfg))
                row["fkd_peak_bytes"] = _peak_bytes(lambda: _density(sub, fkd_cfg))
        rows.append(row)
    return rows


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def bench(cfg: RunConfig, out: Path) -> dict:
    cfg.validate("bench")
    with stage("load"):
        ds = load_config_dataset(cfg)
    if cfg.sizes[-1] > ds.n:
        raise ValidationError(f"size {cfg.sizes[-1]} exceeds the dataset ({ds.n} points)")
    rows = bench_rows(ds, cfg, [int(s) for s in cfg.sizes])
    summary = {"fkd_slope_vs_nnz": None, "kd_fkd_ratio": [r["kd_seconds"] / r["fkd_seconds"] for r in rows]}
    if len(rows) > 1:
        summary["fkd_slope_vs_nnz"] = loglog_slope([r["nnz"] for r in rows], [r["fkd_seconds"] for r in rows])
    report = {
        "command": "bench",
        "version": __version__,
        "config": cfg.to_dict(),
        "dataset": _dataset_info(ds, cfg),
        "timing": {"rows": rows, **summary},
    }
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "bench.csv", BENCH_FIELDS, rows)
    dump_json(report, out / "report.json")
    return report


def gmm(args) -> dict:
    if (args.spec is None) == (not args.unequal):
        raise ValidationError("give exactly one of --spec and --unequal")
    spec = unequal_mixture() if args.unequal else load_gmm_spec(args.spec)
    overrides = {k: v for k, v in (("n", args.n), ("seed", args.seed)) if v is not None}
    spec = dataclasses.replace(spec, **overrides)
    ds = sample_gmm(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(ds.d)] + ["label"])
        for p, lab in zip(ds.points.tolist(), ds.labels.tolist()):
            w.writerow([repr(v) for v in p] + [lab])
    return spec.to_dict()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _list(cast):
    def parse(text: str):
        if text == "auto":
            return text
        try:
            return [cast(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list or 'auto', got {text!r}")
    return parse


def _column(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _centers(text: str):
    return text if text == "auto" else int(text)


def _add_config_flags(p: argparse.ArgumentParser, command: str) -> None:
    # every default is None so that only flags actually given override the config file
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    src = p.add_argument_group("dataset")
    src.add_argument("--data", help=f"CSV path or builtin name ({', '.join(BUILTIN)})")
    src.add_argument("--label-column", type=_column, help="label column name or index")
    src.add_argument("--gmm", help="mixture spec JSON path, or 'unequal'")
    src.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None,
                     help="z-score features (default: on)")
    dens = p.add_argument_group("density")
    dens.add_argument("--density", choices=DENSITY_KINDS)
    dens.add_argument("--eps", type=float)
    dens.add_argument("--k", type=int)
    dens.add_argument("--h", type=float, help="kernel bandwidth (default 0.5)")
    dens.add_argument("--tol", type=float)
    dens.add_argument("--max-iter", type=int)
    dens.add_argument("--damping", type=float, help="teleport probability for kd (default: automatic)")
    dens.add_argument("--seed", type=int)
    if command == "bench":
        p.add_argument("--sizes", type=_list(int), help="comma-separated ascending sample sizes")
        p.add_argument("--repeats", type=int, help="timing repetitions; the minimum is kept")
        return
    clu = p.add_argument_group("clustering")
    clu.add_argument("--algorithm", choices=ALGORITHMS)
    clu.add_argument("--c", type=_centers, help="number of DPC centers, or 'auto' for the class count")
    clu.add_argument("--core-threshold", type=float, help="DBSCAN core test: density >= threshold")
    if command == "sweep":
        clu.add_argument("--eps-grid", type=_list(float))
        clu.add_argument("--k-grid", type=_list(int))
        clu.add_argument("--h-grid", type=_list(float))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kdiff", description="Kernel diffusion density clustering")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "cluster one dataset and score it"),
                       ("sweep", "score every value of one parameter grid"),
                       ("bench", "time kd against fkd at several sample sizes")):
        _add_config_flags(sub.add_parser(name, help=text), name)
    g = sub.add_parser("gmm", help="sample a Gaussian mixture to CSV")
    g.add_argument("--spec", help="mixture spec JSON")
    g.add_argument("--unequal", action="store_true", help="use the built-in three-component mixture")
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, help="CSV path to write")
    return parser


def config_from_args(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ValidationError(f"no such config file: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ValidationError("config file must hold a JSON object")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    raw.update({k: v for k, v in vars(args).items() if k in names and v is not None})
    return RunConfig.from_dict(raw)


COMMANDS = {"run": run, "sweep": sweep, "bench": bench}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "gmm":
            print(dump_json(gmm(args)), end="")
            return 0
        report = COMMANDS[args.command](config_from_args(args), Path(args.out))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    print(dump_json(report), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
