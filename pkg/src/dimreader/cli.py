"""Command line: ``dimreader run|discover <config>`` and ``dimreader gen <name>``.

A run is described by a YAML or JSON config file (see :class:`RunConfig`);
``--set key=value`` overrides individual fields. Every run writes

* ``axes.svg``    the plot,
* ``axes.json``   points, vectors, grid and isolines (plus discovery results),
* ``report.json`` the fully defaulted config, run counts, flags, warnings,
* ``timings.json`` wall-clock seconds per phase (the only non-reproducible file).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import datasets
from .discovery import build_tangent_map, discover_global, discover_per_point
from .exceptions import ConfigError, DimReaderError
from .extraction import PerturbationField, extract_one_at_a_time, extract_randomized_halves, thread_count
from .field import fit_scalar_field, marching_squares
from .projections import METHODS, ProjectionConfig, make_projection
from .render import dumps, render_axes

log = logging.getLogger("dimreader")

PERTURBATION_MODES = ("axis", "custom", "discover-global", "discover-per-point")


def _expand_perturbation(mapping):
    """``perturbation: {axis: name}`` / ``{custom: path}`` to flat fields; ``lambda`` aliases ``lambda_smooth``."""
    mapping = dict(mapping or {})
    if "lambda" in mapping:
        mapping["lambda_smooth"] = mapping.pop("lambda")
    pert = mapping.get("perturbation")
    if isinstance(pert, dict):
        if len(pert) != 1:
            raise ConfigError(f"perturbation must have exactly one key, got {sorted(pert)}")
        ((kind, arg),) = pert.items()
        mapping["perturbation"] = kind
        if kind == "axis":
            mapping["dimension"] = arg
        elif kind == "custom":
            mapping["custom_path"] = arg
    return mapping


@dataclass
class RunConfig:
    input: str = ""
    format: str = "csv"
    label_column: str | None = None
    labels_path: str | None = None
    method: str = "tsne"
    k_neighbors: int = 8
    perplexity: float = 30.0
    learning_rate: float = 200.0
    max_iters: int = 100000
    grad_tol: float = 1e-5
    lle_reg: float = 1e-3
    capture_margin: float = 0.5
    perturbation: str = "axis"
    dimension: str | None = None
    custom_path: str | None = None
    extraction: str = "halves"
    resolution: int = 10
    reg_weight: float = 0.01
    n_levels: int = 10
    lambda_smooth: float = 1.0
    sigma: float | None = None
    seed: int = 0
    output_dir: str = "dimreader-out"

    @classmethod
    def from_mapping(cls, mapping, base_dir=None):
        mapping = _expand_perturbation(mapping)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**mapping)
        if base_dir is not None:
            for key in ("input", "custom_path", "labels_path"):
                val = getattr(cfg, key)
                if val and not Path(val).is_absolute():
                    setattr(cfg, key, str(Path(base_dir) / val))
        return cfg

    def projection_config(self):
        return ProjectionConfig(
            method=self.method,
            k_neighbors=self.k_neighbors,
            perplexity=self.perplexity,
            learning_rate=self.learning_rate,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            seed=self.seed,
            lle_reg=self.lle_reg,
            capture_margin=self.capture_margin,
        )

    def validate(self):
        if not self.input:
            raise ConfigError("config needs an 'input' dataset path")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.perturbation not in PERTURBATION_MODES:
            raise ConfigError(f"unknown perturbation {self.perturbation!r}; expected one of {PERTURBATION_MODES}")
        if self.perturbation == "axis" and not self.dimension:
            raise ConfigError("axis perturbation needs a 'dimension' name")
        if self.perturbation == "custom" and not self.custom_path:
            raise ConfigError("custom perturbation needs a 'custom_path'")
        if self.extraction not in ("halves", "one-at-a-time"):
            raise ConfigError(f"unknown extraction {self.extraction!r}")
        for key in ("resolution", "n_levels"):
            if int(getattr(self, key)) < 1:
                raise ConfigError(f"{key} must be a positive integer")
        if not self.reg_weight > 0:
            raise ConfigError("reg_weight must be positive")
        if self.lambda_smooth < 0:
            raise ConfigError("lambda_smooth must be non-negative")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        self.projection_config().validate()
        return self


@dataclass
class RunReport:
    config: dict
    n: int = 0
    d: int = 0
    projection_runs: int = 0
    extraction_runs: int = 0
    tangent_map_runs: int = 0
    convergence: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    discovery: dict | None = None

    def to_dict(self):
        out = dataclasses.asdict(self)
        out.pop("timings")
        return out


class PipelineError(DimReaderError):
    def __init__(self, phase, exc):
        super().__init__(f"[{phase}] {exc}")
        self.phase = phase
        self.__cause__ = exc


class _Phases:
    def __init__(self, report):
        self.report = report

    def __call__(self, name):
        phases = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, etype, exc, tb):
                phases.report.timings[name] = time.perf_counter() - self.t0
                if exc is not None and not isinstance(exc, PipelineError):
                    raise PipelineError(name, exc) from exc
                return False

        return _Ctx()


def _load(cfg):
    ds = datasets.load_dataset(cfg.input, cfg.format, cfg.label_column, cfg.labels_path)
    if cfg.perturbation == "axis" and cfg.dimension not in ds.names:
        raise ConfigError(f"dimension {cfg.dimension!r} not in dataset header {ds.names}")
    return ds


def _field(cfg, ds):
    n, d = ds.data.shape
    if cfg.perturbation == "axis":
        return PerturbationField.axis(n, d, ds.names.index(cfg.dimension))
    dirs = datasets.load_csv(cfg.custom_path).data
    if dirs.shape != (n, d):
        raise ConfigError(f"custom perturbation has shape {dirs.shape}, expected {(n, d)}")
    return PerturbationField.custom(dirs)


def run_pipeline(cfg: RunConfig, n_jobs=None) -> RunReport:
    """Project, extract, fit, contour (with discovery first if asked); write outputs."""
    cfg.validate()
    echo = dataclasses.asdict(cfg)
    echo.pop("output_dir")  # where results go is not part of what they are
    report = RunReport(config=echo)
    phase = _Phases(report)
    out_dir = Path(cfg.output_dir)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with phase("load"):
            ds = _load(cfg)
        report.n, report.d = ds.data.shape
        pcfg = cfg.projection_config().validate(report.n)
        if cfg.perturbation in ("axis", "custom"):
            with phase("perturbation"):
                pfield = _field(cfg, ds)

        with phase("project"):
            proj = make_projection(pcfg)
            proj.fit(ds.data)
        coords = np.asarray(proj.embedding_)
        if cfg.method == "tsne":
            fp = proj.fixed_point_
            report.convergence["tsne"] = {"converged": fp.converged, "iterations": fp.n_iter, "grad_norm": fp.grad_norm}
        if cfg.method == "isomap":
            report.convergence["isomap"] = {"neighborhood": "union", "edges": int(len(proj.edges_[0]))}

        extra = None
        if cfg.perturbation.startswith("discover"):
            with phase("discover"):
                tmap = build_tangent_map(proj, ds.data, cfg.seed, cfg.extraction, n_jobs)
                if cfg.perturbation == "discover-global":
                    result = discover_global(tmap, seed=cfg.seed)
                else:
                    result = discover_per_point(tmap, coords, cfg.lambda_smooth, cfg.sigma, seed=cfg.seed)
                vectors = tmap.apply(result.perturbation)
            report.tangent_map_runs = tmap.runs
            report.warnings.extend(result.warnings)
            extra = result.to_dict()
            report.discovery = {k: v for k, v in extra.items() if k != "perturbation"}
            if result.mode == "global":
                report.discovery["direction"] = result.perturbation[0].tolist()
        else:
            with phase("extract"):
                if cfg.extraction == "halves":
                    pv = extract_randomized_halves(proj, ds.data, pfield, seed=cfg.seed, n_jobs=n_jobs)
                else:
                    pv = extract_one_at_a_time(proj, ds.data, pfield, n_jobs=n_jobs)
            vectors = pv.vectors
            report.extraction_runs = pv.runs
        report.projection_runs = report.extraction_runs + report.tangent_map_runs

        with phase("fit"):
            grid = fit_scalar_field(coords, vectors, cfg.resolution, cfg.reg_weight)
        with phase("contour"):
            isolines = marching_squares(grid, cfg.n_levels)
        with phase("render"):
            svg, doc = render_axes(coords, vectors, isolines, ds.labels, grid, extra=extra)

    report.warnings.extend(f"{w.category.__name__}: {w.message}" for w in caught)

    with phase("write"):
        out_dir.mkdir(parents=True, exist_ok=True)
        files = {"axes.svg": svg, "axes.json": dumps(doc)}
        report.files = sorted(list(files) + ["report.json", "timings.json"])
        files["report.json"] = dumps(report.to_dict())
        for name, text in files.items():
            (out_dir / name).write_text(text)
    (out_dir / "timings.json").write_text(dumps(report.timings))
    return report


# ---------------------------------------------------------------- argparse


def _parse_overrides(pairs):
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def load_config(path, overrides=None):
    path = Path(path)
    try:
        mapping = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(mapping, dict):
        raise ConfigError(f"config {path} must be a mapping")
    mapping = _expand_perturbation(mapping)
    mapping.update(_expand_perturbation(overrides))
    return RunConfig.from_mapping(mapping, base_dir=path.parent)


def _cmd_run(args, force_discovery=False):
    overrides = _parse_overrides(args.set)
    if args.output:
        overrides["output_dir"] = args.output
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = load_config(args.config, overrides)
    if force_discovery and not cfg.perturbation.startswith("discover"):
        cfg.perturbation = "discover-global"
    report = run_pipeline(cfg, n_jobs=args.threads)
    summary = {
        "output_dir": cfg.output_dir,
        "projection_runs": report.projection_runs,
        "files": report.files,
    }
    if report.discovery:
        summary["objective"] = report.discovery["objective"]
        if "direction" in report.discovery:
            summary["direction"] = report.discovery["direction"]
    print(json.dumps(summary, indent=1))
    for w in report.warnings:
        log.warning(w)
    return 0


def _cmd_gen(args):
    ds = datasets.generate(args.name, n=args.n, seed=args.seed)
    out = Path(args.out or f"{args.name}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.to_csv(out)
    written = [str(out)]
    for param, tangent in ds.tangents.items():
        tpath = out.with_name(f"{out.stem}.{param}-tangent.csv")
        datasets.Dataset(tangent, ds.names).to_csv(tpath)
        written.append(str(tpath))
    print("\n".join(written))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dimreader", description="Generalised axes for dimensionality reduction plots.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the full pipeline"), ("discover", "discover the most influential perturbation")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML or JSON run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        p.add_argument("-o", "--output", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument(
            "--threads", type=int, default=None, help="extraction threads (default: $DIMREADER_THREADS or 1)"
        )
    g = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    g.add_argument("name", choices=sorted(datasets.GENERATORS))
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="CSV path (default <name>.csv)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if getattr(args, "threads", None) is not None:
            args.threads = thread_count(args.threads)
        return _cmd_run(args, force_discovery=args.command == "discover")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        if isinstance(exc.__cause__, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(f"error {exc}", file=sys.stderr)
        return 1
    except DimReaderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
