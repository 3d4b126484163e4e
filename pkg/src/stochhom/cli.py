"""Command-line entry point.

Usage::

    stochhom SUBCOMMAND [--config PATH] [--out DIR] [--jobs N] [--seed N]
                        [--eps LIST] [--lambda-max REAL] [--format csv,json,svg]

Subcommands: ``modes``, ``beta``, ``spectrum``, ``ahom``, ``converge``,
``resolvent``, ``report``.  Exit status is 0 on success, 2 for an invalid
configuration, 3 for a numerical failure and 4 for an I/O error; failures
print a one-line JSON summary on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import numbers
import logging
import os
import platform
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError, StochHomError
from .medium import MediumSpec, simple_example

log = logging.getLogger("stochhom")

EXPERIMENTS = ("modes", "beta", "spectrum", "ahom", "converge", "resolvent", "report")
FORMATS = ("csv", "json", "svg")


@dataclass
class RunConfig:
    """Everything a run depends on; serialises to a flat JSON object plus ``medium``."""

    medium: MediumSpec = field(default_factory=simple_example)
    experiment: str = "converge"
    lambda_max: float | None = None
    eps_list: list = field(default_factory=lambda: [1 / 8, 1 / 16])
    seeds: list = field(default_factory=lambda: [0])
    L: int = 16
    n_samples: int = 32
    h_per_cell: int = 8
    macro_N: int = 128
    n_mu: int = 20
    J: int | None = None
    lam: float = -1.0
    tol: float = 1e-8
    out: str = "out"
    formats: list = field(default_factory=lambda: list(FORMATS))

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", key="experiment")
        if self.lambda_max is not None and not self.lambda_max > 0:
            raise ConfigError("lambda_max must be positive", key="lambda_max")
        if not self.eps_list or any(not 0 < e <= 1 for e in self.eps_list):
            raise ConfigError("eps values must lie in (0, 1]", key="eps_list")
        if not self.seeds or any(not isinstance(s, numbers.Integral) or isinstance(s, bool) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative integers", key="seeds")
        if self.L < 4:
            raise ConfigError("L must be at least 4", key="L")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive", key="n_samples")
        if self.h_per_cell < 4:
            raise ConfigError("h_per_cell must be at least 4", key="h_per_cell")
        if self.macro_N < 8:
            raise ConfigError("macro_N must be at least 8", key="macro_N")
        if self.n_mu < 1:
            raise ConfigError("n_mu must be positive", key="n_mu")
        if self.J is not None and self.J < 1:
            raise ConfigError("J must be positive", key="J")
        if not self.lam < 0:
            raise ConfigError("resolvent lambda must be negative", key="lam")
        if not 0 < self.tol < 1e-2:
            raise ConfigError("tol must lie in (0, 1e-2)", key="tol")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown formats {bad}", key="formats")
        self.seeds = [int(s) for s in self.seeds]
        self.eps_list = [float(e) for e in self.eps_list]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["medium"] = self.medium.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object", key="<root>")
        allowed = {f for f in cls.__dataclass_fields__}
        extra = sorted(set(d) - allowed)
        if extra:
            raise ConfigError(f"unknown config keys {extra}", key=extra[0])
        kw = dict(d)
        if "medium" in kw:
            if not isinstance(kw["medium"], dict):
                raise ConfigError("medium must be an object", key="medium")
            kw["medium"] = MediumSpec.from_dict(kw["medium"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc), key="<root>") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}", key=f"line {exc.lineno}") from exc
        return cls.from_dict(d)

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def parse_eps(text: str) -> list[float]:
    try:
        return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse eps list {text!r}", key="eps_list") from exc


# -- pipelines --------------------------------------------------------------------------


class Outputs:
    """Files written by a run, relative to the output directory."""

    def __init__(self, root: Path, formats):
        self.root = root
        self.formats = set(formats)
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        (self.root / name).write_text(text)
        self.files.append(name)

    def add(self, path) -> None:
        self.files.append(str(Path(path).relative_to(self.root)))

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats


def _rows_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cached_table(shape, J, out: Outputs):
    """Mode table of ``shape`` from the content-keyed cache under ``out``, computing it on a miss."""
    from .shapes import ModeTable, cache_key, modes_for

    name = f"cache/modes_{cache_key(shape, J)}.json"
    path = out.root / name
    if path.exists():
        table = ModeTable.from_json(path.read_text())
        out.files.append(name)
        return table
    path.parent.mkdir(parents=True, exist_ok=True)
    table = modes_for(shape, J)
    out.write(name, table.to_json())
    return table


def _zhikov(cfg: RunConfig, out: Outputs):
    from .zhikov import ZhikovFunction, default_cutoff

    tables = [cached_table(s, cfg.J, out) for s in cfg.medium.shapes]
    zf = ZhikovFunction.from_spec(cfg.medium, tables)
    cutoff = cfg.lambda_max if cfg.lambda_max is not None else default_cutoff(zf)
    return ZhikovFunction.from_spec(cfg.medium, tables, cutoff=cutoff)


def run_modes(cfg: RunConfig, out: Outputs) -> dict:
    summary = []
    for k, shape in enumerate(cfg.medium.shapes):
        t = cached_table(shape, cfg.J, out)
        summary.append({"shape": k, "entries": len(t), "J": t.J, "tail_bound": t.tail_bound, "shape_area": t.shape_area})
        if out.wants("json"):
            out.write(f"modes_{k}.json", t.to_json())
        if out.wants("csv"):
            rows = [{"nu": float(a), "c": float(b), "zero_mean": int(z)} for a, b, z in zip(t.nu, t.c, t.zero_mean)]
            out.write(f"modes_{k}.csv", _rows_csv(rows, ["nu", "c", "zero_mean"]))
    return {"tables": summary}


def run_beta(cfg: RunConfig, out: Outputs) -> dict:
    from .zhikov import band_structure, beta_csv, beta_samples

    if cfg.medium.is_degenerate:
        raise ConfigError("beta needs at least one inclusion shape with positive probability", key="medium.probs")
    zf = _zhikov(cfg, out)
    bs = band_structure(zf)
    rows = beta_samples(zf, bs)
    if out.wants("csv"):
        out.write("beta.csv", beta_csv(rows))
    if out.wants("json"):
        out.write("bands.json", json.dumps(bs.to_dict(), indent=2, sort_keys=True))
    if out.wants("svg"):
        from .plotting import plot_beta

        plot_beta(out.root / "beta.svg", zf, bs, rows=rows)
        out.add(out.root / "beta.svg")
    return {"cutoff": zf.cutoff, "n_bands": len(bs.bands), "n_gaps": len(bs.gaps)}


def run_ahom(cfg: RunConfig, out: Outputs):
    from .homog import ahom_estimate

    est = ahom_estimate(cfg.medium, cfg.L, cfg.n_samples, cfg.seeds[0], cfg.h_per_cell)
    if out.wants("json"):
        out.write("ahom.json", est.to_json())
    return est


def run_spectrum(cfg: RunConfig, out: Outputs) -> dict:
    from .homog import macro_eigs
    from .zhikov import limit_spectrum

    A = cfg.medium.A1_array if cfg.medium.is_degenerate else run_ahom(cfg, out).mean
    mu = macro_eigs(A, cfg.medium.S, cfg.macro_N, cfg.n_mu)
    if cfg.medium.is_degenerate:
        from .zhikov import ZhikovFunction

        cutoff = cfg.lambda_max if cfg.lambda_max is not None else float(mu[-1])
        zf = ZhikovFunction([], np.zeros(0), [1.0], [1.0], cutoff)
    else:
        zf = _zhikov(cfg, out)
    ls = limit_spectrum(zf, mu, zf.cutoff)
    if out.wants("csv"):
        out.write("limit_spectrum.csv", ls.to_csv())
    if out.wants("json"):
        out.write("limit_spectrum.json", ls.to_json())
    if out.wants("svg") and ls.bands:
        from .plotting import plot_beta

        plot_beta(out.root / "beta.svg", zf, ls.structure, mu=mu)
        out.add(out.root / "beta.svg")
    return {"cutoff": ls.cutoff, "n_points": len(ls.points), "n_bands": len(ls.bands)}


def run_converge(cfg: RunConfig, out: Outputs, jobs: int) -> dict:
    from .study import band_cluster_histogram, emit_report, prepare, spectrum_convergence

    setup = prepare(
        cfg.medium,
        cfg.lambda_max,
        cfg.h_per_cell,
        rve_L=cfg.L,
        rve_samples=cfg.n_samples,
        rve_seed=cfg.seeds[0],
        macro_N=cfg.macro_N,
    )
    rep = spectrum_convergence(cfg.medium, cfg.eps_list, cfg.seeds, setup=setup, cells_per_eps=cfg.h_per_cell, tol=cfg.tol, jobs=jobs)
    for p in emit_report(rep, out.formats, out.root):
        out.add(p)
    hist = band_cluster_histogram(rep)
    if out.wants("json"):
        out.write("histogram.json", json.dumps({repr(k): v for k, v in hist.items()}, indent=2, sort_keys=True))
    failed = [r for r in rep.rows if "error" in r]
    return {
        "cutoff": rep.cutoff,
        "cutoff_trim": rep.cutoff_trim,
        "d_forward": {repr(k): v for k, v in rep.seed_average("d_forward").items()},
        "failed_rows": len(failed),
    }


RESOLVENT_COLUMNS = ["eps", "seed", "n_dofs", "n_inclusions", "err_stiff", "err_inclusion", "norm_u", "wall_ms"]


def run_resolvent(cfg: RunConfig, out: Outputs, jobs: int) -> dict:
    from .study import resolvent_convergence

    rows = resolvent_convergence(cfg.medium, cfg.eps_list, cfg.seeds, cfg.lam, cfg.h_per_cell, jobs=jobs, rve_samples=cfg.n_samples)
    if out.wants("csv"):
        out.write("resolvent.csv", _rows_csv(rows, RESOLVENT_COLUMNS))
    if out.wants("json"):
        out.write("resolvent.json", json.dumps(rows, indent=2, sort_keys=True))
    return {"rows": len(rows)}


def run_report(cfg: RunConfig, out: Outputs) -> dict:
    from .study import ConvergenceReport, emit_report

    src = out.root / "convergence.json"
    try:
        rep = ConvergenceReport.from_dict(json.loads(src.read_text()))
    except FileNotFoundError as exc:
        raise OSError(f"no convergence report at {src}; run 'converge' first") from exc
    for p in emit_report(rep, out.formats, out.root):
        out.add(p)
    return {"rows": len(rep.rows)}


def run(cfg: RunConfig, jobs: int = 1) -> tuple[int, dict]:
    """Execute ``cfg`` and write the manifest; returns ``(exit status, manifest)``."""
    out = Outputs(Path(cfg.out), cfg.formats)
    exp = cfg.experiment
    if exp == "modes":
        summary = run_modes(cfg, out)
    elif exp == "beta":
        summary = run_beta(cfg, out)
    elif exp == "spectrum":
        summary = run_spectrum(cfg, out)
    elif exp == "ahom":
        est = run_ahom(cfg, out)
        summary = {"mean": est.mean.tolist()}
    elif exp == "converge":
        summary = run_converge(cfg, out, jobs)
    elif exp == "resolvent":
        summary = run_resolvent(cfg, out, jobs)
    else:
        summary = run_report(cfg, out)
    out.write("config.json", cfg.to_json())
    manifest = {
        "config_hash": cfg.hash(),
        "experiment": exp,
        "seeds": cfg.seeds,
        "files": sorted(set(out.files)) + ["manifest.json"],
        "summary": _plain(summary),
        "versions": _versions(),
    }
    (out.root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0, manifest


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if np.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _versions() -> dict:
    import matplotlib
    import scipy

    from . import __version__

    return {
        "stochhom": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


# -- argument handling ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochhom", description="High-contrast stochastic homogenisation experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: available CPUs)")
    p.add_argument("--seed", type=int, help="first seed; later seeds follow consecutively")
    p.add_argument("--eps", help="comma-separated eps values, fractions allowed (1/16)")
    p.add_argument("--lambda-max", type=float, help="spectral cutoff")
    p.add_argument("--format", help="comma-separated subset of csv,json,svg")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    if args.config:
        d = RunConfig.from_json(Path(args.config).read_text()).to_dict()
    else:
        d = RunConfig().to_dict()
    d["experiment"] = args.experiment
    if args.out is not None:
        d["out"] = args.out
    if args.seed is not None:
        n = len(d["seeds"])
        d["seeds"] = list(range(args.seed, args.seed + n))
    if args.eps is not None:
        d["eps_list"] = parse_eps(args.eps)
    if args.lambda_max is not None:
        d["lambda_max"] = args.lambda_max
    if args.format is not None:
        d["formats"] = [f.strip() for f in args.format.split(",") if f.strip()]
    return RunConfig.from_dict(d)


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc)}
    key = getattr(exc, "key", None)
    if key is not None:
        err["key"] = key
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    if jobs < 1:
        return _fail(2, ConfigError("--jobs must be positive", key="jobs"))
    try:
        cfg = config_from_args(args)
        status, _ = run(cfg, jobs)
        return status
    except ConfigError as exc:
        return _fail(2, exc)
    except NumericError as exc:
        return _fail(3, exc)
    except OSError as exc:
        return _fail(4, exc)
    except StochHomError as exc:
        # geometry, contract and domain violations stem from the configuration
        return _fail(2, exc)


if __name__ == "__main__":
    sys.exit(main())
