"""Command-line experiment runner: convergence studies and the capacitor demo.

    python3 -m parafembem run --experiment smooth --levels 4 --out results/
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bem, cases, errors
from .errors import COLUMNS, ErrorReport
from .mesh import build_capacitor_mesh, build_lshape_mesh, build_time_grid
from .timestep import (CoupledOperators, ProblemData, QuadConfig, WeightScheme,
                       solve_evolution)

log = logging.getLogger(__name__)

EXPERIMENTS = ("smooth", "corner", "time_singular", "capacitor")
SNAPSHOT_TIMES = (0.0125, 0.05, 0.4875, 0.5, 0.6, 1.0)
TAU0 = 0.05


@dataclass
class ExperimentConfig:
    experiment: str = "smooth"
    levels: int = 4
    scheme: str = "euler"
    out: str = "results"
    T: float = 1.0
    volume_order: int = 3
    edge_points: int = 4
    time_points: int = 4
    # composite panels on the first interval; None picks 8 for time_singular, else 1
    first_interval_panels: Optional[int] = None
    refine_extra: int = 2
    # capacitor: diffusion, polarity switch time and exterior sampling grid x0,x1,y0,y1,nx,ny
    diffusion: float = 5.0
    switch_time: float = 0.5
    grid: str = "-3,3,-3,3,25,25"

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        WeightScheme(self.scheme)
        self.grid_spec()

    def quad(self) -> QuadConfig:
        panels = self.first_interval_panels
        if panels is None:
            panels = 8 if self.experiment == "time_singular" else 1
        return QuadConfig(self.volume_order, self.edge_points, self.time_points, panels)

    def grid_spec(self):
        parts = [p.strip() for p in self.grid.split(",")]
        if len(parts) != 6:
            raise ValueError("grid must be x0,x1,y0,y1,nx,ny")
        x0, x1, y0, y1 = map(float, parts[:4])
        nx, ny = int(parts[4]), int(parts[5])
        if nx < 1 or ny < 1:
            raise ValueError("grid needs at least one point per direction")
        return x0, x1, y0, y1, nx, ny


def _coerce(field: dataclasses.Field, text: str):
    kind = field.type if isinstance(field.type, str) else field.type.__name__
    if text.lower() == "none" and "Optional" in kind:
        return None
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def read_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Flat key=value file (``#`` comments); ``overrides`` win over file entries."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(fields[key], val)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- tables

def eoc_columns(report: ErrorReport) -> dict:
    """EOC of every error column against h; the first level gets NaN."""
    out = {}
    for c in errors.ERROR_COLUMNS:
        rates = report.eoc(c) if len(report) > 1 else np.zeros(0)
        out["eoc_" + c] = np.concatenate([[np.nan], rates])
    return out


def write_table(report: ErrorReport, path) -> Path:
    """Whitespace-free comma-separated table with full double precision."""
    if len(report) == 0:
        raise ValueError("empty report")
    path = Path(path)
    eocs = eoc_columns(report)
    header = COLUMNS + list(eocs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, row in enumerate(report.rows):
            vals = [row[c] for c in COLUMNS] + [eocs[c][i] for c in eocs]
            w.writerow([repr(float(v)) for v in vals])
    return path


def read_table(path) -> dict:
    """Column name -> float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in data]) for i, h in enumerate(header)}


def slope_summary(report: ErrorReport) -> str:
    lines = [f"{'column':<18}" + "".join(f"{'l=' + str(i):>9}" for i in range(1, len(report)))]
    for c, rates in eoc_columns(report).items():
        lines.append(f"{c[4:]:<18}" + "".join(f"{r:9.3f}" for r in rates[1:]))
    return "\n".join(lines)


# ---------------------------------------------------------------- studies

def level_grid(level: int, T: float = 1.0):
    """tau = 0.05 * 2^-level, i.e. N = T / tau intervals."""
    return build_time_grid(T, int(round(T / (TAU0 * 2.0 ** -level))))


def run_level(exact: cases.ExactSolution, level: int, cfg: ExperimentConfig) -> dict:
    mesh = build_lshape_mesh(level)
    tgrid = level_grid(level, cfg.T)
    quad = cfg.quad()
    traj = solve_evolution(exact.problem(cfg.T), mesh, tgrid, WeightScheme(cfg.scheme), quad)
    row = errors.measure(traj, exact.u, exact.flux(), quad.time_points,
                         quad.first_interval_panels, refine_extra=cfg.refine_extra,
                         edge_points=quad.edge_points)
    row["invmaxMeshsizeh"] = 1.0 / mesh.h
    row["numberTimeintervals"] = float(tgrid.n_intervals)
    return row


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ErrorReport:
    """Levels 0..levels-1 with simultaneous refinement in h and tau."""
    cfg.validate()
    if cfg.experiment == "capacitor":
        raise ValueError("use run_capacitor for the capacitor demo")
    exact = cases.CASES[cfg.experiment]()
    report = ErrorReport(name=cfg.experiment)
    for level in range(cfg.levels):
        start = time.perf_counter()
        try:
            row = run_level(exact, level, cfg)
            report.append(row)
        except Exception as exc:
            raise RuntimeError(f"{cfg.experiment}, level {level}: {exc}") from exc
        log.info("%s level %d: %.1fs, globalEnergy %.4e", cfg.experiment, level,
                 time.perf_counter() - start, row["globalEnergy"])
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_table(report, out / f"{cfg.experiment}_{cfg.scheme}.csv")
    return report


# ---------------------------------------------------------------- capacitor

def mirror_permutation(vertices: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """perm[i] = index of the vertex at (-x_i, y_i)."""
    key = np.round(vertices / tol).astype(np.int64)
    order = np.lexsort((key[:, 1], key[:, 0]))
    mirrored = key * np.array([-1, 1])
    sorted_keys = key[order]
    mo = np.lexsort((mirrored[:, 1], mirrored[:, 0]))
    if not np.array_equal(sorted_keys, mirrored[mo]):
        raise ValueError("mesh is not mirror symmetric")
    perm = np.empty(len(vertices), dtype=int)
    perm[mo] = order
    return perm


def capacitor_problem(cfg: ExperimentConfig) -> ProblemData:
    s = cfg.switch_time

    # electrode 1 sits at -1 before the switch and at +1 after it
    def polarity(t):
        return -1.0 if t < s else 1.0

    dirichlet = {1: lambda x, y, t: polarity(t) * np.ones_like(x),
                 2: lambda x, y, t: -polarity(t) * np.ones_like(x)}
    return ProblemData(diffusion=cfg.diffusion, dirichlet=dirichlet, T=cfg.T)


@dataclass
class CapacitorResult:
    files: list
    antisymmetry: float
    skipped_points: int
    n_steps: int
    finite: bool


def run_capacitor(cfg: ExperimentConfig) -> CapacitorResult:
    """Solve on refinement level ``levels - 1`` and write one field file per snapshot."""
    cfg.validate()
    level = cfg.levels - 1
    mesh = build_capacitor_mesh(level)
    tgrid = level_grid(level, cfg.T)
    data = capacitor_problem(cfg)
    ops = CoupledOperators(mesh, data.diffusion)
    traj = solve_evolution(data, mesh, tgrid, WeightScheme(cfg.scheme), cfg.quad(), ops=ops)

    perm = mirror_permutation(mesh.vertices)
    scale = max(np.abs(traj.u).max(), 1e-300)
    defect = float(np.abs(traj.u + traj.u[:, perm]).max() / scale)

    x0, x1, y0, y1, nx, ny = cfg.grid_spec()
    X, Y = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny), indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    inside = np.all(np.abs(pts) <= 2.0 + 1e-12, axis=1)
    outside = pts[~inside]
    skipped = int(inside.sum())
    if skipped:
        log.warning("%d sampling points inside the closed domain were skipped", skipped)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    v = mesh.vertices
    for ts in SNAPSHOT_TIMES:
        if ts > cfg.T + 1e-12:
            continue
        n = max(tgrid.index_of(ts), 1)
        trace = ops.R @ traj.u[n]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ue = bem.evaluate_exterior(ops.pair, trace, traj.phi[n - 1], outside)[0] \
                if len(outside) else np.zeros(0)
        path = out / f"capacitor_t{ts:.4f}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# time", repr(float(tgrid.nodes[n])), "skipped", skipped])
            w.writerow(["region", "x", "y", "value"])
            for (x, y), val in zip(v, traj.u[n]):
                w.writerow(["interior", repr(float(x)), repr(float(y)), repr(float(val))])
            for (x, y), val in zip(outside, ue):
                w.writerow(["exterior", repr(float(x)), repr(float(y)), repr(float(val))])
        files.append(path)
    return CapacitorResult(files, defect, skipped, tgrid.n_intervals,
                           bool(np.all(np.isfinite(traj.u)) and np.all(np.isfinite(traj.phi))))


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parafembem")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a convergence study or the capacitor demo")
    r.add_argument("--experiment", choices=EXPERIMENTS)
    r.add_argument("--levels", type=int)
    r.add_argument("--scheme", choices=[s.value for s in WeightScheme])
    r.add_argument("--config", help="flat key=value file")
    r.add_argument("--out")
    r.add_argument("--slopes", action="store_true", help="print log-log slopes to stdout")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = read_config(args.config, {"experiment": args.experiment, "levels": args.levels,
                                        "scheme": args.scheme, "out": args.out})
        if cfg.experiment == "capacitor":
            res = run_capacitor(cfg)
            print(f"capacitor: {res.n_steps} steps, antisymmetry defect {res.antisymmetry:.3e}, "
                  f"{len(res.files)} snapshots, {res.skipped_points} sampling points skipped")
            return 0 if res.finite else 1
        report = run_experiment(cfg)
        print(f"wrote {Path(cfg.out) / f'{cfg.experiment}_{cfg.scheme}.csv'}")
        if args.slopes:
            print(slope_summary(report))
    except Exception as exc:  # diagnostic and nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
