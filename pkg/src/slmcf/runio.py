"""Scenario configuration, validation, and run persistence.

A scenario is a single JSON document:

    {
      "name": "disk_phi02",
      "metric": {"id": "flat"},
      "domain": {"kind": "disk", "radius": 1.0},
      "phi": {"kind": "constant", "value": 0.2},
      "u0": {"kind": "constant", "value": 0.0},
      "grid": {"n_radial": 64, "n_angular": 128},
      "stepper": {"dt": 0.01, "tol_speed": 1e-7, "max_time": 10.0},
      "continuation": {"eps0": 1.0, "ratio": 0.5, "eps_min": 1e-6},
      "seed_label": "baseline"
    }

Validation on load rejects non-convex domains, negative ambient curvature on
the closure, non-space-like initial data and mismatched phi tables.  The
scenario hash is the sha256 of the canonical (sorted-keys, compact) JSON
encoding; every CSV artifact carries it in a leading comment so a manifest
can be validated against its files.

CSV conventions: UTF-8, comma delimiter, "." decimal point, float cells in
repr (shortest round-trip) form; identical configs produce byte-identical
files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import pathlib

import numpy as np

from . import __version__
from .domain import build_domain
from .errors import ScenarioError
from .flow import StepperConfig
from .geometry import gradient_fields
from .grid import ContactAngle, CurvilinearGrid, GridFunction, build_grid
from .metrics import get_metric
from .translator import ContinuationSchedule, NewtonConfig

_CURVATURE_FLOOR = -1e-12


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def scenario_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def scenario_core_hash(config: dict) -> str:
    """Hash ignoring u0 and solver knobs; used to pair runs of one scenario."""
    core = {k: config.get(k) for k in ("metric", "domain", "phi", "grid")}
    return hashlib.sha256(canonical_json(core).encode()).hexdigest()[:16]


@dataclasses.dataclass
class Scenario:
    config: dict
    metric: object
    domain: object
    grid: CurvilinearGrid
    phi: ContactAngle
    u0: GridFunction
    stepper: StepperConfig
    continuation: ContinuationSchedule

    @property
    def hash(self):
        return scenario_hash(self.config)

    @property
    def core_hash(self):
        return scenario_core_hash(self.config)

    @property
    def name(self):
        return self.config.get("name", "scenario")


def _build_u0(spec: dict, grid: CurvilinearGrid) -> GridFunction:
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return GridFunction.constant(grid, float(spec.get("value", 0.0)))
    if kind == "polynomial":
        terms = spec.get("terms", [])

        def poly(x, y):
            out = np.zeros_like(x)
            for c, px, py in terms:
                out = out + float(c) * x ** int(px) * y ** int(py)
            return out

        return GridFunction.from_chart(grid, poly)
    if kind == "sampled":
        vals = np.asarray(spec["values"], dtype=float)
        if vals.shape != (grid.n_radial, grid.n_angular):
            raise ScenarioError(
                f"sampled u0 shape {vals.shape} != grid ({grid.n_radial}, {grid.n_angular})")
        return GridFunction(vals, grid)
    raise ScenarioError(f"unknown u0 kind '{kind}'")


def load_scenario(config: dict) -> Scenario:
    """Validate a config dict and build all runtime objects."""
    if not isinstance(config, dict):
        raise ScenarioError("scenario config must be a JSON object")
    for key in ("metric", "domain", "phi", "grid"):
        if key not in config:
            raise ScenarioError(f"scenario missing required section '{key}'")

    metric = get_metric(config["metric"].get("id", "flat"))
    domain = build_domain(config["domain"], metric)  # checks kappa0 > 0
    gspec = config["grid"]
    grid = build_grid(domain, int(gspec["n_radial"]), int(gspec["n_angular"]))

    if np.min(grid.gauss) < _CURVATURE_FLOOR:
        raise ScenarioError(
            f"ambient Gaussian curvature is negative on the domain closure "
            f"(min K = {np.min(grid.gauss):.3e}); scenario rejected")

    phi = ContactAngle(config["phi"], domain, n_angular=grid.n_angular)
    u0 = _build_u0(config.get("u0", {"kind": "constant", "value": 0.0}), grid)
    _, _, du2, _ = gradient_fields(u0.values, grid, ghost=None, guard=False)
    if float(np.max(du2)) >= 1.0 - 1e-10:
        raise ScenarioError(
            f"initial data is not space-like: sup |Du0|^2 = {float(np.max(du2)):.6f}")

    stepper_cfg = dict(config.get("stepper", {}))
    dense = stepper_cfg.pop("dense_sample_times", ())
    stepper = StepperConfig(dense_sample_times=tuple(dense), **stepper_cfg)

    cont_cfg = dict(config.get("continuation", {}))
    newton = NewtonConfig(**cont_cfg.pop("newton", {}))
    continuation = ContinuationSchedule(newton=newton, **cont_cfg)

    return Scenario(config=config, metric=metric, domain=domain, grid=grid,
                    phi=phi, u0=u0, stepper=stepper, continuation=continuation)


def load_scenario_file(path) -> Scenario:
    path = pathlib.Path(path)
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ScenarioError(f"invalid JSON in {path}: {err}") from None
    return load_scenario(config)


# -- CSV ------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows, header: dict):
    path = pathlib.Path(path)
    lines = [f"# {k}: {v}" for k, v in header.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    """Returns (header dict, column names, float ndarray)."""
    header = {}
    columns = None
    data = []
    for line in pathlib.Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            header[key.strip()] = val.strip()
        elif columns is None:
            columns = line.split(",")
        elif line:
            data.append([float(x) for x in line.split(",")])
    return header, columns, np.asarray(data)


def write_series_csv(path, run, header):
    cols = ["t", "sup_ut", "sup_du2", "mean_ut", "hv_residual", "osc_vs_reference"]
    rows = zip(*(run.series[c] for c in cols))
    write_csv(path, cols, rows, {**header, "columns": "time, sup|u_t|, sup|Du|^2, "
              "area-mean u_t, max|u_t - Hv|, osc(u - reference)"})


def write_energy_csv(path, run, header):
    cols = ["t", "E", "I", "residual"]
    rows = zip(*(run.energy[c] for c in cols))
    write_csv(path, cols, rows, {**header, "columns": "time, int v - bdry int u phi, "
              "int u_t^2/v, per-step identity residual"})


def write_field_csv(path, grid: CurvilinearGrid, values, header):
    cols = ["i", "j", "rho", "s", "x1", "x2", "u"]
    rows = []
    for i in range(grid.n_radial):
        for j in range(grid.n_angular):
            rows.append((i, j, grid.rho[i], grid.s[j],
                         grid.X[i, j, 0], grid.X[i, j, 1], values[i, j]))
    write_csv(path, cols, rows, header)


def read_field_csv(path, grid: CurvilinearGrid):
    header, _, data = read_csv(path)
    values = np.full((grid.n_radial, grid.n_angular), np.nan)
    ii = data[:, 0].astype(int)
    jj = data[:, 1].astype(int)
    values[ii, jj] = data[:, 6]
    if np.any(np.isnan(values)):
        raise ScenarioError(f"field file {path} does not cover the grid")
    return header, values


def write_grid_csv(path, grid: CurvilinearGrid, header):
    cols = ["i", "j", "rho", "s", "x1", "x2", "weight"]
    write_csv(path, cols, grid.node_table(), header)


# -- manifests --------------------------------------------------------------------

def write_manifest(path, manifest: dict):
    pathlib.Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")


def load_manifest(path):
    return json.loads(pathlib.Path(path).read_text(encoding="utf-8"))


def validate_manifest(run_dir) -> dict:
    """Check the manifest's files exist and carry the scenario hash."""
    run_dir = pathlib.Path(run_dir)
    manifest = load_manifest(run_dir / "manifest.json")
    expect = manifest["scenario_hash"]
    files = []
    for entry in manifest["files"].values():
        files.extend(entry if isinstance(entry, list) else [entry])
    for rel in files:
        fp = run_dir / rel
        if not fp.exists():
            raise ScenarioError(f"manifest lists missing file {rel}")
        if fp.suffix == ".csv":
            header, _, _ = read_csv(fp)
            if header.get("scenario") != expect:
                raise ScenarioError(f"{rel} carries scenario hash "
                                    f"{header.get('scenario')} != {expect}")
    return manifest


def standard_header(scenario: Scenario) -> dict:
    return {"scenario": scenario.hash, "tool": f"slmcf {__version__}"}
