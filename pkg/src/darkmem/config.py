"""Run configuration: one JSON document, schema-checked, turned into model objects."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .design_space import ComputeUnitSpec, default_fmadd_spec
from .energy_model import DEFAULT_PROFILE, PJ, TechProfile
from .errors import ConfigError
from .memory_hierarchy import HierarchyGrids
from .optimizer import Constraints
from .workloads import GemmProblem, MissCurveWorkload

PROFILE_ENV = "DARKMEM_PROFILE"


def load_schema(name: str) -> dict:
    text = resources.files("darkmem").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, schema_name: str) -> None:
    """Raise ConfigError when ``doc`` does not match the named shipped schema."""
    try:
        jsonschema.validate(doc, load_schema(schema_name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{schema_name}: {where}: {exc.message}") from None


@dataclass(frozen=True)
class RunConfig:
    profile: TechProfile = DEFAULT_PROFILE
    compute: ComputeUnitSpec = field(default_factory=default_fmadd_spec)
    grids: HierarchyGrids = HierarchyGrids()
    workload: GemmProblem | MissCurveWorkload = GemmProblem(4096, "fp64")
    gemm_blocks: tuple = ()
    gemm_capacities: tuple = ()
    throughput: float = 256e9  # op/s
    constraints: Constraints = Constraints(200.0, 60.0, 50.0)
    contour_areas: tuple = (25.0, 50.0, 100.0, 200.0, 400.0, 800.0)
    contour_powers: tuple = (5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 120.0)
    output_dir: Path = Path("darkmem-out")
    mode: str = "discrete"
    plot: bool = True
    seed: int = 0

    @property
    def precision(self) -> str:
        return self.workload.precision


def _resolve_profile(value, base_dir: Path, env_path: str | None) -> TechProfile:
    try:
        if env_path:
            value, base_dir = env_path, Path(".")
        if value is None:
            return DEFAULT_PROFILE
        if isinstance(value, str):
            path = Path(value)
            if not path.is_absolute():
                path = base_dir / path
            doc = json.loads(path.read_text())
        else:
            doc = value
        validate(doc, "profile")
        return TechProfile.from_dict(doc)
    except ConfigError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"profile: {exc}") from None


def _compute_spec(doc: dict, profile: TechProfile, precision: str) -> ComputeUnitSpec:
    kw = {}
    if "base_delay_ns" in doc:
        kw["base_delay"] = doc["base_delay_ns"] * 1e-9
    if "base_area_mm2" in doc:
        kw["base_area"] = doc["base_area_mm2"]
    if "base_energy_pj" in doc:
        kw["base_energy"] = doc["base_energy_pj"] * PJ
    for key in ("depth_grid", "voltage_grid", "sizing_grid"):
        if key in doc:
            kw[key] = tuple(doc[key])
    for key in ("pipe_register_energy_fraction", "pipe_area_fraction"):
        if key in doc:
            kw[key] = doc[key]
    return default_fmadd_spec(profile, doc.get("precision", precision), **kw)


def _workload(doc):
    if doc is None:
        return GemmProblem(4096, "fp64"), (), ()
    if "gemm" in doc:
        g = doc["gemm"]
        return (GemmProblem(g["n"], g.get("precision", "fp64")),
                tuple(g.get("blocks", ())), tuple(g.get("capacities_words", ())))
    m = doc["miss_curve"]
    wl = MissCurveWorkload(tuple(tuple(p) for p in m["points"]), m.get("ops_label", "op"),
                           m.get("precision", "fp64"))
    return wl, (), ()


def config_from_dict(doc: dict, base_dir: Path = Path("."),
                     env: dict | None = None) -> RunConfig:
    """Validate ``doc`` and build a RunConfig; every failure is a ConfigError."""
    validate(doc, "config")
    env = os.environ if env is None else env
    try:
        profile = _resolve_profile(doc.get("profile"), base_dir, env.get(PROFILE_ENV))
        workload, blocks, caps = _workload(doc.get("workload"))
        precision = workload.precision
        compute = _compute_spec(doc.get("design_space", {}), profile, precision)
        h = doc.get("hierarchy", {})
        grids = HierarchyGrids(
            capacity_grid=tuple(sorted(set(h.get("capacity_grid", HierarchyGrids.capacity_grid)))),
            level_counts=tuple(sorted(set(h.get("level_counts", HierarchyGrids.level_counts)))),
            register_file_words=h.get("register_file_words", 64),
            max_configs=h.get("max_configs", HierarchyGrids.max_configs),
            compulsory_per_level=h.get("compulsory_per_level", True),
            seed=doc.get("seed", 0))
        cfg = RunConfig(profile=profile, compute=compute, grids=grids, workload=workload,
                        gemm_blocks=blocks, gemm_capacities=caps,
                        output_dir=Path(doc.get("output_dir", "darkmem-out")),
                        mode=doc.get("mode", "discrete"), plot=doc.get("plot", True),
                        seed=doc.get("seed", 0))
        if "throughput_gops" in doc:
            cfg = replace(cfg, throughput=doc["throughput_gops"] * 1e9)
        if "constraints" in doc:
            c = doc["constraints"]
            cfg = replace(cfg, constraints=Constraints(c["area_mm2"], c["power_w"],
                                                       c.get("density_w_per_cm2")))
        if "contour" in doc:
            cfg = replace(cfg, contour_areas=tuple(doc["contour"].get("areas_mm2", cfg.contour_areas)),
                          contour_powers=tuple(doc["contour"].get("powers_w", cfg.contour_powers)))
        return cfg
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None, env: dict | None = None) -> RunConfig:
    """Read a config file; ``None`` gives the built-in defaults (env still applies)."""
    if path is None:
        return config_from_dict({}, env=env)
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc, path.parent, env)
