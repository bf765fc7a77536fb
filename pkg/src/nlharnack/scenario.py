"""Scenario files: YAML documents describing kernel, domain, fields and the
solver / verification / output options."""
from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .grid import DomainGrid, ScenarioFields, sample_field
from .kernel import SHAPES, KernelProfile

SECTIONS = {
    "scenario_id": None,
    "kernel": {"shape", "r0", "m0", "M0", "spike_half_width", "spike_center", "table", "normalize"},
    "domain": {"dim", "boxes", "h", "periodic"},
    "fields": {"g", "b", "beta", "vanish_threshold", "p_exponent"},
    "solver": {"tol", "max_iter", "mollifier_widths", "quadrature_refine", "exhaustion_boxes",
               "anchor", "eta1", "stop_tol", "normalize"},
    "verify": {"checks", "omega", "eta", "nu", "eps", "C0", "delta", "x", "r", "sigma",
               "omega_prime", "omega_dprime", "cone", "field", "bound"},
    "output": {"dir", "emit_fields", "emit_plot_tables"},
    "sweep": {"grid"},
    "counterexample": {"half_widths", "n_nodes", "omega_half"},
}
REQUIRED = ("scenario_id", "kernel", "domain", "fields")
CHECKS = ("harnack_ratio", "boundary_harnack", "l1_contraction", "local_domination",
          "pointwise_lower", "ball_comparability", "supermedian_ratio")
SWEEP_KEYS = ("eta", "h", "mollifier_width", "eps")


def _check_keys(where, got, allowed):
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def validate_config(cfg: dict, base_dir: str = ".") -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("scenario file must hold a mapping")
    _check_keys("scenario", cfg, SECTIONS)
    for k in REQUIRED:
        if k not in cfg:
            raise ConfigError(f"missing section {k!r}")
    if not isinstance(cfg["scenario_id"], str) or not cfg["scenario_id"]:
        raise ConfigError("scenario_id must be a nonempty string")
    for sec, allowed in SECTIONS.items():
        if allowed is None or sec not in cfg:
            continue
        if not isinstance(cfg[sec], dict):
            raise ConfigError(f"section {sec!r} must be a mapping")
        _check_keys(sec, cfg[sec], allowed)
    k = cfg["kernel"]
    if k.get("shape") not in SHAPES:
        raise ConfigError(f"kernel.shape must be one of {SHAPES}")
    dom = cfg["domain"]
    for key in ("dim", "boxes", "h"):
        if key not in dom:
            raise ConfigError(f"domain.{key} is required")
    fl = cfg["fields"]
    for key in ("g", "b", "beta"):
        if key not in fl:
            raise ConfigError(f"fields.{key} is required")
    for key in ("g", "b"):
        spec = fl[key]
        if isinstance(spec, str) and spec.startswith("file:"):
            path = spec[5:]
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            if not os.path.exists(path):
                raise ConfigError(f"fields.{key} refers to a missing file {path}")
    ver = cfg.get("verify", {})
    for c in ver.get("checks", []):
        if c not in CHECKS:
            raise ConfigError(f"unknown check {c!r}; known: {', '.join(CHECKS)}")
    if "field" in ver:
        path = ver["field"] if os.path.isabs(ver["field"]) else os.path.join(base_dir, ver["field"])
        if not os.path.exists(path):
            raise ConfigError(f"verify.field refers to a missing file {path}")
    sw = cfg.get("sweep", {})
    if "grid" in sw:
        if not isinstance(sw["grid"], dict) or not sw["grid"]:
            raise ConfigError("sweep.grid must be a nonempty mapping of parameter lists")
        _check_keys("sweep.grid", sw["grid"], SWEEP_KEYS)
    return cfg


def load_config(path) -> tuple[dict, str]:
    try:
        with open(path) as f:
            cfg = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"cannot read {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    base = os.path.dirname(os.path.abspath(path))
    return validate_config(cfg, base), base


def _boxes(dom):
    dim = int(dom["dim"])
    out = []
    for box in dom["boxes"]:
        if dim == 1 and len(box) == 2 and all(isinstance(v, (int, float)) for v in box):
            box = [box]
        if len(box) != dim or any(len(iv) != 2 for iv in box):
            raise ConfigError(f"box {box} does not have one [lo, hi] pair per axis")
        out.append(tuple((float(lo), float(hi)) for lo, hi in box))
    if not out:
        raise ConfigError("domain.boxes is empty")
    return tuple(out)


def build_grid(dom: dict) -> DomainGrid:
    boxes = _boxes(dom)
    dim = int(dom["dim"])
    bounds = tuple((min(b[k][0] for b in boxes), max(b[k][1] for b in boxes)) for k in range(dim))
    try:
        return DomainGrid(bounds, float(dom["h"]), boxes if len(boxes) > 1 else None,
                          bool(dom.get("periodic", False)))
    except ValueError as e:
        raise ConfigError(f"domain: {e}") from None


def build_profile(k: dict, d: int) -> KernelProfile:
    shape = k["shape"]
    try:
        if shape == "box":
            prof = KernelProfile.box(d)
        elif shape == "bump":
            prof = KernelProfile.bump(d, float(k.get("r0", 0.5)))
        elif shape == "piecewise_table":
            if "table" not in k:
                raise ConfigError("piecewise_table needs kernel.table")
            prof = KernelProfile.from_table(d, k["table"], r0=k.get("r0"),
                                            normalize=bool(k.get("normalize", False)))
        else:
            prof = KernelProfile.two_spike(float(k["spike_half_width"]),
                                           float(k.get("spike_center", 2 * math.pi)))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"kernel: {e}") from None
    # declared constants may be weaker than the computed ones, never stronger
    if shape != "two_spike":
        if "r0" in k and shape == "box" and float(k["r0"]) > prof.r0:
            raise ConfigError("kernel.r0 exceeds the box radius")
        if "m0" in k and float(k["m0"]) > prof.min_on_ball(prof.r0) * (1 + 1e-12):
            raise ConfigError(f"kernel.m0 = {k['m0']} exceeds min J on B(0, r0) = {prof.m0}")
        if "M0" in k and float(k["M0"]) < prof.sup_norm() * (1 - 1e-12):
            raise ConfigError(f"kernel.M0 = {k['M0']} is below sup J = {prof.M0}")
    return prof


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: str
    profile: KernelProfile
    fields: ScenarioFields
    b_is_a: bool = False
    config: dict = field(default_factory=dict)
    base_dir: str = "."


def build_scenario(cfg: dict, base_dir: str = ".") -> Scenario:
    grid = build_grid(cfg["domain"])
    prof = build_profile(cfg["kernel"], grid.d)
    fl = cfg["fields"]
    try:
        g = sample_field(fl["g"], grid, base_dir)
        b_is_a = fl["b"] in ("a", "exit_rate")
        b = np.ones(grid.n) if b_is_a else sample_field(fl["b"], grid, base_dir)
        fields = ScenarioFields(grid, g, b, float(fl["beta"]), float(fl.get("p_exponent", 2.0)),
                                float(fl.get("vanish_threshold", 0.0)))
    except ValueError as e:
        raise ConfigError(f"fields: {e}") from None
    if b_is_a:
        from .operator import exit_rate

        fields = fields.with_b(exit_rate(prof, fields))
    return Scenario(cfg["scenario_id"], prof, fields, b_is_a, cfg, base_dir)


def with_overrides(cfg: dict, **params) -> dict:
    """Copy of ``cfg`` with sweep parameters substituted."""
    out = copy.deepcopy(cfg)
    for k, v in params.items():
        if k == "h":
            out["domain"]["h"] = v
        elif k == "mollifier_width":
            out.setdefault("solver", {})["mollifier_widths"] = [v]
        elif k in ("eta", "eps"):
            out.setdefault("verify", {})[k] = v
        else:
            raise ConfigError(f"cannot sweep {k!r}")
    return out
