"""Run configuration: JSON schema, validation and problem construction."""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .fe_p1 import MeshError, assemble_fe_block, generate_regular_mesh, load_mesh
from .multiblock import MultiblockProblem, find_interfaces
from .problems import AnalyticSolution, make_flux
from .sat_coupling import SIDES, SatParams, sat_preset
from .sbp_fd import assemble_fd_block
from .time_integration import TimeStepper


class ConfigError(ValueError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


_NUM = {"type": "number"}
_RECT = {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4}
_SIDE_REF = {"type": "array", "prefixItems": [{"type": "string"}, {"enum": list(SIDES)}],
             "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["blocks", "flux"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "m": {"type": "integer", "minimum": 3},
        "blocks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "type", "rect"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string"},
                    "type": {"enum": ["fd", "fe"]},
                    "rect": _RECT,
                    "n": {"type": "integer", "minimum": 3},
                    "m": {"type": "integer", "minimum": 3},
                    "order": {"enum": [2, 4]},
                    "nx": {"type": "integer", "minimum": 2},
                    "ny": {"type": "integer", "minimum": 2},
                    "refine": {"type": "integer", "minimum": 1},
                    "mesh": {"type": "string"},
                },
            },
        },
        "interfaces": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["left", "right"],
                "additionalProperties": False,
                "properties": {"left": _SIDE_REF, "right": _SIDE_REF},
            },
        },
        "flux": {
            "type": "object",
            "required": ["name", "a"],
            "additionalProperties": False,
            "properties": {
                "name": {"enum": ["linear", "burgers"]},
                "a": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
        },
        "eps": {"type": "number", "minimum": 0},
        "solution": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(AnalyticSolution.KINDS)},
                "params": {"type": "object"},
            },
        },
        "initial": {"enum": ["exact", "zero"]},
        "zero_boundary_data": {"type": "boolean"},
        "sat": {
            "oneOf": [
                {"type": "string"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "preset": {"type": "string"},
                        "tau": {"oneOf": [_NUM, {"type": "array", "items": _NUM,
                                                 "minItems": 4, "maxItems": 4}]},
                        **{k: _NUM for k in ("alpha_L", "alpha_R", "beta_L", "beta_R",
                                             "delta_L", "delta_R", "sigma_L", "sigma_R")},
                    },
                },
            ]
        },
        "stepper": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": {"type": "number", "minimum": 0},
                "t_start": {"type": "number"},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "dt_scale": {"enum": ["h2", "h"]},
            },
        },
        "ladder": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    },
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def list_presets() -> list:
    root = resources.files("sbpcouple") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    root = resources.files("sbpcouple") / "presets"
    path = root / f"{name}.json"
    if not path.is_file():
        raise ConfigError("/", f"unknown preset {name!r}; choose from {list_presets()}")
    return json.loads(path.read_text())


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("/", f"cannot read {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    cfg.setdefault("_base", str(Path(path).resolve().parent))
    return cfg


def validate_config(cfg: dict) -> dict:
    """Schema and consistency checks; returns a normalised copy."""
    cfg = copy.deepcopy(cfg)
    base = cfg.pop("_base", None)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_pointer(e.absolute_path), e.message)
    ids = [b["id"] for b in cfg["blocks"]]
    for i, b in enumerate(cfg["blocks"]):
        if ids.index(b["id"]) != i:
            raise ConfigError(f"/blocks/{i}/id", f"duplicate block id {b['id']!r}")
        x_l, x_r, y_l, y_r = b["rect"]
        if not (x_r > x_l and y_r > y_l):
            raise ConfigError(f"/blocks/{i}/rect", "rectangle is degenerate")
        if b["type"] == "fd" and "m" not in b and "m" not in cfg:
            raise ConfigError(f"/blocks/{i}", "FD block needs a resolution (block m or top-level m)")
        if b["type"] == "fe" and not ({"nx", "mesh"} & set(b)) and "m" not in cfg:
            raise ConfigError(f"/blocks/{i}", "FE block needs nx/ny, a mesh or a top-level m")
        if b["type"] == "fe" and "nx" in b and "ny" not in b:
            raise ConfigError(f"/blocks/{i}", "nx given without ny")
    for i, a in enumerate(cfg["blocks"]):
        for j in range(i + 1, len(cfg["blocks"])):
            b = cfg["blocks"][j]
            ra, rb = a["rect"], b["rect"]
            ox = min(ra[1], rb[1]) - max(ra[0], rb[0])
            oy = min(ra[3], rb[3]) - max(ra[2], rb[2])
            if ox > 1e-12 and oy > 1e-12:
                raise ConfigError(f"/blocks/{j}/rect", f"overlaps block {a['id']!r}")
    for i, it in enumerate(cfg.get("interfaces", [])):
        for key in ("left", "right"):
            if it[key][0] not in ids:
                raise ConfigError(f"/interfaces/{i}/{key}/0", f"unknown block {it[key][0]!r}")
        if it["left"][1] not in ("E", "N"):
            raise ConfigError(f"/interfaces/{i}/left/1", "left side must be E or N")
        opposite = {"E": "W", "N": "S"}[it["left"][1]]
        if it["right"][1] != opposite:
            raise ConfigError(f"/interfaces/{i}/right/1", f"right side must be {opposite}")
        ra = cfg["blocks"][ids.index(it["left"][0])]["rect"]
        rb = cfg["blocks"][ids.index(it["right"][0])]["rect"]
        if it["left"][1] == "E":
            ok = abs(ra[1] - rb[0]) < 1e-9 and abs(ra[2] - rb[2]) < 1e-9 and abs(ra[3] - rb[3]) < 1e-9
        else:
            ok = abs(ra[3] - rb[2]) < 1e-9 and abs(ra[0] - rb[0]) < 1e-9 and abs(ra[1] - rb[1]) < 1e-9
        if not ok:
            raise ConfigError(f"/interfaces/{i}", "sides are not geometrically coincident")
    sat = cfg.get("sat", "stable")
    try:
        _sat_params(sat)
    except ValueError as exc:
        raise ConfigError("/sat", str(exc)) from None
    sol = cfg.get("solution")
    if sol is not None:
        try:
            AnalyticSolution(sol["kind"], dict(sol.get("params", {})))
        except (ValueError, TypeError) as exc:
            raise ConfigError("/solution", str(exc)) from None
    if cfg.get("initial", "exact") == "exact" and sol is None:
        cfg["initial"] = "zero"
    for i, b in enumerate(cfg["blocks"]):
        if "mesh" in b and base is not None and not Path(b["mesh"]).is_absolute():
            b["mesh"] = str(Path(base) / b["mesh"])
        if "mesh" in b and not Path(b["mesh"]).is_file():
            raise ConfigError(f"/blocks/{i}/mesh", f"mesh file {b['mesh']!r} not found")
    return cfg


def _sat_params(sat) -> SatParams:
    if isinstance(sat, str):
        return sat_preset(sat)
    sat = dict(sat)
    preset = sat.pop("preset", "stable")
    base = sat_preset(preset).as_dict()
    base.update(sat)
    return SatParams.from_dict(base)


def with_resolution(cfg: dict, m: int) -> dict:
    out = copy.deepcopy(cfg)
    out["m"] = int(m)
    return out


def build_problem(cfg: dict) -> MultiblockProblem:
    """Assemble the problem described by a validated config."""
    eps = float(cfg.get("eps", 0.0))
    m_top = cfg.get("m")
    blocks, ids = [], []
    for i, b in enumerate(cfg["blocks"]):
        try:
            if b["type"] == "fd":
                n = b.get("n", b.get("m", m_top))
                m = b.get("m", m_top) if "m" in b else (b.get("n", m_top) if "n" in b else m_top)
                blocks.append(assemble_fd_block(b["rect"], int(n), int(m), int(b.get("order", 2)), eps))
            else:
                if "mesh" in b:
                    mesh = load_mesh(b["mesh"])
                elif "nx" in b:
                    mesh = generate_regular_mesh(b["rect"], int(b["nx"]), int(b["ny"]))
                else:
                    r = int(b.get("refine", 1))
                    k = r * (int(m_top) - 1) + 1
                    mesh = generate_regular_mesh(b["rect"], k, k)
                blocks.append(assemble_fe_block(mesh, eps))
        except (ValueError, MeshError) as exc:
            raise ConfigError(f"/blocks/{i}", str(exc)) from None
        ids.append(b["id"])
    if "interfaces" in cfg:
        interfaces = [(ids.index(it["left"][0]), it["left"][1],
                       ids.index(it["right"][0]), it["right"][1]) for it in cfg["interfaces"]]
    else:
        interfaces = find_interfaces(blocks)
    sol = cfg.get("solution")
    solution = AnalyticSolution(sol["kind"], dict(sol.get("params", {}))) if sol else None
    flux = make_flux(cfg["flux"]["name"], cfg["flux"]["a"])
    try:
        return MultiblockProblem(blocks, flux, _sat_params(cfg.get("sat", "stable")), interfaces,
                                 solution, bool(cfg.get("zero_boundary_data", False)), ids)
    except ValueError as exc:
        raise ConfigError("/interfaces", str(exc)) from None


def build_stepper(cfg: dict, problem=None) -> TimeStepper:
    st = cfg.get("stepper", {})
    dt = st.get("dt")
    beta = float(st.get("beta", 0.1))
    if dt is None and st.get("dt_scale") == "h" and problem is not None:
        dt = min(beta * h for h in problem.h_max())
    return TimeStepper(t_end=float(st.get("t_end", 1.0)), beta=beta, dt=dt,
                       t_start=float(st.get("t_start", 0.0)))
