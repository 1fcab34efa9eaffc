import json

import pytest

from sbpcouple.config import (ConfigError, build_problem, build_stepper, list_presets, load_config,
                              load_preset, validate_config, with_resolution)
from sbpcouple.fe_p1 import generate_regular_mesh, save_mesh

REQUIRED = {"fig2_linear", "fig4a", "fig4b", "fig4c", "fig4d", "table5", "table6", "superconv",
            "single_fd", "twobytwo"}


def small(**over):
    cfg = {
        "m": 7,
        "blocks": [{"id": "L", "type": "fd", "rect": [-2, 0, -1, 1]},
                   {"id": "R", "type": "fe", "rect": [0, 2, -1, 1]}],
        "flux": {"name": "linear", "a": [1, 0]},
        "eps": 0.01,
    }
    cfg.update(over)
    return cfg


def pointer_of(cfg):
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    return exc.value.pointer


def test_presets_ship_and_validate():
    names = set(list_presets())
    assert REQUIRED <= names
    for name in names:
        validate_config(load_preset(name))
    with pytest.raises(ConfigError):
        load_preset("nothing")


def test_schema_errors_have_pointers():
    cfg = small()
    cfg["blocks"][0]["order"] = 3
    assert pointer_of(cfg) == "/blocks/0/order"
    assert pointer_of(small(eps=-1)) == "/eps"
    assert pointer_of(small(flux={"name": "linear"})) == "/flux"
    assert pointer_of(small(colour="red")) == "/"


def test_consistency_errors():
    cfg = small()
    cfg["blocks"][1]["id"] = "L"
    assert pointer_of(cfg) == "/blocks/1/id"
    cfg = small()
    cfg["blocks"][1]["rect"] = [-1, 1, -1, 1]
    assert pointer_of(cfg) == "/blocks/1/rect"
    cfg = small()
    cfg["blocks"][0]["rect"] = [0, -2, -1, 1]
    assert pointer_of(cfg) == "/blocks/0/rect"
    assert pointer_of(small(interfaces=[{"left": ["X", "E"], "right": ["R", "W"]}])) == "/interfaces/0/left/0"
    assert pointer_of(small(interfaces=[{"left": ["L", "W"], "right": ["R", "E"]}])) == "/interfaces/0/left/1"
    assert pointer_of(small(interfaces=[{"left": ["L", "E"], "right": ["R", "S"]}])) == "/interfaces/0/right/1"
    assert pointer_of(small(interfaces=[{"left": ["L", "N"], "right": ["R", "S"]}])) == "/interfaces/0"
    assert pointer_of(small(sat="wobbly")) == "/sat"
    assert pointer_of(small(sat={"gamma_L": 1})) == "/sat"
    assert pointer_of(small(solution={"kind": "burgers_tanh", "params": {"eps": 0}})) == "/solution"
    cfg = small()
    del cfg["m"]
    assert pointer_of(cfg) == "/blocks/0"


def test_missing_mesh(tmp_path):
    cfg = small()
    cfg["blocks"][1]["mesh"] = "absent.mesh"
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert pointer_of(load_config(path)) == "/blocks/1/mesh"


def test_mesh_relative_to_config(tmp_path):
    save_mesh(generate_regular_mesh((0, 2, -1, 1), 7, 7), tmp_path / "r.mesh")
    cfg = small()
    cfg["blocks"][1]["mesh"] = "r.mesh"
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    prob = build_problem(validate_config(load_config(path)))
    assert prob.N == 49 + 49 and len(prob.interfaces) == 1


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "m": 5,\n')
    with pytest.raises(ConfigError, match="line"):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.json")


def test_build_problem_and_stepper():
    cfg = validate_config(small(sat={"preset": "fig4a", "delta_L": -1.0}))
    prob = build_problem(cfg)
    assert prob.ids == ["L", "R"] and prob.N == 2 * 49
    assert prob.params.sigma_R == 1.0 and prob.solution is None
    assert cfg["initial"] == "zero"
    st = build_stepper(cfg, prob)
    assert st.dt is None and st.t_end == 1.0
    c2 = validate_config(small(stepper={"t_end": 2.0, "dt_scale": "h", "beta": 0.5}))
    st2 = build_stepper(c2, build_problem(c2))
    assert st2.dt == pytest.approx(0.5 * min(build_problem(c2).h_max()))
    assert with_resolution(cfg, 11)["m"] == 11 and cfg["m"] == 7


def test_refined_fe_block():
    cfg = validate_config(load_preset("table6"))
    prob = build_problem(with_resolution(cfg, 11))
    assert prob.blocks[0].N == 121 and prob.blocks[1].N == 21 * 21


def test_twobytwo_topology():
    prob = build_problem(with_resolution(validate_config(load_preset("twobytwo")), 9))
    assert len(prob.interfaces) == 4
    kinds = {(prob.blocks[d.left_block].kind, prob.blocks[d.right_block].kind) for d in prob.interfaces}
    assert kinds == {("fd", "fe"), ("fe", "fd")}
