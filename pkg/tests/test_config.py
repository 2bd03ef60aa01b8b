import dataclasses

import pytest

from ranimport.config import ConfigError, SimConfig, dump_config, load_config, parse_config
from ranimport.kinetics import KineticConstants
from ranimport.model import InitialConditions, ModelParameters


def test_empty_config_is_reference_run():
    cfg = parse_config("")
    assert cfg.model == ModelParameters()
    assert cfg.model.kinetics == KineticConstants()
    assert cfg.initial == InitialConditions()
    assert cfg.time.dt == 0.01 and cfg.time.t_end == 17.0
    assert cfg.geometry.cell_radius == 10.0 and cfg.geometry.nucleus_radius == 4.0
    assert cfg.mesh.target_h == 1.0 and cfg.mesh.degree == 1


def test_empty_sections_keep_defaults():
    cfg = parse_config("[model]\n[time]\n[initial]\n")
    assert cfg.model == ModelParameters()


def test_overrides():
    cfg = parse_config("""
[model]
advection = off
p_Rd = 2.0
K_M1 = 0.9
k_m1 = 0.4
[initial]
C = 6
cargo_band_width = 1.5
[time]
scheme = crank-nicolson-imex
t_end = 5
""")
    assert cfg.model.advection is False
    assert cfg.model.permeabilities[1] == 2.0
    assert cfg.model.kinetics.K_M1 == 0.9 and cfg.model.kinetics.k_m1 == 0.4
    cargo = [p for p in cfg.initial.profiles if p.species == "C"][0]
    assert cargo.amplitude == 6 and cargo.band_width == 1.5 and cargo.kind == "band"
    assert cfg.time.scheme == "crank-nicolson-imex"
    assert cfg.output.snapshot_times == (0.0, 5.0)


@pytest.mark.parametrize("text,needle", [
    ("[time]\ndt = abc\n", "dt"),
    ("[model]\nbogus = 1\n", "bogus"),
    ("[nonsense]\n", "nonsense"),
    ("[model\n", "line"),
    ("[model]\nadvection = maybe\n", "advection"),
    ("[model]\nd_Rt = -1\n", "diffusivities"),
    ("[time]\nscheme = euler\n", "scheme"),
    ("[mesh]\ntarget_h = 0\n", "target_h"),
])
def test_errors_name_the_problem(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_dump_round_trip():
    cfg = parse_config("[model]\nadvection_speed = 2\nRanGAP = 0.6\n[mesh]\ndegree = 2\n")
    again = parse_config(dump_config(cfg))
    assert again == cfg


def test_dump_of_defaults_round_trips():
    assert parse_config(dump_config(SimConfig())) == SimConfig()


def test_with_helpers_do_not_mutate():
    cfg = SimConfig()
    other = cfg.with_model(advection=False).with_time(t_end=1.0)
    assert cfg.model.advection and cfg.time.t_end == 17.0
    assert not other.model.advection and other.time.t_end == 1.0
    assert dataclasses.replace(cfg) == cfg
