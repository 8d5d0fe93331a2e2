import pytest

from holehom.errors import AdmissibilityError, ConfigError
from holehom.io import RunConfig, canonical_json, config_hash, load_config, parse_config


def test_defaults():
    cfg = RunConfig()
    assert cfg.geometry.generator == "LatticeIID"
    assert cfg.geometry.box_side == 16.0
    assert cfg.solver.relative_tolerance == 1e-10
    assert cfg.corrector.resolve_T(16.0) == 256.0
    assert cfg.ensemble.failure_budget == 0.05
    assert cfg.quantify.rstar_threshold_C == 100.0


def test_unknown_key_names_its_path():
    with pytest.raises(ConfigError) as info:
        load_config({"solver": {"tolerence": 1e-8}})
    assert "solver.tolerence" in str(info.value)


@pytest.mark.parametrize("document,path", [
    ({"field": {"cells_per_side": 48}}, "field.cells_per_side"),
    ({"solver": {"relative_tolerance": 2.0}}, "solver.relative_tolerance"),
    ({"twoscale": {"epsilon_list": [0.25, 0.3]}}, "twoscale.epsilon_list"),
    ({"ensemble": {"schedule": []}}, "ensemble.schedule"),
    ({"ensemble": {"diagnostics": ["entropy"]}}, "ensemble.diagnostics"),
    ({"quantify": {"caccioppoli_R": 1.0}}, "quantify"),
    ({"geometry": {"box_side": 4.5}}, "geometry"),
])
def test_invalid_values_name_their_path(document, path):
    with pytest.raises(ConfigError) as info:
        load_config(document)
    assert path in str(info.value)


def test_round_trip_and_hash():
    cfg = load_config({"geometry": {"box_side": 8, "seed": 5}, "ensemble": {"master_seed": 11}})
    restored = load_config(canonical_json(cfg))
    assert restored == cfg
    assert config_hash(restored) == config_hash(cfg)
    assert len(config_hash(cfg)) == 64
    other = load_config({"geometry": {"box_side": 8, "seed": 6}, "ensemble": {"master_seed": 11}})
    assert config_hash(other) != config_hash(cfg)


def test_hash_ignores_key_order():
    first = load_config('{"solver": {"relative_tolerance": 1e-8, "preconditioner": "none"}}')
    second = load_config('{"solver": {"preconditioner": "none", "relative_tolerance": 1e-8}}')
    assert config_hash(first) == config_hash(second)


def test_parse_config_errors(tmp_path, write_config):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.json")
    with pytest.raises(ConfigError):
        parse_config(write_config("{not json"))
    cfg = parse_config(write_config({"field": {"cells_per_side": 32}}))
    assert cfg.field.cells_per_side == 32


def test_resolution_per_unit_length():
    cfg = load_config({"field": {"cells_per_unit": 8}})
    assert cfg.field.resolution(4.0) == 32
    with pytest.raises(ValueError):
        cfg.field.resolution(3.0)


def test_explicit_geometry_checks_admissibility():
    cfg = load_config({"geometry": {
        "generator": "Explicit",
        "box_side": 4.0,
        "separation": 0.5,
        "inclusions": [{"center": [1.0, 1.0], "radius": 0.2}, {"center": [1.3, 1.0], "radius": 0.2}],
    }})
    with pytest.raises(AdmissibilityError):
        cfg.geometry.sample()


def test_explicit_geometry_is_sampled_verbatim():
    cfg = load_config({"geometry": {
        "generator": "Explicit",
        "box_side": 4.0,
        "separation": 0.5,
        "inclusions": [{"center": [1.0, 1.0], "radius": 0.2}],
    }})
    inclusion_set = cfg.geometry.sample()
    assert len(inclusion_set) == 1
    with pytest.raises(ValueError):
        cfg.geometry.sample(box_side=8.0)


def test_geometry_builds_configured_sampler():
    cfg = load_config({"geometry": {"generator": "PoissonHardcore", "box_side": 4.0, "intensity": 2.0}})
    first = cfg.geometry.sample(seed=3)
    assert first.to_document() == cfg.geometry.sample(seed=3).to_document()
    assert first.box_side == 4.0
