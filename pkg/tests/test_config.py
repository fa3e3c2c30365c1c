import pytest

from anoml.config import ConfigError, load_config, parse_config, require


def test_scalars_and_tables():
    cfg = parse_config("""
name = "run1"
count = 3
rate = 1.5
enabled = true
tags = ["a", "b"]

[nested]
key = "v"
""")
    assert cfg["name"] == "run1"
    assert cfg["count"] == 3
    assert cfg["rate"] == 1.5
    assert cfg["enabled"] is True
    assert cfg["tags"] == ["a", "b"]
    assert cfg["nested"]["key"] == "v"


def test_table_arrays():
    cfg = parse_config("""
[[nodes]]
id = "a"
[[nodes]]
id = "b"
""")
    assert [n["id"] for n in cfg["nodes"]] == ["a", "b"]


def test_parse_error():
    with pytest.raises(ConfigError):
        parse_config("not valid = = toml")


def test_load_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/path.cfg")


def test_load_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text('sr = "mad"\n')
    assert load_config(path)["sr"] == "mad"


def test_require():
    cfg = {"a": 1}
    assert require(cfg, "a") == 1
    assert require(cfg, "a", int) == 1
    with pytest.raises(ConfigError):
        require(cfg, "missing")
    with pytest.raises(ConfigError):
        require(cfg, "a", str)
