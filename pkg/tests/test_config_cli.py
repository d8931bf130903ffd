import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from superlab import cli
from superlab.config import PRESETS, ConfigError, defaults_text, parse_config, serialize

BASIC = """
[geometry]
family = chain
n = 2, 3
a = 0.1:0.3:3

[solver]
backend = meanfield
"""


def test_parse_basic():
    cfg = parse_config(BASIC)
    assert cfg.n == [2, 3]
    assert cfg.a == pytest.approx([0.1, 0.2, 0.3])
    assert cfg.theta == [pytest.approx(math.pi / 2)]
    assert cfg.t0 is None and cfg.delta == 0.0


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 4: unknown key 'spacing'"):
        parse_config("[geometry]\nfamily = chain\nn = 2\nspacing = 0.1\n[solver]\nbackend = exact\n")


def test_unknown_section_and_missing_key():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(BASIC + "\n[extra]\nx = 1\n")
    with pytest.raises(ConfigError, match="missing required key 'backend'"):
        parse_config("[geometry]\nfamily = chain\nn = 2\n")


def test_exact_size_cap_is_a_config_error():
    with pytest.raises(ConfigError, match="line 4: exact backend supports N <= 10"):
        parse_config("[geometry]\nfamily = chain\n\nn = 12\n[solver]\nbackend = exact\n")


def test_bad_value_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("[geometry]\nfamily = chain\nn = two\n[solver]\nbackend = exact\n")


def test_overrides_win():
    cfg = parse_config(BASIC, {"drive.omega": "3.5", "geometry.n": "4"})
    assert cfg.omega == [3.5] and cfg.n == [4]
    with pytest.raises(ConfigError):
        parse_config(BASIC, {"drive.power": "1"})


_lists = st.lists(st.floats(0.01, 10.0, allow_nan=False), min_size=1, max_size=4)


@settings(max_examples=50)
@given(st.sampled_from(["chain", "ring", "square"]), st.lists(st.integers(2, 3), min_size=1, max_size=3),
       _lists, _lists, st.one_of(st.just("resonant"), st.floats(-5, 5)), st.one_of(st.none(), _lists),
       st.sampled_from(["exact", "meanfield", "cumulant"]))
def test_serialize_round_trip(family, n, a, omega, delta, t0, backend):
    over = {"geometry.family": family, "geometry.n": ", ".join(map(str, n)), "solver.backend": backend,
            "geometry.a": ", ".join(map(repr, a)), "drive.omega": ", ".join(map(repr, omega)),
            "drive.delta": str(delta), "sweep.t0": "steady" if t0 is None else ", ".join(map(repr, t0))}
    cfg = parse_config("", over)
    text = serialize(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize(again) == text


def test_presets_parse():
    for name, preset in PRESETS.items():
        parse_config("", preset=preset)
    assert "preset for 'threshold'" in defaults_text()


def test_two_atom_cli(capsys):
    assert cli.main(["two-atom", "--a", "0.2", "--omega", "40", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    for k in ("p_G", "p_B", "p_D", "p_E"):
        assert out[k] == pytest.approx(0.25, abs=1e-2)
    assert out["gamma_tot"] == pytest.approx(1.0, rel=2e-2)


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.ini")]) == cli.EXIT_IO
    bad = tmp_path / "bad.ini"
    bad.write_text("[geometry]\nfamily = chain\nn = 12\n[solver]\nbackend = exact\n")
    assert cli.main(["validate", str(bad)]) == cli.EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and "N <= 10" in err["message"]


def test_run_and_resume(tmp_path, capsys):
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text(BASIC + f"\n[drive]\nomega = 1.0, 2.0\n[output]\ndirectory = {tmp_path}\nprefix = r\n")
    assert cli.main(["run", str(cfgfile)]) == 0
    first = (tmp_path / "r.csv").read_text()
    assert len(first.splitlines()) == 1 + 2 * 3 * 2
    assert cli.main(["run", str(cfgfile), "--resume"]) == 0
    assert (tmp_path / "r.csv").read_text() == first
    manifest = json.loads((tmp_path / "r.manifest.json").read_text())
    assert manifest["skipped_points"] == 12
    assert "wrote" in capsys.readouterr().out


def test_threads_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("SUPERLAB_THREADS", "0")
    cfgfile = tmp_path / "c.ini"
    cfgfile.write_text(BASIC + f"\n[output]\ndirectory = {tmp_path}\n")
    assert cli.main(["run", str(cfgfile)]) == cli.EXIT_CONFIG


def test_spectrum_cli(tmp_path, capsys):
    assert cli.main(["spectrum", "--a", "0.1, 0.5", "--output", str(tmp_path)]) == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "N,a,omega,gap,tau_ss" and len(lines) == 3
