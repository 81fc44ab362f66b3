import csv
import hashlib
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwalk.cli import main
from qwalk.config import SCHEMAS, build_config, parse_grid, read_pairs, serialize_config
from qwalk.errors import ConfigError

SMALL_SIM = ["--set", "walkers=40", "--set", "steps=300", "--set", "theta=1/4", "--set", "p=0.1"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([args[0], "--out-dir", str(out), *args[1:]])
    return code, out


def test_grid_syntax():
    assert parse_grid("1/4") == [0.25]
    assert parse_grid(" 0.1, 1/6 ,0") == [0.1, 1 / 6, 0.0]
    assert parse_grid("-1/2:1/2:5") == [-0.5, -0.25, 0.0, 0.25, 0.5]
    for bad in ("", "1:2", "a", "0:1:0"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_unknown_and_malformed_keys_rejected(tmp_path):
    with pytest.raises(ConfigError):
        build_config("purity", {"bogus": "1"}, environ={})
    with pytest.raises(ConfigError):
        build_config("purity", {"t_final": "2.5"}, environ={})
    with pytest.raises(ConfigError):
        build_config("purity", {"svg": "maybe"}, environ={})
    with pytest.raises(ConfigError):
        build_config("nope", {}, environ={})
    bad = tmp_path / "bad.cfg"
    bad.write_text("theta 0.25\n")
    with pytest.raises(ConfigError):
        read_pairs(bad)


def test_precedence_defaults_file_env_flags(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment line\nseed = 5  # trailing comment\nt_final = 30\n")
    pairs = read_pairs(cfg_file)
    assert build_config("purity", pairs, environ={})["seed"] == 5
    assert build_config("purity", pairs, environ={"QWALK_SEED": "7"})["seed"] == 7
    cfg = build_config("purity", pairs, {"seed": "9"}, environ={"QWALK_SEED": "7"})
    assert cfg["seed"] == 9 and cfg["t_final"] == 30
    assert build_config("purity", {}, environ={})["t_final"] == 500


@pytest.mark.parametrize("command", sorted(SCHEMAS))
def test_defaults_round_trip(command):
    cfg = build_config(command, environ={})
    assert build_config(command, serialize_config(cfg), environ={}) == cfg


@settings(max_examples=50)
@given(
    st.lists(st.floats(-0.5, 0.5), min_size=1, max_size=6),
    st.lists(st.floats(0, 1), min_size=1, max_size=4),
    st.integers(0, 2**64 - 1),
)
def test_round_trip_preserves_every_value(thetas, ps, seed):
    overrides = {"theta": ",".join(repr(v) for v in thetas), "p": ",".join(repr(v) for v in ps), "seed": str(seed)}
    cfg = build_config("sim-sweep", overrides=overrides, environ={})
    again = build_config("sim-sweep", serialize_config(cfg), environ={})
    assert again == cfg
    assert again["theta"] == thetas and again["p"] == ps


def test_analytic_sweep_examples(tmp_path):
    code, out = run(tmp_path, "a", "analytic-sweep", "--set", "theta=1/4, 0", "--set", "p=0.5, 0.1, 0")
    assert code == 0
    table = rows(out / "analytic_sweep.csv")
    assert list(table[0]) == ["theta", "p", "dq_closed", "gbar33", "max_eig"]
    got = {(round(float(r["theta"]), 6), float(r["p"])): float(r["dq_closed"]) for r in table}
    assert got[(round(math.pi / 4, 6), 0.5)] == 1.0
    assert got[(0.0, 0.1)] == pytest.approx(9.0, rel=1e-14)
    assert got[(round(math.pi / 4, 6), 0.1)] == pytest.approx(4.5556, abs=1e-4)
    assert got[(0.0, 0.0)] == math.inf
    # grid order: theta outer, p inner
    assert [float(r["p"]) for r in table] == [0.5, 0.1, 0.0] * 2


def test_floats_are_round_trippable(tmp_path):
    code, out = run(tmp_path, "a", "analytic-sweep", "--set", "theta=1/7", "--set", "p=0.3")
    assert code == 0
    row = rows(out / "analytic_sweep.csv")[0]
    assert float(row["theta"]) == math.pi / 7
    from qwalk.channel import spreading_rate_closed

    assert float(row["dq_closed"]) == spreading_rate_closed(math.pi / 7, 0.3).dq


def test_sim_sweep_rows_and_coherent_flag(tmp_path):
    code, out = run(tmp_path, "s", "sim-sweep", *SMALL_SIM, "--set", "p=0.1, 0.5")
    assert code == 0
    table = rows(out / "sim_sweep.csv")
    assert list(table[0]) == ["theta", "p", "noise", "dq_sim", "dq_stderr", "dq_closed_or_nan", "walkers", "steps", "seed"]
    assert table[0]["noise"] == "bitflip" and table[0]["walkers"] == "40"
    assert float(table[0]["dq_closed_or_nan"]) == pytest.approx(4.5556, abs=1e-4)
    assert table[0]["seed"] != table[1]["seed"]
    assert abs(float(table[1]["dq_sim"]) - 1.0) < 0.5

    code, out = run(tmp_path, "c", "sim-sweep", *SMALL_SIM, "--set", "noise=coherent")
    assert code == 0
    assert math.isnan(float(rows(out / "sim_sweep.csv")[0]["dq_sim"]))

    code, out = run(tmp_path, "b", "sim-sweep", *SMALL_SIM, "--set", "noise=broken_links")
    row = rows(out / "sim_sweep.csv")[0]
    assert math.isnan(float(row["dq_closed_or_nan"])) and math.isfinite(float(row["dq_sim"]))


def test_short_window_flagged_not_fatal(tmp_path):
    code, out = run(tmp_path, "w", "sim-sweep", *SMALL_SIM, "--set", "p=0.01")
    assert code == 0
    assert math.isnan(float(rows(out / "sim_sweep.csv")[0]["dq_sim"]))


def test_csv_bytes_deterministic_and_worker_independent(tmp_path):
    _, one = run(tmp_path, "one", "sim-sweep", *SMALL_SIM, "--set", "walkers=70")
    _, two = run(tmp_path, "two", "sim-sweep", *SMALL_SIM, "--set", "walkers=70", "--workers", "2")
    assert (one / "sim_sweep.csv").read_bytes() == (two / "sim_sweep.csv").read_bytes()
    _, other = run(tmp_path, "other", "sim-sweep", *SMALL_SIM, "--set", "walkers=70", "--seed", "1")
    assert (one / "sim_sweep.csv").read_bytes() != (other / "sim_sweep.csv").read_bytes()


def test_seed_env_and_flag(tmp_path, monkeypatch):
    monkeypatch.setenv("QWALK_SEED", "314")
    _, out = run(tmp_path, "env", "sim-sweep", *SMALL_SIM)
    assert "master_seed = 314" in (out / "manifest_sim_sweep.txt").read_text()
    _, out = run(tmp_path, "flag", "sim-sweep", *SMALL_SIM, "--seed", "2")
    assert "master_seed = 2" in (out / "manifest_sim_sweep.txt").read_text()


def test_manifest_round_trip_reproduces_outputs(tmp_path):
    code, out = run(tmp_path, "first", "sim-sweep", *SMALL_SIM)
    assert code == 0
    manifest = out / "manifest_sim_sweep.txt"
    text = manifest.read_text()
    for key in ("command = sim-sweep", "code_version = ", "master_seed = ", "wall_clock_seconds = ", "[checksums]"):
        assert key in text
    # every effective parameter is echoed, defaults included
    for key in SCHEMAS["sim-sweep"]:
        assert f"config.{key} = " in text
    digest = hashlib.sha256((out / "sim_sweep.csv").read_bytes()).hexdigest()
    assert f"sim_sweep.csv = sha256:{digest}" in text

    rerun = tmp_path / "second"
    assert main(["sim-sweep", "--config", str(manifest), "--out-dir", str(rerun)]) == 0
    assert (rerun / "sim_sweep.csv").read_bytes() == (out / "sim_sweep.csv").read_bytes()


def test_purity_exact_and_svg(tmp_path):
    code, out = run(tmp_path, "p", "purity", "--set", "t_final=40", "--set", "p=0")
    assert code == 0
    table = rows(out / "purity.csv")
    assert list(table[0]) == ["t", "purity", "method"]
    assert [int(r["t"]) for r in table] == list(range(41))
    assert np.allclose([float(r["purity"]) for r in table], 1.0, atol=1e-12)
    root = ET.parse(out / "purity.svg").getroot()
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2


def test_purity_complementary_rates_identical(tmp_path):
    _, a = run(tmp_path, "a", "purity", "--set", "t_final=120", "--set", "p=0.3", "--set", "svg=false")
    _, b = run(tmp_path, "b", "purity", "--set", "t_final=120", "--set", "p=0.7", "--set", "svg=false")
    pa = np.array([float(r["purity"]) for r in rows(a / "purity.csv")])
    pb = np.array([float(r["purity"]) for r in rows(b / "purity.csv")])
    assert np.max(np.abs(pa - pb)) < 1e-10
    assert not (a / "purity.svg").exists()


def test_purity_monte_carlo(tmp_path):
    code, out = run(tmp_path, "mc", "purity", "--set", "method=mc", "--set", "t_final=50",
                    "--set", "walkers=100", "--set", "noise=broken_links")
    assert code == 0
    table = rows(out / "purity.csv")
    assert {r["method"] for r in table} == {"mc"}
    assert int(table[-1]["t"]) == 50


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "x", "purity", "--set", "bogus=1")[0] == 2
    assert run(tmp_path, "x", "purity", "--set", "noequals")[0] == 2
    assert run(tmp_path, "x", "purity", "--workers", "0")[0] == 2
    assert run(tmp_path, "x", "purity", "--set", "method=exact", "--set", "noise=broken_links")[0] == 2
    assert run(tmp_path, "x", "purity", "--set", "t_final=3000")[0] == 4
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["purity", "--out-dir", str(blocker / "sub")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["unknown-command"])
    assert exc.value.code == 2


def test_compare_tight_tolerance_fails(tmp_path):
    code, out = run(tmp_path, "t", "compare", *SMALL_SIM, "--set", "tolerance=1e-6")
    assert code == 3
    assert (out / "compare.csv").exists() and (out / "manifest_compare.txt").exists()


def test_compare_near_half_pi_without_exclusion_fails(tmp_path):
    args = ["--set", "theta=1/2, 0.48", "--set", "walkers=100", "--set", "p=0.01, 0.02"]
    code, out = run(tmp_path, "n", "compare", *args, "--set", "exclude_singular=false")
    assert code == 3
    devs = [float(r["rel_dev"]) for r in rows(out / "compare.csv")]
    assert max(devs) > 0.5
    # with the exclusion in place those angles are skipped
    code, out = run(tmp_path, "e", "compare", *args)
    assert code == 0
    assert {r["excluded"] for r in rows(out / "compare.csv")} == {"1"}


@pytest.mark.slow
def test_compare_default_grid_passes(tmp_path):
    code, out = run(tmp_path, "d", "compare")
    assert code == 0
    table = rows(out / "compare.csv")
    assert len(table) == 18
    assert max(float(r["rel_dev"]) for r in table) < 0.10
