import numpy as np
import pytest

from degroot_resist import (
    GeneratorSpec,
    InfluenceMatrix,
    OpinionState,
    ResistanceProfile,
    estimate_static,
    estimate_time_varying,
    gen_network,
    simulate,
)
from degroot_resist import io
from degroot_resist.estimator import Status


def test_network_round_trip(tmp_path, c3):
    p = tmp_path / "c.txt"
    io.write_network(c3, p)
    assert p.read_text().splitlines()[0] == "3"
    assert np.array_equal(io.read_network(p).entries, c3.entries)


def test_generated_network_bit_exact(tmp_path):
    c = gen_network(GeneratorSpec("random-sparse", 50, seed=3, density=0.1))
    p = tmp_path / "c.txt"
    io.write_network(c, p)
    assert np.array_equal(io.read_network(p).entries, c.entries)


@pytest.mark.parametrize(
    "body, match",
    [
        ("2\n0 0 0.3\n0 1 0.7\n1 0 1\n", r"cell \(0, 0\)"),
        ("2\n0 1 0.5\n1 0 1\n", "row 0"),
        ("2\n0 1\n", r":2: expected"),
        ("2\n0 1 x\n1 0 1\n", "cannot parse"),
        ("2\n0 5 1\n1 0 1\n", "out of range"),
        ("2\n0 1 1\n0 1 1\n1 0 1\n", "duplicate"),
        ("two\n", "node count"),
        ("", "empty"),
    ],
)
def test_network_rejects(tmp_path, body, match):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(io.FormatError, match=match):
        io.read_network(p)


def test_network_comments_and_renormalization(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("# ring\n2\n\n0 1 1.0000000005\n1 0 1\n")
    with pytest.warns(UserWarning):
        c = io.read_network(p)
    assert c.entries[0, 1] == 1.0


def test_trajectory_round_trip(tmp_path, c3, d3):
    x = OpinionState(np.random.default_rng(0).normal(size=(3, 2)))
    tr = simulate(c3, d3, x, steps=5)
    p = tmp_path / "tr.csv"
    io.write_trajectory(tr, p)
    assert p.read_text().splitlines()[0] == "t,node,column,value"
    assert np.array_equal(io.read_trajectory(p).states, tr.states)


def test_trajectory_order_free_and_missing(tmp_path):
    p = tmp_path / "tr.csv"
    p.write_text("t,node,column,value\n1,0,0,0.5\n0,1,0,1\n0,0,0,0\n1,1,0,0.5\n")
    np.testing.assert_array_equal(io.read_trajectory(p).states[:, :, 0], [[0, 1], [0.5, 0.5]])
    p.write_text("t,node,column,value\n0,0,0,0\n0,1,0,1\n1,1,0,0.5\n")
    with pytest.raises(io.FormatError, match=r"missing .* \(1, 0, 0\)"):
        io.read_trajectory(p)
    p.write_text("t,node,column,value\n0,0,0,0\n0,0,0,1\n")
    with pytest.raises(io.FormatError, match="duplicate"):
        io.read_trajectory(p)
    p.write_text("time,node,column,value\n")
    with pytest.raises(io.FormatError, match="header"):
        io.read_trajectory(p)


def test_resistance_and_opinions_round_trip(tmp_path, d3, x3):
    io.write_resistance(d3, tmp_path / "d.csv")
    assert np.array_equal(io.read_resistance(tmp_path / "d.csv").d, d3.d)
    io.write_opinions(x3, tmp_path / "x.csv")
    assert np.array_equal(io.read_opinions(tmp_path / "x.csv").values, x3.values)
    (tmp_path / "d.csv").write_text("node,value\n0,0.5\n1,1.0\n")
    with pytest.raises(io.FormatError):
        io.read_resistance(tmp_path / "d.csv")


def test_report_format(tmp_path, c3, d3, x3):
    tr = simulate(c3, d3, x3, steps=4)
    rep = estimate_static(c3, tr)
    p = tmp_path / "r.csv"
    io.write_report(rep, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "# schema_version=1 mode=static epsilon=1.0000000000000001e-09"
    assert lines[1] == "node,t,value,status,samples_used,residual_rms"
    assert lines[2].startswith("0,static,0.")
    back = io.read_report(p)
    assert back.statuses == rep.statuses
    np.testing.assert_array_equal(back.values, rep.values)


def test_report_empty_value_and_varying(tmp_path, c3, d3):
    tr = simulate(c3, d3, OpinionState(np.full(3, 2.0)), steps=2)
    p = tmp_path / "r.csv"
    io.write_report(estimate_static(c3, tr), p)
    assert p.read_text().splitlines()[2] == "0,static,,Degenerate,0,0"
    tr = simulate(c3, d3, OpinionState([0, 1, 2]), steps=2)
    io.write_report(estimate_time_varying(c3, tr), p)
    rows = p.read_text().splitlines()[2:]
    assert rows[0].startswith("0,0,") and rows[1].startswith("0,1,")
    assert io.read_report(p).mode == "varying"


def test_config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('operation = "simulate"\nseed = 9\nsteps = 12\nsweep_sigmas = [0.1, 0.2]\n')
    cfg = io.read_config(p)
    assert (cfg.operation, cfg.seed, cfg.steps, cfg.sweep_sigmas) == ("simulate", 9, 12, (0.1, 0.2))
    assert cfg.epsilon == 1e-9


def test_config_unknown_key_location(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("seed = 1\n\nnoise_level = 3\n")
    with pytest.raises(io.ConfigError, match=r"run.toml:3: unknown key 'noise_level'"):
        io.read_config(p)


@pytest.mark.parametrize(
    "body, match",
    [
        ('network = "c.txt"\nn = 10\n', "drop generator keys"),
        ('opinions = "x.csv"\ndistribution = "gaussian"\n', "drop generator keys"),
        ("epsilon = 0\n", "epsilon must be positive"),
        ("tol = -1.0\n", "tol must be positive"),
        ('mode = "both"\n', "mode"),
        ("steps = 2.5\n", "steps"),
        ("seed = 'abc'\n", "seed"),
        ("[section]\nx = 1\n", "unknown key 'section'"),
    ],
)
def test_config_rejects(tmp_path, body, match):
    p = tmp_path / "run.toml"
    p.write_text(body)
    with pytest.raises(io.ConfigError, match=match):
        io.read_config(p)


def test_config_reference_lists_every_key():
    ref = io.config_reference()
    for f in io.RunConfig.__dataclass_fields__:
        assert f"`{f}`" in ref
