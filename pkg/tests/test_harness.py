import json

import numpy as np
import pytest

from succapprox import cli
from succapprox.generators import tie_pair
from succapprox.geometry import Box, Norm
from succapprox.harness import (
    SUITES,
    ConfigError,
    ExperimentResult,
    _regularized_is_regular,
    genericity_probe,
    parse_config,
    plot_svg,
    report_json,
    run_experiment,
    write_outputs,
)
from succapprox.iteration import IterationParams, iterate, read_trajectory_csv
from succapprox.maps import Affine, Constant
from succapprox.pairs import PairMap

SQ = Box.cube(2, 0, 1)
PAIR = {"first": {"variant": "affine", "A": [[0.5, 0.1], [0.0, 0.4]], "b": [0.1, 0.2]},
        "second": {"variant": "affine", "A": [[0.3, 0.0], [0.2, 0.3]], "b": [0.6, 0.5]}}


def config(**experiment):
    return {"domain": SQ.to_dict(), "norm": "L2", "pair": PAIR, "x0": [0.05, 0.9], "seed": 11,
            "experiment": experiment or {"type": "run"}}


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_run_constant_pair_writes_two_row_csv(tmp_path):
    doc = config()
    doc["pair"] = {"first": Constant([0.3, 0.3]).to_dict(), "second": Constant([0.3, 0.3]).to_dict()}
    out = tmp_path / "out"
    assert cli.main(["run", "--config", write(tmp_path, doc), "--out", str(out)]) == 0
    rows = read_trajectory_csv((out / "trajectory.csv").read_text())
    assert len(rows) == 2
    report = json.loads((out / "report.json").read_text())
    assert report["report"]["trajectory"]["converged"] is True
    assert (out / "plot.svg").read_text().startswith("<svg")


def test_reports_are_deterministic(tmp_path):
    path = write(tmp_path, config(type="stability", trials=3))
    docs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert cli.main(["run", "--config", path, "--out", str(out)]) == 0
        doc = json.loads((out / "report.json").read_text())
        assert "timestamp" in doc["metadata"]
        docs.append(json.dumps(doc["report"], sort_keys=True))
        assert (out / "trajectory.csv").read_bytes() == (tmp_path / "out0" / "trajectory.csv").read_bytes()
    assert docs[0] == docs[1]


def test_seed_flag_overrides_config(tmp_path):
    path = write(tmp_path, config(type="probe", samples=5))
    cli.main(["probe", "--config", path, "--out", str(tmp_path / "a"), "--seed", "99"])
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["report"]["probe"]["seed"] == 99


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(norm="L7"),
    lambda d: d.update(x0=[2.0, 0.5]),
    lambda d: d.update(pair=None),
    lambda d: d.update(experiment={"type": "dance"}),
    lambda d: d.update(experiment={"type": "regularize"}),
    lambda d: d.update(experiment={"type": "probe"}, seed=None),
    lambda d: d.update(experiment={"type": "verify", "suites": ["nope"]}),
    lambda d: d["pair"]["first"].update(variant="spline"),
    lambda d: d.update(domain={"type": "box", "lower": [0, 0], "upper": [0, 1]}),
    lambda d: d.update(x0=[0.5, 0.5, 0.5]),
])
def test_invalid_configs_exit_2(tmp_path, mutate, capsys):
    doc = json.loads(json.dumps(config()))
    mutate(doc)
    with pytest.raises(ConfigError):
        parse_config(doc)
    assert cli.main(["run", "--config", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_subcommand_must_match_experiment(tmp_path):
    assert cli.main(["probe", "--config", write(tmp_path, config()), "--out", str(tmp_path)]) == 2


def test_list_suites(capsys):
    assert cli.main(["--list-suites"]) == 0
    listed = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert listed == list(SUITES)
    assert cli.main(["verify", "--list-suites"]) == 0


def test_verify_banach_bound_on_100_pairs(tmp_path):
    path = write(tmp_path, config(type="verify", suites=["banach_bound"], instances=100))
    assert cli.main(["verify", "--config", path, "--out", str(tmp_path / "v")]) == 0
    doc = json.loads((tmp_path / "v" / "report.json").read_text())
    assert doc["report"]["suites"]["banach_bound"]["passed"] is True


def test_verify_all_suites_small(tmp_path):
    for norm in ("L1", "L2", "Linf"):
        doc = config(type="verify", instances=10)
        doc["norm"] = norm
        assert cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(tmp_path / norm)]) == 0


def test_verify_reports_violations_with_exit_1(tmp_path, monkeypatch, capsys):
    from succapprox import harness

    monkeypatch.setitem(harness.SUITES, "always_fails", ("test suite", lambda ctx: ["broken"]))
    path = write(tmp_path, config(type="verify", suites=["always_fails"]))
    assert cli.main(["verify", "--config", path, "--out", str(tmp_path / "v")]) == 1
    assert "always_fails: broken" in capsys.readouterr().err


def test_regularize_experiment(tmp_path, rng):
    F = tie_pair(SQ, Norm.L2, rng)
    doc = config(type="regularize", eps=0.05)
    doc["pair"] = F.to_dict()
    doc["x0"] = SQ.center.tolist()
    cfg = parse_config(doc)
    result = run_experiment(cfg)
    assert result.ok
    assert result.report["result"]["touched_indices"] == [0]
    assert result.report["H_total"]["upper"] < 0.05


def test_stability_experiment_records_every_trial():
    cfg = parse_config(config(type="stability", metric="h_inf", trials=4))
    result = run_experiment(cfg)
    assert result.ok
    trials = result.report["trials"]
    assert [t["index"] for t in trials] == list(range(8))
    assert all(t["sup_deviation"] <= t["eps"] for t in trials)


def test_stability_rejects_eps_above_eps0():
    cfg = parse_config(config(type="stability", eps_grid=[10.0]))
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_probe_examples():
    f = Affine(0.5 * np.eye(2), [0.0, 0.0])
    g = Affine(0.5 * np.eye(2), [0.5, 0.0])
    rep = genericity_probe(SQ, "L2", 1, 0, u=[0.9, 0.9], pairs=[PairMap(f, g)])
    assert rep.fraction_regular == 1.0 and rep.fraction_converged == 1.0
    a = genericity_probe(SQ, "L2", 20, 5)
    b = genericity_probe(SQ, "L2", 20, 5)
    assert a.to_dict() == b.to_dict()
    for v in (a.fraction_regular, a.fraction_converged, a.fraction_regular_after_regularization):
        assert 0.0 <= v <= 1.0


def test_probe_regularizes_tied_instances(rng):
    ties = [tie_pair(SQ, Norm.L2, rng) for _ in range(5)]
    rep = genericity_probe(SQ, "L2", 5, 0, pairs=ties)
    assert rep.fraction_regular == 0.0
    assert rep.fraction_regular_after_regularization == 1.0
    F = ties[0]
    t = iterate(F, SQ.center, IterationParams(), SQ)
    assert _regularized_is_regular(F, t, SQ, Norm.L2, 0.05)


def test_plot_failure_does_not_fail_the_run(tmp_path, monkeypatch):
    from succapprox import harness

    def boom(t):
        raise RuntimeError("no plot")

    monkeypatch.setattr(harness, "plot_svg", boom)
    result = run_experiment(parse_config(config()))
    written = write_outputs(result, tmp_path)
    assert [p.name for p in written] == ["report.json", "trajectory.csv"]


def test_plot_handles_zero_steps():
    F = PairMap(Constant([0.3, 0.3]), Constant([0.3, 0.3]))
    t = iterate(F, [0.3, 0.3], IterationParams(), SQ)
    assert "</svg>" in plot_svg(t)


def test_report_json_sorted_and_plain():
    result = ExperimentResult({"b": np.float64(1.5), "a": np.arange(3), "c": Norm.L1})
    assert report_json(result) == json.dumps({"a": [0, 1, 2], "b": 1.5, "c": "L1"}, sort_keys=True, indent=2)
