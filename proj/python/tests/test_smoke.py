import math
import os

import pytest

import ccfedavg as cc


def small(**kw):
    base = dict(rounds=6, n_samples=400, input_dim=5, n_classes=3,
                local_steps=2)
    base.update(kw)
    return cc.make_config(**base)


def test_config_round_trip():
    c = small(eta=0.1, methods=["cc_fedavg", "strategy1"])
    again = cc.Config.parse(c.serialize())
    assert again == c
    assert c.methods == ["cc_fedavg", "strategy1"]
    assert c.task == "synthetic-logistic"
    assert "rounds" in cc.Config.keys()


def test_config_errors_are_typed():
    with pytest.raises(cc.ConfigError):
        cc.make_config(gamma=2)
    with pytest.raises(cc.ConfigError):
        cc.Config.parse("bogus = 1\n")
    with pytest.raises(cc.IoError):
        cc.Config.load("/nonexistent.cfg")
    assert issubclass(cc.ConfigError, cc.Error)


def test_budgets():
    assert cc.assign_budgets(8, 4) == [1, 1, 0.5, 0.5, 0.25, 0.25, 0.125, 0.125]
    assert cc.two_group_budgets(4, 0.5, 4) == [1, 1, 0.25, 0.25]
    assert cc.canonical_method("fedopt_sync:4") == "fedopt_sync:4"


def test_run_experiment(tmp_path):
    out = tmp_path / "m.csv"
    c = small(methods=["fedavg_full", "cc_fedavg"], out=str(out))
    r = cc.run_experiment(c)
    assert not r["any_aborted"]
    assert [run["method"] for run in r["runs"]] == ["fedavg_full", "cc_fedavg"]
    rows = cc.read_metrics(str(out))
    assert len(rows) == 2 * c.rounds
    for run in r["runs"]:
        assert len(run["rows"]) == c.rounds
        assert 0.0 <= run["final_test_acc"] <= 1.0
        assert math.isfinite(run["final_test_loss"])


def test_beta_one_degenerates_to_fedavg(tmp_path):
    c = small(beta=1, methods=["fedavg_full", "cc_fedavg"],
              out=str(tmp_path / "m.csv"))
    runs = cc.run_experiment(c)["runs"]
    assert runs[0]["final_model"] == runs[1]["final_model"]


def test_federation_matches_run_experiment(tmp_path):
    c = small(out=str(tmp_path / "m.csv"), diagnostics=False)
    fed = cc.Federation(c, "cc_fedavg", seed=1)
    for t in range(c.rounds):
        o = fed.step()
        assert o["round"] == t
        assert o["next_model"] == fed.model
        assert sorted(o["selected"]) == sorted(o["trained"] + o["estimated"] +
                                               o["skipped_entirely"])
    runs = cc.run_experiment(c)["runs"]
    assert runs[1]["final_model"] == fed.model
    assert fed.local_steps == runs[1]["local_steps"]


def test_divergence_is_reported(tmp_path):
    c = small(task="quadratic", eta=50.0, out=str(tmp_path / "m.csv"))
    r = cc.run_experiment(c)
    assert r["any_aborted"]
    assert "divergence" in r["runs"][0]["abort_message"]
    assert os.path.exists(tmp_path / "m.aborts.csv")


def test_grid_and_efficiency():
    c = small(methods=["cc_fedavg"], schedule="round_robin", rounds=8)
    cells = cc.run_grid_rw(c, [0.0, 1.0], [1, 2])
    assert [(g["r"], g["W"]) for g in cells] == [(0, 1), (0, 2), (1, 1), (1, 2)]
    eff = cc.run_efficiency(c, 4)
    assert eff["fedavg"]["rounds"] == 2
    assert eff["cc_fedavg"]["local_steps"] == eff["fedavg"]["local_steps"]


def test_lemma2_probe():
    c = small(task="quadratic", methods=["cc_fedavg"])
    r = cc.probe_lemma2(c, warmup=2, n_resamples=100)
    assert r["n_resamples"] == 100
    assert r["lhs"] <= r["rhs"] + 3 * r["lhs_stderr"]
    with pytest.raises(cc.ConfigError):
        cc.probe_lemma2(small(), warmup=2, n_resamples=10)
