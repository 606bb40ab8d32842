import math
import os

import pytest

import cctml


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    sizes = cctml.generate(str(out), seed=5, households=200)
    return out, sizes


def test_metrics():
    mae, rmse = cctml.mae_rmse([3.0, -4.0])
    assert mae == pytest.approx(3.5)
    assert rmse == pytest.approx(math.sqrt(12.5))
    assert cctml.accuracy(tp=0, fp=50, fn=50, tn=0) == 0.0
    assert cctml.accuracy(tp=40, fp=10, fn=10, tn=40) == pytest.approx(80.0)
    with pytest.raises(ValueError):
        cctml.mae_rmse([])


def test_generate_and_load(corpus):
    out, sizes = corpus
    assert sizes["train"] > 0 and sizes["test"] > 0
    for name in ("train.csv", "test.csv", "initial_states.csv", "children.schema"):
        assert (out / name).exists()
    train = cctml.load(str(out / "train.csv"))
    assert "attend" in train.columns
    assert len(train.column("attend")) == train.rows
    with pytest.raises(OSError):
        cctml.load(str(out / "missing.csv"))


def test_fit_predict_round_trip(corpus, tmp_path):
    out, _ = corpus
    train = cctml.load(str(out / "train.csv"))
    test = cctml.load(str(out / "test.csv"))
    model = cctml.fit(train, "cart", "attend", max_depth=4, min_node=10)
    assert model.task == "classification"
    pred = model.predict(test)
    assert len(pred) == test.rows
    assert set(v for v in pred) <= {0.0, 1.0}
    path = tmp_path / "cart.model"
    model.save(str(path))
    again = cctml.load_model(str(path))
    assert again.predict(test) == pred
    with pytest.raises(ValueError):
        cctml.fit(train, "nonsense", "attend")


def test_train_is_deterministic(corpus):
    out, _ = corpus
    hh = cctml.load(str(out / "households_train.csv"))
    a, best_a = cctml.train(hh, "lasso", "income", seed=3, folds=3)
    b, best_b = cctml.train(hh, "lasso", "income", seed=3, folds=3)
    assert best_a == best_b
    assert a.task == "regression"
    assert a.score(hh) == b.score(hh)


def test_simulate(corpus, tmp_path):
    out, _ = corpus
    train = cctml.load(str(out / "train.csv"))
    initial = cctml.load(str(out / "initial_states.csv"))
    model = cctml.fit(train, "cart", "attend", max_depth=4)
    model.save(str(tmp_path / "attend.model"))
    bindings = {
        "income": "const:6000",
        "pregnancy": "const:0.1",
        "attendance": "attend.model",
        "failure": "const:0.1",
    }
    panels = cctml.simulate(bindings, initial, train, base=str(tmp_path), seed=1)
    assert [p["panel"] for p in panels] == ["control 1997", "control 1998", "treatment 1997"]
    for p in panels:
        assert p["skipped"] == 0
        assert p["attendance"]["mae"] <= p["attendance"]["rmse"] + 1e-12
    again = cctml.simulate(bindings, initial, train, base=str(tmp_path), seed=1)
    assert again == panels
    del bindings["pregnancy"]
    with pytest.raises(RuntimeError):
        cctml.simulate(bindings, initial, train, base=str(tmp_path))


def test_repro_small(corpus, tmp_path):
    out, _ = corpus
    summary = cctml.repro(str(tmp_path / "study"), seed=2, data=str(out), learners=["cart", "logit"], folds=3)
    assert summary["skipped"] == 0
    for path in summary["outputs"]:
        assert os.path.exists(path)
    assert (tmp_path / "study" / "tables" / "one_step_attendance.md").exists()


def test_cli_exit_codes(tmp_path):
    code, _, err = cctml.cli(["train", "--data", str(tmp_path / "nope.csv")])
    assert code == 2
    assert err
