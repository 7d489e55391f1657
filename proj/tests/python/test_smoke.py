import pathlib

import numpy as np
import pytest

import uniex

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"


def test_version():
    assert uniex.__version__


def test_fixture_kinds():
    for kind in ("entity", "relation", "event", "sentiment"):
        schema, docs = uniex.fixture(kind, 4, 1)
        assert len(docs) == 4
        assert schema["labels"]


def test_target_decode_round_trip():
    schema, docs = uniex.fixture("relation", 6, 2)
    for doc in docs:
        values, valid = uniex.target(doc, schema)
        assert values.shape == valid.shape
        assert values.shape[1] == len(doc["tokens"])
        assert np.all(values <= valid)
        back = uniex.decode(values, schema, doc["tokens"])
        for key in ("entities", "relations"):
            assert sorted(map(repr, back[key])) == sorted(map(repr, doc[key]))


def test_decode_shape_error():
    schema, docs = uniex.fixture("entity", 1, 1)
    with pytest.raises(ValueError):
        uniex.decode(np.zeros((2, 3, 4)), schema, ["a", "b", "c"])


def test_convert_column():
    docs, dangling = uniex.convert_column("EU B-ORG\nrejects O\nGerman B-MISC\n\n")
    assert dangling == 0
    assert docs[0]["tokens"] == ["EU", "rejects", "German"]
    assert [e["type"] for e in docs[0]["entities"]] == ["Organization", "Miscellaneous"]


def test_convert_tuples_matches_shipped():
    text = (DATA / "fixtures/appendix/conll03.tuple.jsonl").read_text()
    docs = uniex.convert_tuples(text)
    assert len(docs) == 1
    assert docs[0]["entities"]


def test_evaluate_perfect_and_empty():
    _, gold = uniex.fixture("relation", 5, 3)
    reports = uniex.evaluate("relation", gold, gold)
    assert all(r["f1"] == 1.0 for r in reports.values())
    empty = [dict(d, entities=[], relations=[]) for d in gold]
    assert uniex.evaluate("entity", empty, gold)["entity"]["f1"] == 0.0


def test_gradcheck():
    r = uniex.gradcheck(hidden=4, text_length=5)
    assert r["passed"]
    assert r["max_rel_error"] <= 1e-4


def test_model_scores_train_predict(tmp_path):
    schema, docs = uniex.fixture("entity", 4, 1)
    model = uniex.Model.create(docs, schema, hidden=16, heads=2, ffn_hidden=32)
    tokens = docs[0]["tokens"]
    s = model.scores(tokens)
    n_s = 1 + len(schema["labels"]) + len(schema["associations"])
    assert s.shape == (n_s, len(tokens), len(tokens))
    assert np.all((s > 0) & (s < 1))
    trace = model.train(docs, epochs=3)
    assert [t[0] for t in trace] == [1, 2, 3]
    pred = model.predict(tokens)
    assert pred["tokens"] == tokens
    model.save(tmp_path / "m")
    again = uniex.Model.load(tmp_path / "m")
    np.testing.assert_array_equal(again.scores(tokens), model.scores(tokens))
    assert again.schema == model.schema
