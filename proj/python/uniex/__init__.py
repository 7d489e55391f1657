"""Unified information extraction: schema prompts, triaffine scoring, span decoding."""

import json

import numpy as np

from . import _core

__version__ = _core.version()

__all__ = [
    "Model",
    "convert_column",
    "convert_tuples",
    "decode",
    "evaluate",
    "fixture",
    "gradcheck",
    "target",
]


def _dump(docs):
    return json.dumps(list(docs))


def fixture(kind, size=8, seed=1):
    """Synthetic dataset of the given kind; returns (schema, documents)."""
    schema, docs = _core.fixture(kind, size, seed)
    return json.loads(schema), json.loads(docs)


def convert_column(text, task="Entity Extraction"):
    """BIO column text to documents; returns (documents, dangling I- tags)."""
    docs, dangling = _core.convert_column(text, task)
    return json.loads(docs), dangling


def convert_tuples(text):
    return json.loads(_core.convert_tuples(text))


def decode(scores, schema, tokens, threshold=0.5):
    """Decode a (labels, tokens, tokens) score tensor into a document."""
    return json.loads(_core.decode(np.asarray(scores, dtype=np.float64), json.dumps(schema),
                                   list(tokens), threshold))


def target(doc, schema):
    """Gold tensor and validity mask for one document."""
    return _core.target(json.dumps(doc), json.dumps(schema))


def evaluate(task, pred, gold):
    return _core.evaluate(task, _dump(pred), _dump(gold))


def gradcheck(**kwargs):
    return _core.gradcheck(**kwargs)


class Model:
    def __init__(self, native):
        self._m = native

    @classmethod
    def create(cls, docs, schema, **config):
        return cls(_core.Model.create(_dump(docs), json.dumps(schema), **config))

    @classmethod
    def load(cls, path):
        return cls(_core.Model.load(str(path)))

    def save(self, path):
        self._m.save(str(path))

    def train(self, docs, **config):
        """Returns (epoch, mean loss, f1) per epoch."""
        return self._m.train(_dump(docs), **config)

    def scores(self, tokens):
        return self._m.scores(list(tokens))

    def predict(self, tokens):
        return json.loads(self._m.predict(list(tokens)))

    @property
    def schema(self):
        return json.loads(self._m.schema())

    @property
    def threshold(self):
        return self._m.threshold
