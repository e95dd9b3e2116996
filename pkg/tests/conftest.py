from __future__ import annotations

import numpy as np
import pytest

from wordmirror.embeddings import EmbeddingTable
from wordmirror.reflection import AttributeVector


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def toy_table():
    return EmbeddingTable(("a", "b", "c"), np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def attr(dim, seed=0, trainable=True):
    return AttributeVector.draw("test", dim, seed, trainable)


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
