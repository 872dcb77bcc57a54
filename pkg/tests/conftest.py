from importlib import resources

import pytest

from taxolink.corpus import load_annotations
from taxolink.matcher import build_label_index
from taxolink.taxonomy import load_taxonomy

DATA = resources.files("taxolink") / "data"
KB_PATH = str(DATA / "fixture_kb.jsonl")
TRAIN_PATH = str(DATA / "fixture_train.jsonl")
TEST_PATH = str(DATA / "fixture_test.jsonl")


@pytest.fixture(scope="session")
def kb():
    return load_taxonomy(KB_PATH)


@pytest.fixture(scope="session")
def index(kb):
    return build_label_index(kb)


@pytest.fixture(scope="session")
def train():
    return load_annotations(TRAIN_PATH)


@pytest.fixture(scope="session")
def test_docs():
    return load_annotations(TEST_PATH)


def write_jsonl(path, rows):
    import json

    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
