from __future__ import annotations

import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import corpus_factory  # noqa: E402

from dp_scout.config import load_config  # noqa: E402

CASSETTE = HERE / "data" / "cassette.jsonl"


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """The synthetic corpus, built once per session. Treat it as read-only."""
    dest = tmp_path_factory.mktemp("corpus")
    corpus_factory.build(dest)
    return dest


@pytest.fixture(scope="session")
def fixture_corpus(corpus_dir):
    from dp_scout import pipeline

    return pipeline.load_corpus(load_config(corpus_dir / "config.json"))


@pytest.fixture
def config(corpus_dir, tmp_path):
    """Fixture config writing into a per-test output directory."""
    return load_config(corpus_dir / "config.json").with_overrides(out=tmp_path / "out", cassette=CASSETTE)
