from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthcorpus import random_text_corpus, topic_corpus, write_tsv


@pytest.fixture(scope="session")
def random_corpus_path(tmp_path_factory) -> Path:
    """1,000 documents of Zipf random text."""
    docs = random_text_corpus(1000, vocab_size=2000, mean_len=40, seed=7)
    return write_tsv(tmp_path_factory.mktemp("corpora") / "random.tsv", docs)


@pytest.fixture(scope="session")
def topic_corpus_bundle(tmp_path_factory):
    """1,200-document planted-topic corpus plus its ground truth."""
    docs, topic_of, topic_terms = topic_corpus(seed=11)
    path = write_tsv(tmp_path_factory.mktemp("corpora") / "topics.tsv", docs)
    return path, topic_of, topic_terms


@pytest.fixture()
def toy_corpus_path(tmp_path) -> Path:
    docs = [
        ("d1", "the space shuttle program launched the orbiter"),
        ("d2", "cooking pasta with tomato sauce and fresh basil"),
        ("d3", "the space telescope observed a distant galaxy"),
    ]
    return write_tsv(tmp_path / "toy.tsv", docs)
