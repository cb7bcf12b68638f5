"""Qualitative smoke checks that need a real pretrained masked LM.

Point ENCODER_SMOKE_MODEL at a base-size masked-LM checkpoint directory (or
hub id when the hub is reachable) to enable these; they are skipped otherwise
because random weights carry no linguistic signal and this sandbox cannot
download pretrained ones.
"""

import os
import random

import numpy as np
import pytest

from conftest import serve_app
from phrasemine.backends import CachingBackend, RemoteBackend
from phrasemine.corpus import sentence_from_tokens
from phrasemine.filtering import default_filter_config
from phrasemine.mining import build_impact_matrix, mine_phrases
from phrasemine_services.encoder_server import ModelRuntime, create_app

MODEL_ENV = "ENCODER_SMOKE_MODEL"

pytestmark = pytest.mark.skipif(
    not os.environ.get(MODEL_ENV),
    reason=f"set {MODEL_ENV} to a pretrained masked-LM checkpoint to run live smoke tests",
)


@pytest.fixture(scope="module")
def live_client():
    runtime = ModelRuntime(os.environ[MODEL_ENV], max_batch=16)
    handle = serve_app(create_app(runtime))
    client = CachingBackend(RemoteBackend(handle.url, timeout=120.0, batch_size=32))
    yield client
    handle.stop()


WORDS = "sensor selection for energy-efficient ambulatory medical monitoring .".split()
TAGS = ["NN", "NN", "IN", "JJ", "JJ", "JJ", "NN", "."]


def test_monitoring_stripe(live_client):
    """The last content word should press on its preceding words far more
    than the sentence-initial word presses on everything else: the vertical
    stripe above the diagonal in its column."""
    sent = sentence_from_tokens("stripe", WORDS, TAGS)
    matrix = build_impact_matrix(sent, live_client).values
    monitoring = WORDS.index("monitoring")
    stripe = np.mean([matrix[monitoring - 2, monitoring], matrix[monitoring - 1, monitoring]])
    initial_row = np.mean([matrix[i, 0] for i in range(1, len(WORDS))])
    assert stripe > initial_row


NOUN_BIGRAMS = [
    ("neural", "network"), ("stock", "market"), ("machine", "learning"),
    ("climate", "change"), ("health", "care"), ("energy", "policy"),
    ("data", "analysis"), ("speech", "recognition"), ("interest", "rate"),
    ("image", "segmentation"),
]
FILLERS = [("uses", "VBZ"), ("with", "IN"), ("improves", "VBZ"), ("during", "IN")]


def test_annotate_coverage_on_sample(live_client):
    """End to end on 200 plausible sentences: at least half must yield a
    multi-word phrase."""
    rng = random.Random(1)
    config = default_filter_config()
    hits = 0
    for k in range(200):
        (a1, a2), (b1, b2) = rng.sample(NOUN_BIGRAMS, 2)
        filler, filler_tag = rng.choice(FILLERS)
        words = ["the", a1, a2, filler, "the", b1, b2, "."]
        tags = ["DT", "NN", "NN", filler_tag, "DT", "NN", "NN", "."]
        sent = sentence_from_tokens(f"sample{k}", words, tags)
        ps = mine_phrases(sent, live_client, config, q=40)
        if any(span.end - span.start >= 2 for span in ps.spans):
            hits += 1
    assert hits >= 100, f"only {hits}/200 sentences produced a multi-word phrase"
