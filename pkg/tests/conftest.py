import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phrasemine.corpus import Sentence, sentence_from_tokens
from phrasemine.filtering import FilterConfig, load_stopwords

FIG_WORDS = "sensor selection for energy-efficient ambulatory medical monitoring .".split()
FIG_TAGS = ["NN", "NN", "IN", "JJ", "JJ", "JJ", "NN", "."]
# Chunking of the worked example: the heatmap-derived segmentation keeps
# "sensor selection", "for energy-efficient", "ambulatory medical monitoring",
# and the final period as four candidates.
FIG_CHUNKS = [(0, 2), (2, 4), (4, 7), (7, 8)]


@pytest.fixture(scope="session")
def fig_sentence() -> Sentence:
    return sentence_from_tokens("fig", FIG_WORDS, FIG_TAGS)


@pytest.fixture(scope="session")
def stopwords() -> frozenset[str]:
    return load_stopwords()


@pytest.fixture(scope="session")
def filter_config(stopwords) -> FilterConfig:
    return FilterConfig(stopwords=stopwords)


def write_jsonl(path: Path, objs) -> Path:
    with open(path, "w", encoding="utf-8") as fp:
        for obj in objs:
            fp.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


def corpus_record(doc_id: str, sentences, gold_keyphrases=None) -> dict:
    """Build a corpus JSONL record from (sid, words, tags) triples."""
    out = {"id": doc_id, "sentences": []}
    for sid, words, tags in sentences:
        sent = sentence_from_tokens(sid, words, tags)
        out["sentences"].append(
            {
                "id": sid,
                "text": sent.text,
                "tokens": [
                    {
                        "text": tok.text,
                        **({"pos": tok.pos} if tok.pos is not None else {}),
                        "start": tok.char_start,
                        "end": tok.char_end,
                    }
                    for tok in sent.tokens
                ],
            }
        )
    if gold_keyphrases is not None:
        out["gold_keyphrases"] = list(gold_keyphrases)
    return out


FIG_CORPUS_SENTENCES = [("s1", FIG_WORDS, FIG_TAGS)]
