"""Protocol conformance pack, driven by the primary package's remote client
against a live served model (a tiny random checkpoint; the contract does not
depend on weight quality)."""

import numpy as np
import pytest
import requests

from phrasemine.backends import EncodeRequest, RemoteBackend
from phrasemine.corpus import sentence_from_tokens
from phrasemine.errors import OversizeRequestError, ProtocolError
from phrasemine.filtering import default_filter_config
from phrasemine.mining import build_impact_matrix, mine_phrases


@pytest.fixture()
def client(encoder_server) -> RemoteBackend:
    return RemoteBackend(encoder_server.url, timeout=30.0, retries=1, batch_size=4)


class TestDescriptor:
    def test_sanity(self, client, tiny_mlm_dir):
        desc = client.describe()
        assert desc.dim > 0
        assert desc.max_pieces > 0
        assert desc.mask_piece == "[MASK]"
        assert desc.name == str(tiny_mlm_dir)


class TestTokenize:
    def test_known_words_non_empty(self, client):
        for word in ("monitoring", "sensor", "energy-efficient"):
            pieces = client.tokenize_word(word)
            assert len(pieces) >= 1

    def test_unknown_word_still_non_empty(self, client):
        assert len(client.tokenize_word("zzzunseenzzz")) >= 1

    def test_hyphen_splits_into_pieces(self, client):
        assert client.tokenize_word("energy-efficient") == ["energy", "-", "efficient"]


class TestEncode:
    def test_determinism_exact(self, client):
        req = EncodeRequest(("sensor", "selection", "monitoring"), masked={1}, want={0, 2})
        first = client.encode(req)
        second = client.encode(req)
        for idx in (0, 2):
            assert np.array_equal(first.vectors[idx], second.vectors[idx])

    def test_masking_changes_other_positions(self, client):
        plain = client.encode(EncodeRequest(("sensor", "selection"), want={0}))
        masked = client.encode(EncodeRequest(("sensor", "selection"), masked={1}, want={0}))
        assert not np.array_equal(plain.vectors[0], masked.vectors[0])

    def test_batch_unbatch_equivalence(self, client):
        reqs = [
            EncodeRequest(("sensor", "selection", "monitoring"), masked={i % 3}, want={(i + 1) % 3})
            for i in range(9)
        ]
        batched = client.encode_batch(reqs)
        for req, got in zip(reqs, batched):
            single = client.encode(req)
            for idx in req.want:
                np.testing.assert_allclose(got.vectors[idx], single.vectors[idx], atol=1e-5)

    def test_layer_selection(self, client):
        req_last = EncodeRequest(("sensor", "selection"), want={0})
        last = client.encode(req_last)
        shallow_client = RemoteBackend(client.url, timeout=30.0, layer=0)
        shallow = shallow_client.encode(req_last)
        assert not np.array_equal(last.vectors[0], shallow.vectors[0])

    def test_bad_layer_rejected(self, client):
        bad = RemoteBackend(client.url, timeout=30.0, layer=99)
        with pytest.raises(ProtocolError, match="400"):
            bad.encode(EncodeRequest(("sensor",), want={0}))

    def test_oversize_rejected_client_side(self, client):
        desc = client.describe()
        pieces = tuple("sensor" for _ in range(desc.max_pieces + 1))
        with pytest.raises(OversizeRequestError):
            client.encode(EncodeRequest(pieces, want={0}))


class TestRawProtocol:
    def test_malformed_body_is_400(self, encoder_server):
        resp = requests.post(f"{encoder_server.url}/encode", json={"nonsense": True}, timeout=10)
        assert resp.status_code == 400

    def test_oversize_is_413(self, encoder_server):
        desc = requests.post(f"{encoder_server.url}/descriptor", json={}, timeout=10).json()
        body = {
            "pieces": ["sensor"] * (desc["max_pieces"] + 1),
            "masked": [],
            "want": [0],
        }
        resp = requests.post(f"{encoder_server.url}/encode", json=body, timeout=10)
        assert resp.status_code == 413

    def test_vector_keys_are_string_indices(self, encoder_server):
        body = {"pieces": ["sensor", "selection"], "masked": [], "want": [1]}
        obj = requests.post(f"{encoder_server.url}/encode", json=body, timeout=10).json()
        assert set(obj["vectors"].keys()) == {"1"}
        assert len(obj["vectors"]["1"]) == obj["dim"]


class TestPipelineOverTheWire:
    def test_impact_matrix_and_mining(self, client):
        words = "sensor selection for ambulatory medical monitoring".split()
        tags = ["NN", "NN", "IN", "JJ", "JJ", "NN"]
        sent = sentence_from_tokens("wire1", words, tags)
        matrix = build_impact_matrix(sent, client)
        assert matrix.values.shape == (6, 6)
        assert np.all(matrix.values >= 0) and np.all(np.isfinite(matrix.values))
        ps = mine_phrases(sent, client, default_filter_config(), q=40)
        for span in ps.spans:
            assert span.end - span.start >= 2
