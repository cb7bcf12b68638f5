import numpy as np
import pytest

from phrasemine.backends import EncodeRequest, ReferenceBackend, RemoteBackend
from phrasemine.errors import (
    DimMismatchError,
    OversizeRequestError,
    ProtocolError,
    TransportError,
)
from stub_server import make_server

SEED, DIM = 5, 8


@pytest.fixture()
def stub():
    server, state, url = make_server(seed=SEED, dim=DIM)
    yield state, url
    server.shutdown()
    server.server_close()


@pytest.fixture()
def client(stub):
    _, url = stub
    return RemoteBackend(url, timeout=5.0, retries=1, batch_size=2, max_inflight=2)


def test_descriptor(client):
    desc = client.describe()
    assert desc.dim == DIM
    assert desc.mask_piece == "[MASK]"
    assert desc.max_pieces == 64


def test_tokenize_matches_service_contract(client):
    pieces = client.tokenize_word("energy-efficient")
    assert pieces == ["energy", "-", "efficient"]
    assert len(client.tokenize_word("monitoring")) >= 1


def test_encode_matches_local_reference(client):
    req = EncodeRequest(("a", "b", "c"), masked={2}, want={0, 1})
    remote = client.encode(req)
    local = ReferenceBackend(seed=SEED, dim=DIM).encode(req)
    for idx in (0, 1):
        np.testing.assert_allclose(remote.vectors[idx], local.vectors[idx], atol=1e-12)


def test_encode_batch_chunked_order_preserved(client):
    reqs = [EncodeRequest(("a", "b", "c"), want={i % 3}) for i in range(7)]
    results = client.encode_batch(reqs)
    local = ReferenceBackend(seed=SEED, dim=DIM)
    assert len(results) == 7
    for req, got in zip(reqs, results):
        want_idx = next(iter(req.want))
        np.testing.assert_allclose(
            got.vectors[want_idx], local.encode(req).vectors[want_idx], atol=1e-12
        )


def test_oversize_rejected_before_dispatch(stub):
    state, url = stub
    client = RemoteBackend(url, timeout=5.0)
    client.describe()
    sent_before = len(state.request_log)
    with pytest.raises(OversizeRequestError):
        client.encode(EncodeRequest(tuple(f"p{i}" for i in range(65)), want={0}))
    with pytest.raises(OversizeRequestError, match="batch item 1"):
        client.encode_batch(
            [
                EncodeRequest(("a",), want={0}),
                EncodeRequest(tuple(f"p{i}" for i in range(65)), want={0}),
            ]
        )
    assert len(state.request_log) == sent_before  # nothing hit the wire


def test_transport_error_after_retries(stub):
    state, url = stub
    state.fault_mode = "http500"
    client = RemoteBackend(url, timeout=5.0, retries=1)
    with pytest.raises(TransportError, match="2 attempts"):
        client.describe()


def test_retry_recovers_from_transient_500(stub):
    state, url = stub
    state.fault_mode = "flaky500"
    state.fail_budget = 1
    client = RemoteBackend(url, timeout=5.0, retries=2)
    assert client.describe().dim == DIM


def test_malformed_response(stub):
    state, url = stub
    client = RemoteBackend(url, timeout=5.0, retries=0)
    client.describe()
    state.fault_mode = "malformed"
    with pytest.raises(ProtocolError, match="unparseable"):
        client.encode(EncodeRequest(("a", "b"), want={0}))


def test_dimension_mismatch(stub):
    state, url = stub
    client = RemoteBackend(url, timeout=5.0, retries=0)
    client.describe()
    state.fault_mode = "wrong_dim"
    with pytest.raises(DimMismatchError):
        client.encode(EncodeRequest(("a", "b"), want={0}))


def test_connection_refused_is_transport_error():
    client = RemoteBackend("http://127.0.0.1:1", timeout=0.5, retries=0)
    with pytest.raises(TransportError):
        client.describe()
