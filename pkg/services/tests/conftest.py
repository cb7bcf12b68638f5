import json
import socket
import threading
import time
from pathlib import Path

import pytest
import uvicorn

from phrasemine_services.encoder_server import ModelRuntime, create_app
from phrasemine_services.tiny import build_tiny_masked_lm


class ServerHandle:
    def __init__(self, server: uvicorn.Server, thread: threading.Thread, url: str):
        self.server = server
        self.thread = thread
        self.url = url

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)


def serve_app(app) -> ServerHandle:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, kwargs={"sockets": [sock]}, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start in time")
        time.sleep(0.05)
    return ServerHandle(server, thread, f"http://127.0.0.1:{port}")


@pytest.fixture(scope="session")
def tiny_mlm_dir(tmp_path_factory) -> Path:
    return build_tiny_masked_lm(tmp_path_factory.mktemp("tiny-mlm"), seed=7)


@pytest.fixture(scope="session")
def encoder_server(tiny_mlm_dir):
    runtime = ModelRuntime(str(tiny_mlm_dir), max_batch=8)
    handle = serve_app(create_app(runtime))
    yield handle
    handle.stop()


def write_jsonl(path: Path, objs) -> Path:
    with open(path, "w", encoding="utf-8") as fp:
        for obj in objs:
            fp.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path
