"""Shared fixture: the sidecar served over real HTTP on an ephemeral port."""

import threading
import time

import pytest
import uvicorn

from qa_sidecar.app import SidecarConfig, create_app


@pytest.fixture(scope="session")
def sidecar_url():
    config = uvicorn.Config(
        create_app(SidecarConfig()),
        host="127.0.0.1",
        port=0,
        log_level="warning",
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("sidecar server did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
