import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def ops_manual_doc():
    from opsrag.cleaning import clean_text
    from opsrag.documents import parse_document

    src = (FIXTURES / "ops_manual.md").read_text(encoding="utf-8")
    return clean_text(parse_document(src, doc_id="ops_manual"))


@pytest.fixture(scope="session")
def small_corpus():
    """Small synthetic corpus shared by retrieval-oriented tests."""
    from opsrag.synthetic import make_synthetic_corpus

    return make_synthetic_corpus(n_docs=40, n_topics=4, seed=11)


class _ChatHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        reply = self.server.reply_fn(payload)  # type: ignore[attr-defined]
        if isinstance(reply, tuple):
            status, body = reply
        else:
            status, body = 200, {"choices": [{"message": {"role": "assistant", "content": reply}}]}
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    """Local HTTP chat-completion stub; set .reply_fn to script responses."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ChatHandler)
    server.reply_fn = lambda payload: "ok"
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server
    finally:
        server.shutdown()
        thread.join(timeout=5)
