import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from chatter_atlas import ingest
from chatter_atlas.synthetic import planted_corpus


class ScriptedEmbeddingServer:
    """HTTP server speaking the embedding protocol.

    ``script`` is a list of per-request actions consumed in order; once it is
    exhausted every request succeeds. An action is an int status code, or
    "short" to answer with one vector too few.
    """

    def __init__(self, dim=4):
        self.dim = dim
        self.script = []
        self.requests = []
        self.lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with server.lock:
                    server.requests.append({"body": body, "auth": self.headers.get("Authorization")})
                    action = server.script.pop(0) if server.script else 200
                texts = body["texts"]
                if isinstance(action, int) and action != 200:
                    self._send(action, {"error": "scripted"})
                    return
                vectors = [server.vector_for(t) for t in texts]
                if action == "short":
                    vectors = vectors[:-1]
                self._send(200, {"embeddings": vectors})

            def _send(self, status, payload):
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def vector_for(self, text):
        # encodes the text length so order mistakes are visible
        return [float(len(text)), 1.0] + [0.0] * (self.dim - 2)

    @property
    def url(self):
        return f"http://127.0.0.1:{self.httpd.server_address[1]}/embed"

    def batch_sizes(self):
        return [len(r["body"]["texts"]) for r in self.requests]


@pytest.fixture
def embedding_server():
    server = ScriptedEmbeddingServer()
    server.thread.start()
    yield server
    server.httpd.shutdown()
    server.httpd.server_close()


@pytest.fixture(scope="session")
def planted():
    return planted_corpus(seed=0)


@pytest.fixture
def planted_log(tmp_path, planted):
    messages, labels = planted
    path = tmp_path / "planted.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        ingest.write_jsonl(messages, fh)
    return path, labels


def pytest_terminal_summary(terminalreporter):
    from criteria import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
