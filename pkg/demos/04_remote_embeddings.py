"""
Remote embeddings with a local cache
====================================

The remote backend speaks a small JSON protocol. Here a throwaway HTTP
server plays the embedding service so the batching, retry and cache
behaviour can be observed without network access.
"""

import json
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from chatter_atlas import EmbeddingCache, RemoteEmbedder, RemoteEmbedderConfig, embed_documents

calls = []


class Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        calls.append(len(body["texts"]))
        # fail the very first request to show the retry
        if len(calls) == 1:
            self.send_response(503)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return
        out = {"embeddings": [[len(d), d.count("gg"), 1.0] for d in body["texts"]]}
        data = json.dumps(out).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_address[1]}/embed"

config = RemoteEmbedderConfig(endpoint=url, model_id="toy", batch_size=2, backoff_base=0.01)
backend = RemoteEmbedder(config, api_key="demo-key")
docs = ["gg gg", "hello chat", "gg wp", "what a play", "pog"]

with tempfile.TemporaryDirectory() as tmp:
    cache = EmbeddingCache(tmp)
    first = embed_documents(backend, docs, cache=cache)
    print("requests (documents per request):", calls)

    # the second run is served entirely from disk
    calls.clear()
    second = embed_documents(backend, docs, cache=cache)
    print("requests on rerun:", calls)
    print("identical:", np.array_equal(first, second))

server.shutdown()
