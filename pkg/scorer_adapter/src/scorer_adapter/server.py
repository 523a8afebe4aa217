"""Protocol servers: one-line-per-request stdio, and POST /predict HTTP.

See PROTOCOL.md at the repository root for the wire format. Both servers
answer an unparseable or invalid request with ``{"id": -1, "error": ...}``
and keep running.
"""

import json
import logging
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import AdapterError

log = logging.getLogger("scorer_adapter")


def handle_request(model, payload):
    """Validate one parsed request and score it. Returns the response dict."""
    if not isinstance(payload, dict):
        return {"id": -1, "error": "request is not a JSON object"}
    req_id = payload.get("id")
    columns = payload.get("columns")
    rows = payload.get("rows")
    if not isinstance(req_id, int) or req_id < 0:
        return {"id": -1, "error": "missing or invalid request id"}
    if not isinstance(columns, list) or not all(isinstance(c, str) for c in columns):
        return {"id": -1, "error": "missing or invalid columns"}
    if not isinstance(rows, list) or any(
        not isinstance(r, list) or len(r) != len(columns) for r in rows
    ):
        return {"id": -1, "error": "rows do not match columns"}
    try:
        preds = model.score(columns, rows)
    except (AdapterError, ValueError, TypeError) as exc:
        return {"id": -1, "error": f"scoring failed: {exc}"}
    return {"id": req_id, "predictions": [float(v) for v in preds]}


def handle_line(model, line):
    try:
        payload = json.loads(line)
    except json.JSONDecodeError:
        return {"id": -1, "error": "malformed request"}
    return handle_request(model, payload)


def serve_stdio(model, stdin=None, stdout=None):
    """Read request lines until EOF; one response line per request, flushed."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        response = handle_line(model, line)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


def make_http_server(model, host, port):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if self.path != "/predict":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length)
            response = handle_line(model, body.decode("utf-8", errors="replace"))
            status = 200 if response["id"] != -1 else 400
            encoded = json.dumps(response).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(encoded)))
            self.end_headers()
            self.wfile.write(encoded)

        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_http(model, host, port):
    server = make_http_server(model, host, port)
    log.info("serving on http://%s:%d/predict", *server.server_address[:2])
    server.serve_forever()
