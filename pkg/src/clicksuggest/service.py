"""Output formats shared by the CLI, and the HTTP suggestion endpoint.

    GET /suggest?q=<text>&k=<int>[&m=<int>]  ->  200 JSON suggestion list
    GET /healthz                             ->  200 {"status": "ok", "manifest_digest": ...}
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .errors import DataError
from .graph import DEFAULT_K
from .suggest import DEFAULT_M, Engine, SuggestionList, suggest

log = logging.getLogger(__name__)


def fmt_score(score) -> str:
    return f"{float(score):.6g}"


def to_service_dict(sl: SuggestionList) -> dict:
    d = {
        "query": sl.source_query,
        "class": sl.query_class.kind.value,
        "long_tail": sl.query_class.long_tail,
        "via": sl.generated_via.value,
        "suggestions": [{"text": s, "score": float(fmt_score(v))} for s, v in sl.items],
    }
    if sl.similar:
        d["similar"] = [{"text": s, "score": float(fmt_score(v))} for s, v in sl.similar]
    if sl.warning:
        d["warning"] = sl.warning
    return d


def format_records(sl: SuggestionList) -> str:
    """One tab-separated record per suggestion; rank 0 marks an empty list."""
    head = f"{sl.source_query}\t{sl.query_class.kind.value}\t{int(sl.query_class.long_tail)}\t{sl.generated_via.value}"
    if not sl.items:
        return f"{head}\t0\t\t{sl.warning or ''}\n"
    return "".join(f"{head}\t{r}\t{s}\t{fmt_score(v)}\n" for r, (s, v) in enumerate(sl.items, start=1))


def format_text(sl: SuggestionList) -> str:
    kind = sl.query_class.kind.value
    tail = ", long-tail" if sl.query_class.long_tail else ""
    out = [f"query: {sl.source_query}  [{kind}{tail}, via {sl.generated_via.value}]"]
    if sl.similar:
        out.append("similar queries:")
        width = max(len(s) for s, _ in sl.similar)
        out.extend(f"  {s:<{width}}  {fmt_score(v)}" for s, v in sl.similar)
    if not sl.items:
        reason = f" ({sl.warning})" if sl.warning else ""
        out.append(f"no suggestions{reason}")
    else:
        out.append("suggested queries:")
        width = max(len(s) for s, _ in sl.items)
        out.extend(f"  {r:>2}. {s:<{width}}  {fmt_score(v)}" for r, (s, v) in enumerate(sl.items, start=1))
    return "\n".join(out) + "\n"


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    artifacts: str | None = None
    k: int = DEFAULT_K
    m: int = DEFAULT_M
    request_log: bool = False

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be >= 1")

    @classmethod
    def from_bind(cls, bind: str, **kw) -> "ServeConfig":
        host, _, port = bind.rpartition(":")
        return cls(host=host or "127.0.0.1", port=int(port), **kw)


class _Handler(BaseHTTPRequestHandler):
    server: "SuggestServer"
    protocol_version = "HTTP/1.1"

    def _send(self, status: int, body: dict) -> None:
        data = json.dumps(body, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, format, *args):
        if self.server.config.request_log:
            log.info("%s %s", self.address_string(), format % args)

    def do_GET(self):
        try:
            url = urlsplit(self.path)
            if url.path == "/healthz":
                self._healthz()
            elif url.path == "/suggest":
                self._suggest(parse_qs(url.query))
            else:
                self._send(HTTPStatus.NOT_FOUND, {"error": "not found"})
        except Exception:
            err_id = uuid.uuid4().hex[:12]
            log.exception("internal error %s", err_id)
            self._send(HTTPStatus.INTERNAL_SERVER_ERROR, {"error": "internal error", "id": err_id})

    def _healthz(self):
        engine = self.server.engine
        if engine is None:
            self._send(HTTPStatus.SERVICE_UNAVAILABLE, {"status": "unavailable"})
            return
        digest = (engine.manifest or {}).get("digest", "")
        self._send(HTTPStatus.OK, {"status": "ok", "manifest_digest": digest})

    def _int_param(self, params, name, default):
        if name not in params:
            return default
        try:
            value = int(params[name][0])
        except ValueError:
            value = 0
        if value < 1:
            raise _BadRequest(f"{name} must be a positive integer")
        return value

    def _suggest(self, params):
        engine = self.server.engine
        if engine is None:
            self._send(HTTPStatus.SERVICE_UNAVAILABLE, {"error": "engine not loaded"})
            return
        try:
            q = params.get("q", [""])[0]
            if not q.strip():
                raise _BadRequest("missing query parameter q")
            k = self._int_param(params, "k", self.server.config.k)
            m = self._int_param(params, "m", self.server.config.m)
            result = suggest(q, engine, m=m, k=k)
        except (_BadRequest, DataError) as exc:
            self._send(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
            return
        self._send(HTTPStatus.OK, to_service_dict(result))


class _BadRequest(Exception):
    pass


class SuggestServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServeConfig, engine: Engine | None):
        self.config = config
        self.engine = engine
        super().__init__((config.host, config.port), _Handler)


def make_server(config: ServeConfig, engine: Engine | None = None) -> SuggestServer:
    """Bind a server; loads ``config.artifacts`` when no engine is given.

    A failed load leaves the server answering 503.
    """
    if engine is None and config.artifacts:
        from .store import load_engine

        try:
            engine = load_engine(config.artifacts)
        except Exception:
            log.exception("could not load artifacts from %s", config.artifacts)
    return SuggestServer(config, engine)


def serve_in_thread(server: SuggestServer) -> threading.Thread:
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    return t
