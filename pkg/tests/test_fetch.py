import io
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import pytest

from modelphylo.errors import AuthError, FetchAborted
from modelphylo.fetch import TERMINAL_TOKEN, FetchConfig, RateLimiter, fetch_cards, fetch_snapshot
from modelphylo.ingest import read_snapshot


class Registry:
    def __init__(self, pages=3, per_page=1000):
        self.pages = pages
        self.per_page = per_page
        self.log: list[tuple[float, str]] = []
        self.fail_plan: dict[str, int] = {}  # path prefix -> remaining 503s
        self.require_token: str | None = None
        self.lock = threading.Lock()

    def page(self, i):
        return [{"id": f"org/m{i}-{j:04d}", "createdAt": "2024-01-01T00:00:00Z", "downloads": j,
                 "tags": ["license:mit"]} for j in range(self.per_page)]


def make_handler(reg: Registry):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _send(self, code, body=b"", headers=()):
            self.send_response(code)
            for k, v in headers:
                self.send_header(k, v)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            with reg.lock:
                reg.log.append((time.monotonic(), self.path))
                for prefix, left in reg.fail_plan.items():
                    if self.path.startswith(prefix) and left > 0:
                        reg.fail_plan[prefix] = left - 1
                        return self._send(503)
            if reg.require_token and self.headers.get("Authorization") != f"Bearer {reg.require_token}":
                return self._send(401)
            url = urlparse(self.path)
            if url.path == "/api/models":
                q = parse_qs(url.query)
                i = int(q.get("cursor", ["0"])[0])
                if reg.pages == 0:
                    return self._send(200, b"[]")
                headers = []
                if i + 1 < reg.pages:
                    host = self.headers["Host"]
                    headers.append(("Link", f'<http://{host}/api/models?limit={q["limit"][0]}&cursor={i + 1}>; rel="next"'))
                return self._send(200, json.dumps(reg.page(i)).encode(), headers)
            if url.path.endswith("/raw/main/README.md"):
                model = url.path[1: -len("/raw/main/README.md")]
                if "missing" in model:
                    return self._send(404)
                return self._send(200, f"# card of {model}".encode())
            return self._send(404)

    return Handler


@pytest.fixture
def server():
    servers = []

    def start(reg: Registry):
        srv = ThreadingHTTPServer(("127.0.0.1", 0), make_handler(reg))
        threading.Thread(target=srv.serve_forever, daemon=True).start()
        servers.append(srv)
        return f"http://127.0.0.1:{srv.server_address[1]}"

    yield start
    for srv in servers:
        srv.shutdown()
        srv.server_close()


def cfg(base, **kw):
    kw.setdefault("rate_limit", 1000.0)
    kw.setdefault("backoff_base", 0.01)
    return FetchConfig(base_url=base, **kw)


def test_three_pages(server):
    reg = Registry()
    base = server(reg)
    out = io.BytesIO()
    result = fetch_snapshot(cfg(base), out=out)
    assert result.record_count == 3000 and result.pages == 3 and result.complete
    assert len([p for _, p in reg.log if p.startswith("/api/models")]) == 3
    out.seek(0)
    records, report = read_snapshot(out)
    assert len(records) == 3000 and report.malformed == 0


def test_resume_after_page_two(server):
    reg = Registry()
    base = server(reg)
    first = fetch_snapshot(cfg(base), max_pages=2)
    assert first.record_count == 2000 and not first.complete
    reg.log.clear()
    rest = fetch_snapshot(cfg(base), resume_token=first.resume_token)
    assert [p for _, p in reg.log] == ["/api/models?limit=1000&cursor=2"]
    assert rest.record_count == 1000 and rest.complete


def test_empty_registry(server):
    reg = Registry(pages=0)
    result = fetch_snapshot(cfg(server(reg)))
    assert result.records == [] and result.resume_token == TERMINAL_TOKEN


def test_terminal_token_fetches_nothing(server):
    reg = Registry()
    result = fetch_snapshot(cfg(server(reg)), resume_token=TERMINAL_TOKEN)
    assert result.record_count == 0 and reg.log == []


def test_retry_with_backoff(server):
    reg = Registry(pages=1, per_page=5)
    reg.fail_plan["/api/models"] = 2
    sleeps = []
    result = fetch_snapshot(cfg(server(reg), backoff_base=1.0), sleep=sleeps.append)
    assert result.record_count == 5 and len(reg.log) == 3
    assert [s for s in sleeps if s >= 0.5] == [1.0, 2.0]


def test_exhausted_retries_checkpoint_then_resume(server):
    reg = Registry(pages=3, per_page=10)
    base = server(reg)
    reg.fail_plan["/api/models?limit=1000&cursor=1"] = 10
    with pytest.raises(FetchAborted) as info:
        fetch_snapshot(cfg(base, max_retries=2), sleep=lambda s: None)
    assert info.value.resume_token.endswith("cursor=1")
    assert info.value.records_fetched == 10
    reg.fail_plan.clear()
    rest = fetch_snapshot(cfg(base), resume_token=info.value.resume_token)
    assert rest.record_count == 20 and rest.complete


def test_auth_failure_is_fatal(server, monkeypatch):
    reg = Registry(pages=1, per_page=1)
    reg.require_token = "s3cret"
    base = server(reg)
    monkeypatch.delenv("HF_TOKEN", raising=False)
    with pytest.raises(AuthError):
        fetch_snapshot(cfg(base))
    assert len(reg.log) == 1
    monkeypatch.setenv("HF_TOKEN", "s3cret")
    assert fetch_snapshot(cfg(base)).record_count == 1


def test_cards_404_absent(server):
    reg = Registry()
    cards = fetch_cards(["org/ok", "org/missing"], cfg(server(reg)))
    assert cards == {"org/missing": None, "org/ok": "# card of org/ok"}


def test_cards_ten_ids_ten_requests(server):
    reg = Registry()
    ids = [f"org/m{i}" for i in range(10)]
    cards = fetch_cards(ids + ids[:4], cfg(server(reg)))
    assert len(cards) == 10 and len(reg.log) == 10


def test_duplicate_ids_one_request(server):
    reg = Registry()
    fetch_cards(["a/b", "a/b", "a/b"], cfg(server(reg)))
    assert len(reg.log) == 1


def test_rate_ceiling_on_server_log(server):
    reg = Registry()
    rate = 25.0
    fetch_cards([f"org/m{i}" for i in range(15)], cfg(server(reg), rate_limit=rate, workers=4))
    stamps = sorted(t for t, _ in reg.log)
    assert len(stamps) == 15
    # any window of r+1 consecutive requests must span at least r intervals (small jitter allowance)
    interval = 1 / rate
    for i in range(len(stamps) - 5):
        assert stamps[i + 5] - stamps[i] >= 5 * interval - 0.02


def test_rate_limiter_spacing_fake_clock():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    lim = RateLimiter(4.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(5):
        lim.acquire()
    assert slept == [0.25, 0.25, 0.25, 0.25]
