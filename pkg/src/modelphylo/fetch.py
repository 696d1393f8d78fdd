"""Live registry client: paginated model listing plus per-model card downloads.

The listing endpoint returns a JSON array per page and advertises the next
page through an RFC 8288 ``Link: <url>; rel="next"`` header. A resume token is
simply the URL of the next page still to be fetched; :data:`TERMINAL_TOKEN`
marks an exhausted listing.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable
from urllib.parse import quote, urlencode

import httpx

from .errors import AuthError, FetchAborted
from .ingest import token_from_env

log = logging.getLogger(__name__)

TERMINAL_TOKEN = ""
RETRYABLE_STATUS = {429, 500, 502, 503, 504}


@dataclass
class FetchConfig:
    base_url: str = "https://huggingface.co"
    list_path: str = "/api/models"
    card_path: str = "/{model_id}/raw/main/README.md"
    page_size: int = 1000
    rate_limit: float = 5.0  # requests per second, shared by all workers
    max_retries: int = 5
    backoff_base: float = 1.0
    backoff_cap: float = 60.0
    timeout: float = 30.0
    workers: int = 4
    token_env: str = "HF_TOKEN"
    extra_params: dict = field(default_factory=lambda: {"full": "true"})

    def first_page_url(self) -> str:
        params = {"limit": self.page_size, **self.extra_params}
        return f"{self.base_url.rstrip('/')}{self.list_path}?{urlencode(params)}"

    def card_url(self, model_id: str) -> str:
        return self.base_url.rstrip("/") + self.card_path.format(model_id=quote(model_id, safe="/"))

    def headers(self) -> dict:
        token = token_from_env(self.token_env)
        return {"Authorization": f"Bearer {token}"} if token else {}


class RateLimiter:
    """Spaces successive acquisitions at least ``1/rate`` seconds apart, across threads."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self._sleep(slot - now)


def _next_link(response: httpx.Response) -> str:
    link = response.links.get("next")
    return link["url"] if link else TERMINAL_TOKEN


class _Requester:
    def __init__(self, config: FetchConfig, client: httpx.Client | None, sleep):
        self.config = config
        self.limiter = RateLimiter(config.rate_limit, sleep=sleep)
        self.sleep = sleep
        self._owns_client = client is None
        self.client = client or httpx.Client(timeout=config.timeout, headers=config.headers())

    def close(self):
        if self._owns_client:
            self.client.close()

    def get(self, url: str, allow_404: bool = False) -> httpx.Response | None:
        cfg = self.config
        last_error = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                self.sleep(min(cfg.backoff_cap, cfg.backoff_base * 2 ** (attempt - 1)))
            self.limiter.acquire()
            try:
                response = self.client.get(url)
            except httpx.TransportError as exc:
                last_error = exc
                log.info("transport error on %s (attempt %d): %s", url, attempt + 1, exc)
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"{response.status_code} from {url}")
            if response.status_code == 404 and allow_404:
                return None
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                log.info("HTTP %d on %s (attempt %d)", response.status_code, url, attempt + 1)
                continue
            if response.status_code >= 400:
                last_error = f"HTTP {response.status_code}"
                break
            return response
        raise FetchAborted(f"giving up on {url}: {last_error}", resume_token=url)


@dataclass
class FetchResult:
    records: list[dict]
    resume_token: str
    pages: int
    record_count: int

    @property
    def complete(self) -> bool:
        return self.resume_token == TERMINAL_TOKEN


def fetch_snapshot(
    config: FetchConfig,
    resume_token: str | None = None,
    out: IO[bytes] | None = None,
    max_pages: int | None = None,
    client: httpx.Client | None = None,
    sleep=time.sleep,
) -> FetchResult:
    """Walk the paginated listing from ``resume_token`` (or the first page).

    With ``out`` given, each record is written there as one NDJSON line as its
    page arrives and ``records`` stays empty. Stopping early via ``max_pages``
    returns the token of the next unfetched page. On exhausted retries a
    :class:`FetchAborted` carries the token of the page that failed.
    """
    if resume_token == TERMINAL_TOKEN:
        return FetchResult([], TERMINAL_TOKEN, 0, 0)
    url = resume_token or config.first_page_url()
    requester = _Requester(config, client, sleep)
    records: list[dict] = []
    pages = count = 0
    try:
        while url and (max_pages is None or pages < max_pages):
            try:
                response = requester.get(url)
            except FetchAborted as exc:
                exc.records_fetched = count
                raise
            page = response.json()
            if not isinstance(page, list):
                raise FetchAborted(f"unexpected page payload from {url}", resume_token=url, records_fetched=count)
            pages += 1
            count += len(page)
            if out is not None:
                for obj in page:
                    out.write(json.dumps(obj, ensure_ascii=False, sort_keys=True).encode("utf-8") + b"\n")
            else:
                records.extend(page)
            url = _next_link(response)
    finally:
        requester.close()
    return FetchResult(records, url, pages, count)


def fetch_cards(
    model_ids: Iterable[str],
    config: FetchConfig,
    client: httpx.Client | None = None,
    sleep=time.sleep,
) -> dict[str, str | None]:
    """Download cards for the distinct ``model_ids``; a 404 maps to ``None``."""
    ids = sorted(set(model_ids))
    requester = _Requester(config, client, sleep)
    results: dict[str, str | None] = {}

    def one(model_id):
        response = requester.get(config.card_url(model_id), allow_404=True)
        return model_id, None if response is None else response.text

    try:
        with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
            futures = [pool.submit(one, m) for m in ids]
            errors = []
            for fut in futures:
                try:
                    model_id, text = fut.result()
                    results[model_id] = text
                except FetchAborted as exc:
                    errors.append(exc)
            if errors:
                exc = FetchAborted(f"{len(errors)} card downloads failed", resume_token=None,
                                   records_fetched=len(results))
                exc.results = dict(sorted(results.items()))
                raise exc
    finally:
        requester.close()
    return dict(sorted(results.items()))
