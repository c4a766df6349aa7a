import hashlib
from pathlib import Path

import pytest

from discoverkit.mock.corpus import CorpusOptions, corpus_from_seed
from discoverkit.mock.server import FaultProfile, serve
from discoverkit.oai.records import OaiEndpoint


def fast_endpoint(base_url, retries=1):
    """Endpoint settings for local mocks: no politeness delay, tiny backoff."""
    return OaiEndpoint(base_url, timeout=10, max_retries=retries, politeness_delay=0, backoff=0.01)


def no_sleep(_seconds):
    pass


@pytest.fixture
def mock_server():
    """Factory for mock repositories; everything started is shut down."""
    started = []

    def start(n=60, seed=1, fault="healthy", **options):
        corpus = corpus_from_seed(seed, n, CorpusOptions(**options))
        server = serve(corpus, FaultProfile.parse(fault))
        started.append(server)
        return server

    yield start
    for server in started:
        server.shutdown()


@pytest.fixture(scope="module")
def healthy_server():
    server = serve(corpus_from_seed(11, 120), FaultProfile())
    yield server
    server.shutdown()


class _Reply:
    def __init__(self, url, status, body, headers=None):
        self.url = url
        self.status_code = status
        self.content = body
        self.headers = headers or {}
        self.history = []


class InProcessSession:
    """Routes client requests straight into a MockRepository, skipping sockets."""

    def __init__(self, repository, base_url="http://mock.local/oai"):
        from urllib.parse import urlsplit

        self._split = urlsplit
        self.repository = repository
        repository.base_url = base_url
        self.calls = []

    def request(self, method, url, headers=None, timeout=None):
        parts = self._split(url)
        self.calls.append(url)
        status, ctype, body = self.repository.handle(parts.path, parts.query)
        return _Reply(url, status, body, {"Content-Type": ctype})

    def get(self, url, **kw):
        return self.request("GET", url, **kw)

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        pass


def dir_digest(path):
    """Hash of every file name, size and content under ``path``."""
    h = hashlib.sha256()
    for p in sorted(Path(path).rglob("*")):
        h.update(str(p.relative_to(path)).encode())
        if p.is_file():
            h.update(p.read_bytes())
    return h.hexdigest()


# one summary line per acceptance criterion, printed after the test run
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
