from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stub_server import StubServer  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="module")
def stub_endpoint():
    with StubServer() as server:
        yield server.endpoint


@pytest.fixture(scope="session")
def corpus():
    from chatvtg.synthetic import generate_corpus

    return generate_corpus(count=20, seed=7)


@pytest.fixture(scope="session")
def corpus_files(corpus, tmp_path_factory):
    from chatvtg.synthetic import write_corpus

    out = tmp_path_factory.mktemp("corpus")
    annotations, durations = write_corpus(corpus, out)
    return annotations, durations


@pytest.fixture(scope="session")
def grid(corpus_files, tmp_path_factory):
    """Parsed ablation-grid JSON from one `chatvtg ablate` run on the corpus."""
    import io
    import json
    from contextlib import redirect_stderr, redirect_stdout

    from chatvtg.cli import main

    annotations, durations = corpus_files
    out_dir = tmp_path_factory.mktemp("ablate")
    stdout, stderr = io.StringIO(), io.StringIO()
    with redirect_stdout(stdout), redirect_stderr(stderr):
        code = main([
            "ablate",
            "--annotations", str(annotations),
            "--durations", str(durations),
            "--provider", "mock", "--oracle", str(annotations),
            "--out", str(out_dir),
        ])
    assert code == 0
    return json.loads(stdout.getvalue())
