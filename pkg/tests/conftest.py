from __future__ import annotations

import pytest

from builders import network_from_edges
from topicgran.corpus import load_corpus
from topicgran.synthgen import PlantedCorpusSpec, generate

SMALL_SPEC = PlantedCorpusSpec(n_topics=4, pubs_per_topic=120, p_intra=0.08, p_inter=0.001,
                               n_synthesis_per_topic=2, seed=1)

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_lines():
    """Collector for one PASS/FAIL line per acceptance criterion, printed in the terminal summary."""
    return ACCEPTANCE_LINES


@pytest.fixture
def two_triangles():
    """Two unit-weight triangles joined by one unit bridge edge."""
    edges = {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0, (3, 4): 1.0, (3, 5): 1.0, (4, 5): 1.0, (2, 3): 1.0}
    return network_from_edges(6, edges), edges


@pytest.fixture(scope="session")
def small_planted(tmp_path_factory):
    """A four-topic planted corpus on disk: (directory, spec, loaded graph)."""
    out = tmp_path_factory.mktemp("small_planted")
    pubs, cits, _ = generate(SMALL_SPEC, out)
    return out, SMALL_SPEC, load_corpus(pubs, cits)
