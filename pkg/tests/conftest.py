import pytest

from makged.kg import ingest_triples


def graph(*triples: str):
    """Build a graph from ``"h r t"`` strings."""
    return ingest_triples("\t".join(t.split()) for t in triples)


TOY = ["a r1 b", "a r2 c", "d r3 a", "c r1 a", "b r2 c"]


@pytest.fixture
def toy_graph():
    return graph(*TOY)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS.values():
            terminalreporter.write_line(line)
