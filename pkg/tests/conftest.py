import pytest

from sheetmidi.fixtures import make_suite
from sheetmidi.midi import midi_to_bootleg

SUITE_SEED = 7


@pytest.fixture(scope="session")
def fixture_suite():
    """25 rendered query pages over 5 synthetic pieces, plus the pieces' MIDI bootlegs."""
    pieces, queries = make_suite(25, 5, seed=SUITE_SEED)
    bootlegs = [midi_to_bootleg(p.midi_bytes()) for p in pieces]
    return pieces, queries, bootlegs


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
