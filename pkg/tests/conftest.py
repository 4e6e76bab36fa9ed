import textwrap

import pytest

from vortexcue import empirical


@pytest.fixture(scope="session")
def grids():
    return empirical.load_grids()


def make_grids(study1="", accuracy="", sound="", direction=None):
    """Grids from inline CSV bodies (headers added); direction defaults to the shipped table."""
    def body(cols, rows):
        return ",".join(cols) + "\n" + textwrap.dedent(rows).strip() + "\n"

    shipped = empirical.load_grids()
    return empirical.StudyGrids(
        sound=empirical.parse_sound(body(empirical.SOUND_COLUMNS, sound)) if sound else {},
        outcome=empirical.parse_study1(body(empirical.STUDY1_COLUMNS, study1)) if study1 else {},
        accuracy=empirical.parse_accuracy(body(empirical.ACCURACY_COLUMNS, accuracy)) if accuracy else {},
        direction=shipped.direction if direction is None else direction,
    )


_criteria = {}


@pytest.fixture
def criterion(request):
    """Record an acceptance verdict; the summary lists one line per criterion."""
    def record(number, ok, detail):
        _criteria[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        ok, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
