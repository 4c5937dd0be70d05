import numpy as np
import pytest

from racecms import Dataset, make_sparse_vector

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


def pytest_collection_modifyitems(items):
    # tests skipped before running still report their criterion
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties += [("criterion", mark.args[0]), ("title", mark.args[1])]


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
    _CRITERIA[props["criterion"]] = (outcome, props.get("title", ""), props.get("measured", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, title, measured = _CRITERIA[n]
        line = f"criterion {n:2d} {outcome}  {title}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)


@pytest.fixture
def toy10():
    """Ten sets with a spread of similarities to ``query``, plus the query."""
    q = make_sparse_vector(range(0, 20))
    rows = [
        list(range(0, 20)),            # J = 1
        list(range(0, 18)) + [90, 91],  # J = 18/22
        list(range(0, 15)) + [92, 93, 94, 95, 96],
        list(range(5, 25)),
        list(range(10, 30)),
        list(range(0, 5)) + list(range(40, 55)),
        list(range(15, 35)),
        list(range(18, 38)),
        list(range(100, 120)),
        list(range(200, 210)),
    ]
    return Dataset.from_vectors(rows), q


@pytest.fixture
def toy5():
    rows = [[1, 2, 3], [2, 3, 4], [1, 2, 3, 4, 5], [10, 11], [3, 10, 12]]
    return Dataset.from_vectors(rows)


def random_dataset(rng: np.random.Generator, n: int, universe: int = 500, lo: int = 1, hi: int = 30) -> Dataset:
    rows = [rng.choice(universe, size=int(rng.integers(lo, hi + 1)), replace=False) for _ in range(n)]
    return Dataset.from_vectors(rows)
