import pytest

from murim.config import RunConfig, with_overrides

TINY = {
    "num_clients": 10,
    "rounds": 3,
    "data.num_features": 10,
    "data.num_classes": 3,
    "data.samples_per_client": 50,
}


def tiny(**overrides) -> RunConfig:
    extra = {k.replace("__", "."): v for k, v in overrides.items()}
    return with_overrides(RunConfig(), {**TINY, **extra})


@pytest.fixture
def tiny_config():
    return tiny()


# (criterion, passed, detail) tuples appended by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
