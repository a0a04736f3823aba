import pytest

from bolalab import traces

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def example_ladder():
    return traces.example_manifest(33, 3.0)


@pytest.fixture(scope="session")
def table_manifest():
    return traces.reference_manifest(200, 42, 3.0)
