import pytest

from bmodomain.geometry import DomainSpec, build_domain, default_window


def make_domain(kind, **params):
    spec = DomainSpec(kind, params).validate()
    return build_domain(spec, default_window(spec))


@pytest.fixture
def square():
    return make_domain("square")


@pytest.fixture
def disk():
    return make_domain("disk")


@pytest.fixture
def half_plane():
    return make_domain("half-plane")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
