import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="ejecuta también los tests lentos (g-and-k)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: test lento, sólo con --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="necesita --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
