import pytest


def pytest_addoption(parser):
    parser.addoption("--mode", action="store", default="basic")


def pytest_collection_modifyitems(config, items):
    if config.getoption("mode") == "full":
        return
    skip_full = pytest.mark.skip(reason="acceptance-scale test, run with --mode full")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip_full)
