import pytest

from . import setup as setups


def pytest_generate_tests(metafunc):
    if "setup" not in metafunc.fixturenames:
        return
    mode = metafunc.config.getoption("mode")
    declared = getattr(setups, mode, None)
    if not isinstance(declared, list):
        raise ValueError(
            f'Invalid testing mode "{mode}". See tests/integration/setup.py for declared testing modes.'
        )
    metafunc.parametrize(
        "setup", declared, indirect=True, ids=list(map(str, declared)), scope="module"
    )


@pytest.fixture(scope="module")
def setup(request):
    return request.param


@pytest.fixture(scope="module")
def directory(setup, tmp_path_factory):
    return tmp_path_factory.mktemp(str(setup)) / "first"


# one pipeline run per setup, shared by every test of the module
@pytest.fixture(scope="module")
def statuses(setup, directory):
    return setup(directory)


@pytest.fixture(scope="module")
def report(statuses, directory):
    return directory / "results" / "report"
