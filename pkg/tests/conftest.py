import pytest

from greyline.cli import load_target


@pytest.fixture(scope="session")
def bar():
    return load_target("bar.ir")


@pytest.fixture(scope="session")
def wallet():
    return load_target("wallet.ir")


@pytest.fixture(scope="session")
def nested_eq():
    return load_target("nested_eq.ir")
