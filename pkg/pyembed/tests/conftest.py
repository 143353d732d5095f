import pytest

from _fixtures import write_inputs


@pytest.fixture(scope="session")
def inputs(tmp_path_factory):
    """Task spec, caption/synonym files, and templates for a 2-class task."""
    return write_inputs(tmp_path_factory.mktemp("inputs"))
