import pytest

from classcoder.backends import MockKeywordBackend
from classcoder.codebook import builtin_cdas
from classcoder.demo import make_demo_corpus, make_demo_lesson, make_demo_test
from classcoder.prompting import compile_instructions, default_config

# Filled by the acceptance tests; echoed after the run so the per-criterion
# verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def codebook():
    return builtin_cdas()


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def document(config):
    return compile_instructions(config)


@pytest.fixture(scope="session")
def demo_corpus():
    return make_demo_corpus()


@pytest.fixture(scope="session")
def demo_test():
    return make_demo_test()


@pytest.fixture()
def small_lesson():
    # 8 turns keeps single-batch tests readable
    lesson, gold = make_demo_lesson("unit", n=8)
    return lesson, gold


@pytest.fixture()
def backend():
    return MockKeywordBackend()
