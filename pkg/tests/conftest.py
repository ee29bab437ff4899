import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fsru.config import RunConfig
from fsru.data import SyntheticSpec, generate

settings.register_profile("fsru", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fsru")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_spec(count=4, **kw):
    """m=8 text, 2x4 grid of 2x2 patches."""
    base = dict(count=count, m=8, h=2, w=4, patch_size=2, vocab_size=16,
                text_bands={1: (1,), 0: (2, 3)}, image_bands={1: (1,), 0: (2, 3)})
    base.update(kw)
    return SyntheticSpec(**base)


def tiny_config(**kw):
    base = dict(d=8, m=8, n=8, vocab_size=16, patch_size=2, batch_size=8, epochs=3)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture
def tiny_data():
    return generate(tiny_spec(count=24), seed=0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
