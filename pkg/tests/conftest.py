from __future__ import annotations

import pytest
from hypothesis import settings

# Derandomized so the suite (and its acceptance determinism checks) is stable.
settings.register_profile("suite", max_examples=80, derandomize=True, deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def k2_config():
    from helpers import small_config

    return small_config(k=2)


@pytest.fixture(scope="session")
def loop2(k2_config):
    from helpers import loop_cfg

    return loop_cfg(k2_config)


@pytest.fixture(scope="session")
def straight2(k2_config):
    from helpers import straightline_cfg

    return straightline_cfg(k2_config)
