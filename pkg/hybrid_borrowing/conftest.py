import os

import pytest
from django.conf import settings as django_settings

from hybrid_borrowing.analysis import ProspectiveData
from hybrid_borrowing.beta_mixture import HistoricalPool
from hybrid_borrowing.io import load_historical_csv
from hybrid_borrowing.tests.factories import HistoricalTrialFactory


def pytest_collection_modifyitems(config, items):
    if os.environ.get("HYBRID_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set HYBRID_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def output_dir(settings, tmp_path):
    settings.HYBRID_OUTPUT_DIR = str(tmp_path / "results")
    return tmp_path / "results"


@pytest.fixture
def as_pool() -> HistoricalPool:
    return load_historical_csv(django_settings.HYBRID_DATA_DIR / "ankylosing_spondylitis.csv")


@pytest.fixture
def as_data() -> ProspectiveData:
    return ProspectiveData(y_t=14, n_t=24, y_c=1, n_c=6)


@pytest.fixture
def small_pool() -> HistoricalPool:
    return HistoricalPool(tuple(HistoricalTrialFactory.create_batch(4)))
