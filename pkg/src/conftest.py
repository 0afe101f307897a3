import os

import pytest


def pytest_collection_modifyitems(config, items):
    if os.getenv("PQ_OSELM_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set PQ_OSELM_RUN_SLOW=1 for full-size runs")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def data_dir(tmp_path, monkeypatch):
    """Keep default artifact paths inside the test's temp directory"""
    monkeypatch.setenv("PQ_OSELM_DATA_DIR", str(tmp_path / "data"))
    return tmp_path / "data"
