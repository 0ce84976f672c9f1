import pytest

from curvflow import config
from curvflow.services.spherical_domain import build_grid


@pytest.fixture
def circle():
    return build_grid(1, 32)


@pytest.fixture
def sphere():
    return build_grid(2, 8, 16)


@pytest.fixture
def fine_sphere():
    return build_grid(2, 16, 32)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    out = tmp_path / "output"
    monkeypatch.setattr(config, "OUTPUT_DIR", out)
    return out


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.setattr(config, "THREADS", 1)
