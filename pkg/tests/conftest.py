import importlib.resources
from pathlib import Path

import pytest

from slowread import kernels
from slowread.kernels import _numpy

SCENARIOS = Path(str(importlib.resources.files("slowread") / "scenarios"))

BACKENDS = {"numpy": _numpy}
try:
    from slowread.kernels import _numba
except ImportError:  # pragma: no cover
    pass
else:
    BACKENDS["numba"] = _numba


@pytest.fixture
def scenarios_dir():
    return SCENARIOS


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per kernel backend by swapping the dispatch target."""
    monkeypatch.setattr(kernels, "_impl", BACKENDS[request.param])
    return request.param
