import os
from pathlib import Path

import numpy as np
import pytest

from csecg import _backend
from csecg.pipeline import DEFAULT_RECORDS, generate_synthetic_record

BACKENDS = [pytest.param(_backend.python_kernels, id="python")]
if _backend.compiled_kernels is not None:
    BACKENDS.append(pytest.param(_backend.compiled_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(_backend, "kernels", request.param)
    for mod in ("csecg.ingest", "csecg.sensing", "csecg.detector"):
        monkeypatch.setattr(f"{mod}.kernels", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20201015)


@pytest.fixture(scope="session")
def synth60():
    return generate_synthetic_record(60, 30, 360, seed=7)


def mitdb_dir():
    d = os.environ.get("MITDB_DIR")
    return Path(d) if d else None


def mitdb_records():
    d = mitdb_dir()
    if d is None:
        return []
    wanted = os.environ.get("MITDB_RECORDS")
    ids = [r.strip() for r in wanted.split(",")] if wanted else list(DEFAULT_RECORDS)
    return [r for r in ids if (d / f"{r}.hea").exists()]


@pytest.fixture
def record100_dir():
    d = mitdb_dir()
    if d is None or not (d / "100.hea").exists():
        pytest.skip("MIT-BIH record 100 not available (set MITDB_DIR)")
    return d


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split(".", 1)[0].split()[-1])):
            terminalreporter.write_line(line)
