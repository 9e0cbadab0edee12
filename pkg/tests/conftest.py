import numpy as np
import pytest

from fmlprec import data, synthetic
from fmlprec.spectral import KERNELS


@pytest.fixture(params=sorted(KERNELS))
def backend(request):
    """Every available FFT kernel (the numpy fallback and, if built, the extension)."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def periodic_log():
    raw = synthetic.periodic_sequences(seed=0)
    return data.apply_core_filter(data.from_sequences(raw))


@pytest.fixture(scope="session")
def periodic_splits(periodic_log):
    return data.split_leave_one_out(periodic_log, max_len=50)


@pytest.fixture
def small_splits():
    """Forty short sequences over a vocabulary large enough for 99 sampled negatives."""
    gen = np.random.default_rng(3)
    raw = {f"u{u}": [f"i{i}" for i in gen.choice(200, size=8, replace=False)] for u in range(40)}
    return data.split_leave_one_out(data.from_sequences(raw), max_len=10)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[number])
