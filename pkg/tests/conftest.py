import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# First calls into compiled kernels pay the JIT cost; deadlines would flake.
settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def fig1_matrix(precision="f64"):
    """The 3x3 tridiagonal fixture [[1,2,0],[3,4,5],[0,6,7]] in band form."""
    from bandblas.core import GeneralBandMatrix

    return GeneralBandMatrix.from_dense([[1, 2, 0], [3, 4, 5], [0, 6, 7]], 1, 1, precision=precision)


_verdicts = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """``verdict(n, ok, detail)`` prints and records one acceptance line."""
    lines = request.config.stash.setdefault(_verdicts, [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_verdicts, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
