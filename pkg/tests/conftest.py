import pytest

from exactlab import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile once so timed tests measure the operations, not the JIT
    kernels.warmup()
