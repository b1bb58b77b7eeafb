import pytest

from fblr.threads import limit_blas_threads


@pytest.fixture(scope="session", autouse=True)
def _single_thread_blas():
    # oversubscribed BLAS pools slow these small solves by more than 10x
    ctl = limit_blas_threads(1)
    yield
    del ctl
