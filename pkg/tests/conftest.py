import numpy as np
import pytest

from sosdecoder import _accel
from sosdecoder.problem import MldInstance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["numba", "numpy"])
def kernel_path(request, monkeypatch):
    """Run a test once per kernel implementation."""
    if request.param == "numba" and not _accel.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


def random_instance(rng, n_range=(2, 9), v_range=(1, 4), density=0.45, flip=0.35, max_vars=None):
    """Random consistent instance; ``max_vars`` bounds the slack-augmented size."""
    from sosdecoder.problem import to_polynomial

    while True:
        n = int(rng.integers(*n_range))
        v = int(rng.integers(*v_range))
        h = (rng.random((v, n)) < density).astype(np.uint8)
        e = (rng.random(n) < flip).astype(np.uint8)
        inst = MldInstance(h, h @ e % 2, rng.uniform(0.2, 3.0, n))
        if max_vars is None or to_polynomial(inst).num_vars <= max_vars:
            return inst


def synthetic_scaling(rng, p_th=0.09, nu=1.5, coef=(0.2, 1.0, 0.5), noise=0.01, distances=(3, 5, 7)):
    """Rows following ``a + b x + c x^2`` with ``x = d^(1/nu) (p - p_th)`` and multiplicative noise."""
    a, b, c = coef
    rows = []
    for d in distances:
        for p in np.linspace(0.07, 0.11, 9):
            x = d ** (1.0 / nu) * (p - p_th)
            mean = a + b * x + c * x * x
            rows.append({"distance": d, "p": p, "p_L": mean * (1.0 + noise * rng.normal()),
                         "stderr": noise * mean, "trials": 10_000})
    return rows


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
