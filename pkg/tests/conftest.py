import math

import numpy as np
import pytest

from sisom import kernels
from sisom.nn import init_model

BACKENDS = [kernels.numpy_impl] + ([kernels.numba_impl] if kernels.numba_impl is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
def backend(request):
    return request.param


def py_dist(a, b):
    """Euclidean distance with plain Python floats, coordinates summed in order."""
    acc = 0.0
    for x, y in zip(a, b):
        diff = float(x) - float(y)
        acc += diff * diff
    return math.sqrt(acc)


def brute_class_distances(queries, q_cls, stored, s_cls, exclude=None):
    d_in, d_out = [], []
    for i, q in enumerate(queries):
        best_in = best_out = math.inf
        for j, s in enumerate(stored):
            d = py_dist(q, s)
            if s_cls[j] == q_cls[i]:
                if exclude is not None and exclude[i] == j:
                    continue
                best_in = min(best_in, d)
            else:
                best_out = min(best_out, d)
        d_in.append(best_in)
        d_out.append(best_out)
    return np.array(d_in), np.array(d_out)


@pytest.fixture
def small_model():
    return init_model((5, 7, 6, 3), (0, 1), seed=3)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
