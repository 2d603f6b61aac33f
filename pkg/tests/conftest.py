import numpy as np
import pytest

from htlearn import _kernels_py

try:
    from htlearn import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = [pytest.param(_kernels_py, id="python")]
if _compiled is not None:
    KERNELS.append(pytest.param(_compiled, id="cython"))


@pytest.fixture(params=KERNELS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# N=4 rejective example, exact rationals
P4 = np.array([0.2, 0.4, 0.6, 0.8])
PI4 = np.array([37, 92, 177, 232]) / 269


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results, key=lambda c: int(c[1:])):
        ok, detail = results[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'} {detail}")
