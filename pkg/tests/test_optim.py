import math

import pytest
from scipy import optimize

from varbacktest.optim import nelder_mead


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_rosenbrock_minimum():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], step=0.1, max_iter=2000)
    assert res.converged
    assert res.x[0] == pytest.approx(1.0, abs=1e-5)
    assert res.x[1] == pytest.approx(1.0, abs=1e-5)


def test_agrees_with_scipy_on_smooth_problem():
    def f(x):
        return (x[0] - 0.3) ** 2 + 2 * (x[1] + 0.7) ** 2 + 0.5 * x[0] * x[1] + math.exp(0.1 * x[2]) + x[2] ** 2

    ours = nelder_mead(f, [0.0, 0.0, 0.0], max_iter=5000)
    ref = optimize.minimize(f, [0.0, 0.0, 0.0], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 5000})
    assert ours.fun == pytest.approx(ref.fun, abs=1e-9)
    for a, b in zip(ours.x, ref.x):
        assert a == pytest.approx(b, abs=1e-5)


def test_reports_non_convergence():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], max_iter=5)
    assert not res.converged
    assert res.nit == 5


def test_one_dimensional():
    res = nelder_mead(lambda x: (x[0] - 2.5) ** 2, [0.0], step=1.0)
    assert res.x[0] == pytest.approx(2.5, abs=1e-7)
