import math

import numpy as np
import pytest

from vqualkit.errors import CalibrationDegenerate, CorrelationDegenerate
from vqualkit.stats import evaluate, fitted_plcc, plcc, srcc


def brute_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def brute_ranks(v):
    return [sum(1 for w in v if w < a) + (sum(1 for w in v if w == a) + 1) / 2 for a in v]


def test_examples():
    assert plcc([1, 2, 3, 5], [2, 4, 5, 9]) == pytest.approx(0.9944903161976939, abs=1e-12)
    assert srcc([1, 2, 2, 3], [10, 20, 30, 40]) == pytest.approx(0.9486832980505138, abs=1e-12)
    assert srcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)


def test_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(3, 21))
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.normal(size=n)
        if np.ptp(x) == 0:
            continue
        assert abs(plcc(x, y) - brute_pearson(list(x), list(y))) < 1e-12
        assert abs(srcc(x, y) - brute_pearson(brute_ranks(list(x)), brute_ranks(list(y)))) < 1e-12


def test_degenerate():
    with pytest.raises(CorrelationDegenerate):
        plcc([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        srcc([1, 2], [1, 2])
    with pytest.raises(CalibrationDegenerate):
        fitted_plcc([0.5] * 10, list(range(10)))


def test_fitted_plcc_on_logistic_warp():
    x = np.linspace(-1, 1, 30)
    gt = 1 / (1 + np.exp(-5 * x))
    assert plcc(x, gt) < 0.98
    assert fitted_plcc(x, gt) == pytest.approx(1.0, abs=1e-9)


def test_fitted_plcc_not_below_raw():
    rng = np.random.default_rng(1)
    for _ in range(40):
        n = int(rng.integers(8, 40))
        x = rng.normal(size=n)
        y = x + rng.normal(size=n) * rng.uniform(0, 2)
        assert fitted_plcc(x, y) >= plcc(x, y) - 1e-9


def test_evaluate_keys():
    x = np.linspace(0, 1, 12)
    d = evaluate(x, x ** 2)
    assert set(d) == {"srcc", "plcc", "fitted_plcc", "n"}
    assert d["srcc"] == pytest.approx(1.0) and d["n"] == 12
