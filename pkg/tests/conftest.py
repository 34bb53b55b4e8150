import numpy as np
import pytest

from dpplab.testfn import TestFunction, make_builtin


@pytest.fixture(scope="session")
def cosine_hat():
    return make_builtin("cosine_hat")


@pytest.fixture(scope="session")
def triangle():
    return make_builtin("triangle")


@pytest.fixture(scope="session")
def bump():
    return make_builtin("bump")


@pytest.fixture(scope="session")
def hermite():
    return make_builtin("hermite_gauss", [1.0])


@pytest.fixture(scope="session")
def zero_fn():
    return make_builtin("zero")


def dilate(f, c):
    """x -> f(c x) as a TestFunction (for scale-invariance checks)."""
    decay_c, p = f.fourier_decay
    return TestFunction(
        name=f"{f.name}_dilated",
        params=(c,),
        support_radius=f.support_radius / c,
        eval_fn=lambda x: f(c * np.asarray(x, dtype=float)),
        fourier_fn=lambda w: f.fourier(np.asarray(w, dtype=float) / c) / c,
        smoothness_epsilon=f.smoothness_epsilon,
        fourier_decay=(decay_c * c ** (p - 1.0), p) if c >= 1 else (decay_c / c, p),
        panels=tuple(b / c for b in f.panels),
        sup_norm=f.sup_norm,
    )
