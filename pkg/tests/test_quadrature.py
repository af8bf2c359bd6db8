import math

import pytest

from loggsqg.errors import QuadratureFailure
from loggsqg.quadrature import adaptive_simpson


@pytest.mark.parametrize(
    "f, a, b, exact",
    [
        (math.sin, 0.0, math.pi, 2.0),
        (math.exp, 0.0, 1.0, math.e - 1.0),
        (lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0, math.pi / 4.0),
        (lambda x: x**3, -1.0, 2.0, 15.0 / 4.0),
    ],
)
def test_closed_forms(f, a, b, exact):
    assert adaptive_simpson(f, a, b, tol=1e-12) == pytest.approx(exact, rel=1e-11)


def test_reversed_and_empty_interval():
    assert adaptive_simpson(math.cos, 1.0, 0.0) == pytest.approx(-math.sin(1.0), rel=1e-10)
    assert adaptive_simpson(math.cos, 1.0, 1.0) == 0.0


def test_cubic_is_exact_on_first_accepted_level():
    # Simpson is exact for cubics, so the estimate is exact to roundoff
    assert adaptive_simpson(lambda x: 3 * x * x, 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_depth_budget_raises():
    with pytest.raises(QuadratureFailure):
        adaptive_simpson(lambda x: math.sin(1.0 / x) if x > 0 else 0.0, 0.0, 1.0, tol=1e-14, max_depth=8)
