import numpy as np
import pytest

from icos.exceptions import QuadratureError
from icos.quadrature import GridKind, canonical_scheme, effective_weights, integrate, order, table_weights, weights


def test_table_weights_match_definitions():
    np.testing.assert_array_equal(table_weights("left", 5), [1, 1, 1, 1, 0])
    np.testing.assert_array_equal(table_weights("right", 5), [0, 1, 1, 1, 1])
    np.testing.assert_array_equal(table_weights("trap", 5), [0.5, 1, 1, 1, 0.5])
    np.testing.assert_allclose(table_weights("simpson", 7), np.array([1, 4, 2, 4, 2, 4, 1]) / 3)


def test_aliases_and_unknown_scheme():
    assert canonical_scheme("trapezoid") == "trap"
    assert order("simpson13") == 4
    with pytest.raises(QuadratureError):
        canonical_scheme("gauss")


def test_simpson_needs_odd_nodes():
    with pytest.raises(QuadratureError, match="odd"):
        table_weights("simpson", 6)


@pytest.mark.parametrize("scheme, expected", [("left", 1), ("right", 1), ("trap", 2), ("simpson", 4)])
def test_convergence_orders(scheme, expected):
    exact = np.exp(2.0) - np.exp(1.0)
    errs = []
    for n in (33, 65, 129):
        x = np.linspace(1.0, 2.0, n)
        errs.append(abs(integrate(np.exp(x), x, scheme) - exact))
    ratio = errs[0] / errs[1]
    assert 2**expected / 2 <= ratio <= 2**expected * 2
    assert np.log2(errs[1] / errs[2]) == pytest.approx(expected, abs=0.25)


def test_grid_detection():
    assert GridKind.detect(np.arange(10.0)).uniform
    g = GridKind.detect([1.0, 2.0, 4.0])
    assert not g.uniform
    np.testing.assert_array_equal(g.spacings, [1.0, 2.0])
    with pytest.raises(QuadratureError):
        GridKind.detect([1.0, 1.0, 2.0])


def test_non_uniform_grid_uses_trapezoid():
    x = np.array([0.0, 1.0, 3.0, 4.0])
    w, delta = weights("simpson", x)
    assert delta == 1.0
    np.testing.assert_allclose(w, [0.5, 1.5, 1.5, 0.5])
    # trapezoid is exact on linear functions
    assert integrate(2 * x + 1, x) == pytest.approx(20.0)


def test_effective_weights_sum_to_length():
    x = np.linspace(3.0, 7.0, 41)
    for s in ("trap", "simpson"):
        assert effective_weights(s, x).sum() == pytest.approx(4.0)


def test_length_mismatch():
    with pytest.raises(QuadratureError):
        integrate(np.ones(3), np.arange(4.0))
