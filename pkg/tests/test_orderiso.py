import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergodec.core import StateSpace, weighted_inner
from ergodec.errors import InputError, NotOrderIsomorphismError, ShapeError
from ergodec.orderiso import (
    OrderIso,
    adjoint,
    apply,
    compose,
    factorize,
    is_order_preserving,
    is_unitary,
    unitary_matrix_defect,
    weighted_transpose,
)

from conftest import unit_space


def swap_iso(mu1=(1.0, 4.0), mu2=(1.0, 1.0), h=(2.0, 1.0)):
    """X1 = {a, b}, X2 = {p, q}, tau(p) = b, tau(q) = a."""
    return OrderIso.from_maps(
        StateSpace(("a", "b"), mu1),
        StateSpace(("p", "q"), mu2),
        dict(zip("pq", h)),
        {"p": "b", "q": "a"},
    )


def random_iso(rng, n=None, unitary=False):
    n = int(rng.integers(1, 65)) if n is None else n
    dom = StateSpace(tuple(f"x{i}" for i in range(n)), rng.uniform(0.1, 10, n))
    cod_w = rng.uniform(0.1, 10, n)
    tau = rng.permutation(n)
    h = np.sqrt(dom.weights[tau] / cod_w) if unitary else rng.uniform(0.1, 10, n)
    return OrderIso(dom, StateSpace(tuple(f"y{i}" for i in range(n)), cod_w), h, tau)


# -- apply ------------------------------------------------------------------

def test_identity_apply():
    sp = unit_space("abc")
    iso = OrderIso(sp, sp, np.ones(3), np.arange(3))
    f = np.array([1.5, -2.0, 0.25])
    np.testing.assert_array_equal(apply(iso, f), f)
    np.testing.assert_array_equal(iso(np.zeros(3)), np.zeros(3))


def test_swap_apply():
    np.testing.assert_array_equal(swap_iso()([3.0, 5.0]), [10.0, 3.0])


def test_iso_rejects_bad_data():
    a, b = unit_space("ab"), unit_space("pq")
    with pytest.raises(InputError):
        OrderIso(a, b, [1.0, 0.0], [0, 1])
    with pytest.raises(InputError):
        OrderIso(a, b, [1.0, 1.0], [0, 0])
    with pytest.raises(ShapeError):
        OrderIso(a, unit_space("pqr"), [1.0, 1.0, 1.0], [0, 1, 2])


# -- factorize --------------------------------------------------------------

def test_factorize_identity():
    sp = unit_space("ab")
    iso = factorize(np.eye(2), sp, sp)
    np.testing.assert_array_equal(iso.h, [1, 1])
    np.testing.assert_array_equal(iso.tau, [0, 1])


def test_factorize_swap():
    iso = factorize(np.array([[0.0, 2.0], [1.0, 0.0]]), unit_space("ab"), unit_space("pq"))
    assert iso.h_map() == {"p": 2.0, "q": 1.0}
    assert iso.tau_map() == {"p": "b", "q": "a"}


@pytest.mark.parametrize(
    "matrix, axis, index",
    [
        ([[1.0, 1.0], [0.0, 1.0]], "row", 0),
        ([[1.0, 0.0], [0.0, 0.0]], "row", 1),
        ([[1.0, 0.0], [0.0, -1.0]], "row", 1),
        ([[1.0, 0.0], [1.0, 0.0]], "column", 0),
    ],
)
def test_factorize_names_offender(matrix, axis, index):
    with pytest.raises(NotOrderIsomorphismError) as err:
        factorize(np.array(matrix), unit_space("ab"), unit_space("pq"))
    assert err.value.axis == axis
    assert err.value.index == index
    assert err.value.point == ("pq" if axis == "row" else "ab")[index]


def test_factorize_threshold():
    m = np.array([[1.0, 1e-13], [0.0, 1.0]])
    assert factorize(m, unit_space("ab"), unit_space("pq")).h.tolist() == [1.0, 1.0]


# -- adjoint and unitarity --------------------------------------------------

def test_identity_adjoint():
    sp = StateSpace(("a", "b"), (2.0, 3.0))
    np.testing.assert_array_equal(adjoint(OrderIso(sp, sp, [1.0, 1.0], [0, 1])), np.eye(2))


def test_swap_adjoint():
    iso = swap_iso()
    adj = adjoint(iso)
    # (U* g) = (g_q, g_p / 2)
    np.testing.assert_allclose(adj, [[0.0, 1.0], [0.5, 0.0]])
    f, g = np.array([1.3, -0.7]), np.array([2.1, 0.4])
    lhs = weighted_inner(iso.codomain, iso(f), g)
    assert lhs == pytest.approx(2 * f[1] * g[0] + f[0] * g[1])
    assert lhs == pytest.approx(weighted_inner(iso.domain, f, adj @ g))


def test_unitarity_examples():
    sp = StateSpace(("a", "b"), (2.0, 3.0))
    assert is_unitary(OrderIso(sp, sp, [1.0, 1.0], [0, 1]))
    iso = swap_iso()
    assert is_unitary(iso)
    for e in np.eye(2):
        assert weighted_inner(iso.codomain, iso(e), iso(e)) == pytest.approx(
            weighted_inner(iso.domain, e, e)
        )
    assert not is_unitary(swap_iso(h=(1.0, 1.0)))


def test_order_preserving_examples():
    assert is_order_preserving(np.eye(2))
    assert is_order_preserving([[0, 2], [1, 0]])
    m = np.array([[1, -0.1], [0, 1]])
    assert not is_order_preserving(m)
    assert (m @ [0, 1]).min() < 0


def test_inverse_round_trip():
    rng = np.random.default_rng(11)
    iso = random_iso(rng, 12)
    np.testing.assert_allclose(iso.inverse().matrix() @ iso.matrix(), np.eye(12), atol=1e-14)


# -- properties -------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_factorize_round_trip(seed):
    iso = random_iso(np.random.default_rng(seed))
    back = factorize(iso.matrix(), iso.domain, iso.codomain)
    np.testing.assert_array_equal(back.tau, iso.tau)
    np.testing.assert_array_equal(back.h, iso.h)


@settings(max_examples=60, deadline=None)
@given(seed=seeds)
def test_composition_closure(seed):
    rng = np.random.default_rng(seed)
    first = random_iso(rng, 9)
    cod = StateSpace(tuple(f"z{i}" for i in range(9)), rng.uniform(0.1, 10, 9))
    second = OrderIso(first.codomain, cod, rng.uniform(0.1, 10, 9), rng.permutation(9))
    both = compose(second, first)
    got = factorize(second.matrix() @ first.matrix(), first.domain, cod)
    np.testing.assert_array_equal(got.tau, first.tau[second.tau])
    np.testing.assert_allclose(got.h, second.h * first.h[second.tau], rtol=1e-15)
    np.testing.assert_array_equal(both.tau, got.tau)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_adjoint_is_weighted_transpose(seed):
    iso = random_iso(np.random.default_rng(seed))
    ref = weighted_transpose(iso.matrix(), iso.domain.weights, iso.codomain.weights)
    assert np.max(np.abs(adjoint(iso) - ref)) <= 1e-12 * max(1.0, np.abs(ref).max())


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_unitary_isos(seed):
    iso = random_iso(np.random.default_rng(seed), unitary=True)
    assert is_unitary(iso)
    assert unitary_matrix_defect(iso.matrix(), iso.domain.weights, iso.codomain.weights) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_lattice_homomorphism(seed):
    rng = np.random.default_rng(seed)
    iso = random_iso(rng)
    f, g = rng.normal(size=(2, iso.domain.n))
    np.testing.assert_array_equal(iso(np.maximum(f, g)), np.maximum(iso(f), iso(g)))
    np.testing.assert_array_equal(iso(np.minimum(f, g)), np.minimum(iso(f), iso(g)))
