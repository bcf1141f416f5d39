import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import naive_term_matrix, random_physical_operator, random_raw_term, raw_sum_text
from supersel.branch import CapacityError
from supersel.grammar import parse_operator
from supersel.operators import (
    ComOperator,
    OperatorPolynomial,
    ProbeSpec,
    build_site_matrices,
    commutator_com,
    commutator_scaling,
    commutator_x,
    embed,
    realize,
    reorder_site,
    safe_indices,
    term_count_bound,
)

P = parse_operator
X1, P1, P2 = OperatorPolynomial.x(1), OperatorPolynomial.p(1), OperatorPolynomial.p(2)


def test_reorder_single_swap():
    # p x = x p - i
    assert reorder_site(0, 1, 1, 0) == {(1, 1): 1, (0, 0): -1j}


def test_multiply_matches_canonical_relation():
    assert (P1 * X1 - X1 * P1) == OperatorPolynomial.identity(-1j)
    assert (X1 * P1 - P1 * X1) == OperatorPolynomial.identity(1j)


def test_commutator_x_examples():
    assert commutator_x(1, X1).is_zero()
    assert commutator_x(1, P("p1^2")) == OperatorPolynomial({((1, 0, 1),): 2j})
    assert commutator_x(2, P("x2^2*p2")) == OperatorPolynomial({((2, 2, 0),): 1j})
    assert commutator_x(3, P("x1*p1 + p2^3")).is_zero()


def test_commutator_x_matches_multiplication():
    rng = np.random.default_rng(5)
    for _ in range(50):
        poly = random_physical_operator(rng, max_sites=2, max_momentum=3, max_site_label=3)
        for i in (1, 2, 3):
            xi = OperatorPolynomial.x(i)
            assert commutator_x(i, poly).allclose(xi * poly - poly * xi, atol=1e-12)


def test_commutator_com_examples():
    assert commutator_com(ComOperator(7), X1).is_zero()
    assert commutator_com(ComOperator(10), P1) == OperatorPolynomial.identity(0.1j)
    got = commutator_com(ComOperator(100), P("p1^2 + p2^2"))
    want = OperatorPolynomial({((1, 0, 1),): 0.02j, ((2, 0, 1),): 0.02j})
    assert got.allclose(want, atol=1e-15)
    with pytest.raises(ValueError):
        commutator_com(ComOperator(2), P("p3"))
    with pytest.raises(ValueError):
        ComOperator(0)


def test_commutator_linearity():
    rng = np.random.default_rng(6)
    for _ in range(30):
        a = random_physical_operator(rng)
        b = random_physical_operator(rng)
        alpha, beta = 0.3 - 1.2j, 2.5
        for i in range(1, 7):
            lhs = commutator_x(i, a.scale(alpha) + b.scale(beta))
            rhs = commutator_x(i, a).scale(alpha) + commutator_x(i, b).scale(beta)
            assert lhs.allclose(rhs, atol=1e-12)


def test_term_count_examples():
    assert term_count_bound(X1) == (0, 0)
    series = P("1 + p1 + p1^2 + p1^3")
    assert term_count_bound(series) == (3, 3)
    assert term_count_bound(P("p1^2*p2")) == (2, 6)


def test_term_count_bound_on_random_operators():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        poly = random_physical_operator(rng, max_sites=3, max_momentum=4)
        actual, bound = term_count_bound(poly)
        assert actual <= bound


def test_site_matrices_d2():
    mats = build_site_matrices(2)
    s = 1 / math.sqrt(2)
    assert np.allclose(mats.x_matrix, s * np.array([[0, 1], [1, 0]]), atol=1e-15)
    assert np.allclose(mats.p_matrix, s * np.array([[0, -1j], [1j, 0]]), atol=1e-15)


@pytest.mark.parametrize("d", range(2, 65))
def test_site_matrices_hermitian_and_canonical(d):
    mats = build_site_matrices(d)
    x, p = mats.x_matrix, mats.p_matrix
    assert np.allclose(x, x.conj().T, atol=1e-12)
    assert np.allclose(p, p.conj().T, atol=1e-12)
    comm = x @ p - p @ x
    assert np.allclose(comm[: d - 1, : d - 1], 1j * np.eye(d - 1), atol=1e-12)


def test_site_matrices_range():
    for bad in (1, 65):
        with pytest.raises(ValueError):
            build_site_matrices(bad)


def test_realize_examples():
    m2 = build_site_matrices(2)
    assert np.allclose(realize(P("x1"), m2), m2.x_matrix)
    assert np.allclose(realize(P("x1*p2"), m2), np.kron(m2.x_matrix, m2.p_matrix))
    m8 = build_site_matrices(8)
    got = realize(P("p1*x1"), m8)
    want = m8.p_matrix @ m8.x_matrix
    assert np.allclose(got[:6, :6], want[:6, :6], atol=1e-12)


def test_realize_capacity():
    mats = build_site_matrices(16)
    with pytest.raises(CapacityError):
        realize(P("x1*x2*x3*x4"), mats)


@given(st.integers(0, 2**32 - 1))
def test_normal_ordering_matches_naive_product(seed):
    rng = np.random.default_rng(seed)
    d = 16
    mats = build_site_matrices(d)
    sites = sorted(rng.choice([1, 2, 3], size=int(rng.integers(1, 3)), replace=False).tolist())
    raw = [(float(np.round(rng.normal(), 3)), random_raw_term(rng, sites)) for _ in range(3)]
    text = raw_sum_text(raw)
    poly = parse_operator(text)
    naive = sum(c * naive_term_matrix(f, sites, mats) for c, f in raw)
    got = realize(poly, mats, sites=sites)
    degree = max(max((sum(p for _, _, p in f) for _, f in raw)), 1)
    safe = safe_indices(d, len(sites), d - degree)
    assert np.abs(got[:, safe] - naive[:, safe]).max() <= 1e-10


def test_commutator_matches_matrix_oracle():
    rng = np.random.default_rng(8)
    d = 16
    mats = build_site_matrices(d)
    for _ in range(10):
        poly = random_physical_operator(rng, max_sites=2, max_momentum=3)
        sites = poly.support
        R = realize(poly, mats, sites=sites, sparse=True)
        safe = safe_indices(d, len(sites), d - poly.degree - 1)
        for i in sites:
            Xi = embed(mats.x_matrix, i, sites, d)
            oracle = (Xi @ R - R @ Xi).toarray()[:, safe]
            got = realize(commutator_x(i, poly), mats, sites=sites)[:, safe]
            assert np.abs(got - oracle).max() <= 1e-10


def test_commutator_scaling_zero_series():
    s = commutator_scaling(X1, 8, [2, 4, 8])
    assert s.exact_zero and s.slope is None
    assert np.all(s.values == 0)


def test_commutator_scaling_halves_with_doubled_N():
    s = commutator_scaling(P("p1^2"), 16, [10, 20])
    v10, v20 = s.values
    assert v10 / v20 == pytest.approx(2.0, rel=1e-12)


def test_commutator_scaling_slope():
    s = commutator_scaling(P("p1^2*x2"), 16, [8, 16, 32, 64, 128, 256])
    assert s.slope == pytest.approx(-1.0, abs=1e-9)
    vals = s.values
    for n1, v1 in zip(s.parameters, vals):
        for n2, v2 in zip(s.parameters, vals):
            assert v1 / v2 == pytest.approx(n2 / n1, rel=1e-12)


def test_commutator_scaling_basis_probes_and_errors():
    s = commutator_scaling(P("p1^3"), 8, [4, 8], ProbeSpec(kind="basis"))
    assert s.slope == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ValueError):
        commutator_scaling(P("p1"), 8, [])
    with pytest.raises(ValueError):
        commutator_scaling(P("p3"), 8, [2])
    bad = np.zeros(8)
    bad[-1] = 1.0
    with pytest.raises(ValueError):
        commutator_scaling(P("p1^2"), 8, [4], ProbeSpec(vectors=bad))
