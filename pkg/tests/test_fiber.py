"""Fiber signatures, packed antisymmetric storage, pointwise algebra."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covform.fiber import (Endomorphism, FiberSignature, InternalCovector,
                           InternalVector, Metric, Multiplicity, Spinor,
                           alt_project, commutator, complement_table,
                           complementary_convert, epsilon_symbol, hodge_star,
                           index_combos, interior_product, n_slots, pack,
                           perm_sign, slot_lookup, unpack, wedge)
from covform.grid import Chart, GridField, make_trig_field


def test_perm_sign_basics():
    assert perm_sign((0, 1, 2)) == 1
    assert perm_sign((1, 0, 2)) == -1
    assert perm_sign((2, 0, 1)) == 1
    assert perm_sign((0, 0, 1)) == 0


@settings(max_examples=50, deadline=None)
@given(st.permutations(list(range(5))))
def test_perm_sign_composition(p):
    # sign of a permutation equals the parity of its inversion count
    inv = sum(1 for i in range(5) for j in range(i + 1, 5) if p[i] > p[j])
    assert perm_sign(p) == (-1) ** inv


def test_epsilon_symbol():
    assert epsilon_symbol((0, 1, 2, 3)) == 1
    assert epsilon_symbol((1, 0, 2, 3)) == -1
    assert epsilon_symbol((0, 0, 2, 3)) == 0


def test_slot_tables():
    assert index_combos(4, 2) == ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
    assert n_slots(4, 2) == 6
    slot, sign = slot_lookup(4, (2, 0))
    assert (slot, sign) == (1, -1)
    slot, sign = slot_lookup(4, (1, 1))
    assert sign == 0


def test_complement_table_signs():
    # (A, complement) must assemble the positively oriented epsilon
    for r in range(5):
        for (a, (_, sign)) in zip(index_combos(4, r), complement_table(4, r)):
            comp = tuple(i for i in range(4) if i not in a)
            assert sign == perm_sign(a + comp)


@settings(max_examples=25, deadline=None)
@given(r=st.integers(0, 4), seed=st.integers(0, 10 ** 6))
def test_pack_unpack_roundtrip(r, seed):
    m = 4
    rng = np.random.default_rng(seed)
    packed = rng.normal(size=(2, n_slots(m, r), 3))
    full = unpack(m, r, packed, 1)
    assert np.array_equal(pack(m, r, full, 1), packed)
    # unpacked array is antisymmetric under any index swap
    if r >= 2:
        swapped = np.swapaxes(full, 1, 2)
        assert np.array_equal(swapped, -full)


def test_alt_project_idempotent():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4, 4))
    p = alt_project(a, (0, 1, 2))
    assert np.allclose(alt_project(p, (0, 1, 2)), p)


def test_commutator_antisymmetry():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 5, 3, 3))
    assert np.allclose(commutator(a, b), -commutator(b, a))


def test_signature_dual_and_shapes():
    sig = FiberSignature((InternalVector(3), Multiplicity(2)), 1, "standard")
    assert sig.fiber_shape == (3, 2)
    assert sig.dual().factors[0] == InternalCovector(3)
    assert sig.dual().factors[1] == Multiplicity(2)
    assert FiberSignature((Spinor(4),), 0).has_spinor()
    assert sig.form_degree(4) == 1
    comp = FiberSignature((), 1, "complementary")
    assert comp.form_degree(4) == 3
    with pytest.raises(ValueError):
        FiberSignature((), 0, "weird")


def test_metric_minkowski_and_frw():
    ch = Chart(4, 4)
    mink = Metric.minkowski(ch)
    assert np.allclose(mink.sqrt_abs_det, 1.0)
    frw = Metric.frw(ch, eps=0.1)
    a2 = -frw.g[..., 1, 1]
    assert np.allclose(frw.sqrt_abs_det, a2 ** 1.5)
    assert np.allclose(np.einsum("...ab,...bc->...ac", frw.g, frw.inv),
                       np.eye(4), atol=1e-12)


def test_metric_validation():
    ch = Chart(2, 4)
    bad = np.zeros(ch.shape + (2, 2))
    bad[..., 0, 1] = 1.0
    with pytest.raises(ValueError):
        Metric(ch, bad)


def test_complementary_convert_roundtrip():
    ch = Chart(4, 4)
    sig = FiberSignature((InternalVector(2),), 2, "standard")
    f = make_trig_field(ch, sig, seed=3, max_wavenumber=1)
    there = complementary_convert(f, "to_complementary")
    assert there.signature.rep == "complementary"
    assert there.signature.degree == 2
    back = complementary_convert(there, "to_standard")
    assert np.allclose(back.data, f.data, atol=1e-14)


def test_wedge_scalar_one_forms_antisymmetric():
    ch = Chart(4, 4)
    sig1 = FiberSignature((), 1, "standard")
    a = make_trig_field(ch, sig1, seed=1, max_wavenumber=1)
    b = make_trig_field(ch, sig1, seed=2, max_wavenumber=1)
    ab = wedge(a, b)
    ba = wedge(b, a)
    assert ab.signature.degree == 2
    assert np.allclose(ab.data, -ba.data, atol=1e-13)
    # components: (a ^ b)_{ij} = a_i b_j - a_j b_i
    want = (a.data[..., 0] * b.data[..., 1]
            - a.data[..., 1] * b.data[..., 0])
    assert np.allclose(ab.data[..., 0], want, atol=1e-13)


def test_interior_product_nilpotent():
    ch = Chart(4, 4)
    sig = FiberSignature((InternalVector(2),), 2, "standard")
    f = make_trig_field(ch, sig, seed=9, max_wavenumber=1)
    rng = np.random.default_rng(4)
    u = rng.normal(size=ch.shape + (4,))
    once = interior_product(u, f)
    twice = interior_product(u, once)
    assert twice.sup_norm() < 1e-12 * max(f.sup_norm(), 1.0)


def test_hodge_star_flat_components():
    # on Minkowski, *(dx^0) has complementary components g^{00} = +1
    ch = Chart(4, 4)
    met = Metric.minkowski(ch)
    sig = FiberSignature((), 1, "standard")
    data = np.zeros(ch.shape + (4,))
    data[..., 0] = 1.0
    star = hodge_star(GridField(ch, sig, data), met)
    assert star.signature.rep == "complementary"
    assert np.allclose(star.data[..., 0], 1.0)
    assert np.allclose(star.data[..., 1:], 0.0)
